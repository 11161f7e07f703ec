"""Private zeroth-order optimization of nonsmooth nonconvex objectives."""

__version__ = "0.1.0"
