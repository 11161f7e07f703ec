"""Synthetic stochastic objectives with known Lipschitz constants.

Every objective evaluates ``f(x, z)`` row-wise: ``values(X, Z)`` takes an
``(n, dim)`` array of points and an ``(n, p)`` array of data rows.  Data rows
are plain float arrays so datasets round-trip through CSV.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class StochasticObjective:
    """Base class: subclasses implement ``values`` and ``grads_ae``."""

    dim: int
    lipschitz: float
    data_width: int = 1

    def values(self, X: np.ndarray, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grads_ae(self, X: np.ndarray, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def value(self, x, z) -> float:
        return float(self.values(np.atleast_2d(x), np.atleast_2d(z))[0])

    def grad_ae(self, x, z) -> np.ndarray:
        return self.grads_ae(np.atleast_2d(x), np.atleast_2d(z))[0]

    def smoothed_grad_closed_form(self, x, delta: float) -> np.ndarray | None:
        return None

    def sample_data(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.zeros((n, self.data_width))

    def mean_grad_per_datum(self, W: np.ndarray, Z: np.ndarray) -> np.ndarray:
        """For each data row z, the average of grad_ae(w, z) over all rows w of W.

        Returns an ``(len(Z), dim)`` array.  Subclasses override this with a
        closed-form contraction; the fallback loops over points.
        """
        out = np.zeros((len(Z), self.dim))
        for w in W:
            out += self.grads_ae(np.broadcast_to(w, (len(Z), self.dim)), Z)
        return out / len(W)


@dataclass(frozen=True, eq=False)
class LinearObjective(StochasticObjective):
    """f(x, z) = <a, x>, independent of z."""

    a: np.ndarray

    @property
    def dim(self):
        return self.a.shape[0]

    @property
    def lipschitz(self):
        return float(np.linalg.norm(self.a))

    def values(self, X, Z):
        return X @ self.a

    def grads_ae(self, X, Z):
        return np.broadcast_to(self.a, X.shape).copy()

    def smoothed_grad_closed_form(self, x, delta):
        return self.a.copy()

    def mean_grad_per_datum(self, W, Z):
        return np.broadcast_to(self.a, (len(Z), self.dim)).copy()


@dataclass(frozen=True, eq=False)
class QuadraticObjective(StochasticObjective):
    """f(x, z) = ||x||^2 / 2.

    Only Lipschitz on the ball ||x|| <= radius, where L = radius; a test
    objective whose smoothed gradient is the identity map.
    """

    dim: int
    radius: float = 1.0

    @property
    def lipschitz(self):
        return float(self.radius)

    def values(self, X, Z):
        return 0.5 * np.einsum("ij,ij->i", X, X)

    def grads_ae(self, X, Z):
        return np.array(X, dtype=float, copy=True)

    def smoothed_grad_closed_form(self, x, delta):
        return np.array(x, dtype=float, copy=True)

    def mean_grad_per_datum(self, W, Z):
        return np.broadcast_to(W.mean(axis=0), (len(Z), self.dim)).copy()


@dataclass(frozen=True, eq=False)
class DataLinearObjective(StochasticObjective):
    """f(x, z) = scale * <z, x> with z a unit vector; the worst case for sensitivity."""

    dim: int
    scale: float = 1.0

    @property
    def lipschitz(self):
        return float(self.scale)

    @property
    def data_width(self):
        return self.dim

    def values(self, X, Z):
        return self.scale * np.einsum("ij,ij->i", X, Z)

    def grads_ae(self, X, Z):
        return self.scale * np.array(Z, dtype=float, copy=True)

    def sample_data(self, rng, n):
        Z = rng.standard_normal((n, self.dim))
        return Z / np.linalg.norm(Z, axis=1, keepdims=True)

    def mean_grad_per_datum(self, W, Z):
        return self.scale * np.array(Z, dtype=float, copy=True)


@dataclass(frozen=True, eq=False)
class L1Objective(StochasticObjective):
    """f(x, z) = ||x||_1 with a symmetric kink at every coordinate hyperplane.

    Gradients at a kink use the right limit (sign(0) := +1).
    """

    dim: int

    @property
    def lipschitz(self):
        return float(np.sqrt(self.dim))

    def values(self, X, Z):
        return np.abs(X).sum(axis=1)

    def grads_ae(self, X, Z):
        return np.where(X >= 0, 1.0, -1.0)

    def mean_grad_per_datum(self, W, Z):
        g = np.where(W >= 0, 1.0, -1.0).mean(axis=0)
        return np.broadcast_to(g, (len(Z), self.dim)).copy()


@dataclass(frozen=True, eq=False)
class PiecewiseLinearRegression(StochasticObjective):
    """Absolute-residual regression, optionally capped at ``cap``.

    Data rows are ``(a_1, ..., a_dim, b)`` with ``||a|| = 1``; the loss is
    ``|<a, x> - b|`` or ``min(|<a, x> - b|, cap)``.  Both are 1-Lipschitz.
    Labels are generated as ``b = <a, x_star> + noise_std * N(0, 1)``.

    Kinks follow the right-limit convention in the residual r: the gradient is
    ``+a`` on ``0 <= r < cap``, ``-a`` on ``-cap <= r < 0`` and 0 elsewhere.
    """

    x_star: np.ndarray
    noise_std: float = 0.1
    cap: float | None = None

    @property
    def dim(self):
        return self.x_star.shape[0]

    @property
    def lipschitz(self):
        return 1.0

    @property
    def data_width(self):
        return self.dim + 1

    def _residual(self, X, Z):
        return np.einsum("ij,ij->i", X, Z[:, :-1]) - Z[:, -1]

    def _slope(self, r):
        s = np.where(r >= 0, 1.0, -1.0)
        if self.cap is not None:
            s = np.where((r >= self.cap) | (r < -self.cap), 0.0, s)
        return s

    def values(self, X, Z):
        loss = np.abs(self._residual(X, Z))
        if self.cap is not None:
            loss = np.minimum(loss, self.cap)
        return loss

    def grads_ae(self, X, Z):
        return self._slope(self._residual(X, Z))[:, None] * Z[:, :-1]

    def sample_data(self, rng, n):
        A = rng.standard_normal((n, self.dim))
        A /= np.linalg.norm(A, axis=1, keepdims=True)
        b = A @ self.x_star + self.noise_std * rng.standard_normal(n)
        return np.column_stack([A, b])

    def mean_grad_per_datum(self, W, Z):
        A, b = Z[:, :-1], Z[:, -1]
        slopes = self._slope(W @ A.T - b)  # (n_points, n_data)
        return slopes.mean(axis=0)[:, None] * A


def make_linear(a) -> LinearObjective:
    a = np.asarray(a, dtype=float)
    if not np.any(a):
        raise ValueError("linear objective needs a nonzero coefficient vector")
    return LinearObjective(a)


def make_quadratic(dim: int, radius: float = 1.0) -> QuadraticObjective:
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    return QuadraticObjective(dim, radius)


def make_piecewise_linear_regression(dim, n_data, rng, *, capped=False, cap=1.0,
                                     noise_std=0.1, x_star_norm=1.0):
    """Build the regression objective and an i.i.d. dataset of ``n_data`` rows."""
    if dim < 1 or n_data < 1:
        raise ValueError("dim and n_data must be >= 1")
    direction = rng.standard_normal(dim)
    x_star = x_star_norm * direction / np.linalg.norm(direction)
    obj = PiecewiseLinearRegression(x_star, noise_std, cap if capped else None)
    return obj, obj.sample_data(rng, n_data)


def lipschitz_audit(objective, rng, n_pairs=10_000, scale=1.0, radius=None):
    """Max of |f(x,z) - f(y,z)| / (L ||x - y||) over random pairs.

    Points are Gaussian with the given scale; ``radius`` projects them into a
    ball first, for objectives only Lipschitz on a ball.
    """
    X = scale * rng.standard_normal((n_pairs, objective.dim))
    Y = scale * rng.standard_normal((n_pairs, objective.dim))
    if radius is not None:
        for P in (X, Y):
            norms = np.linalg.norm(P, axis=1, keepdims=True)
            P *= np.minimum(1.0, radius / np.maximum(norms, 1e-300))
    Z = objective.sample_data(rng, n_pairs)
    diff = np.abs(objective.values(X, Z) - objective.values(Y, Z))
    dist = np.linalg.norm(X - Y, axis=1)
    return float(np.max(diff / (objective.lipschitz * dist)))


def save_dataset_csv(path, data: np.ndarray) -> None:
    """Write data rows as CSV, header ``a_1..a_d,b`` for regression rows."""
    data = np.atleast_2d(data)
    header = [f"a_{i + 1}" for i in range(data.shape[1] - 1)] + ["b"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in data:
            writer.writerow([repr(float(v)) for v in row])


def load_dataset_csv(path) -> np.ndarray:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(v) for v in row] for row in rows[1:]])
