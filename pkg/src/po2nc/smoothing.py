"""Zeroth-order estimators of the uniformly smoothed gradient.

The smoothed objective is F_delta(x) = E_{v ~ unit ball} F(x + delta v).  Its
gradient equals E_{u ~ sphere}[(d / 2 delta)(F(x + delta u) - F(x - delta u)) u],
which both estimators below sample with ``d`` directions per data point.

Directions are drawn as one ``(b, d, dim)`` block of standard normals in
row-major (data point, direction) order, so an estimate is a pure function
of its inputs and the generator state.  Each direction consumes ``dim``
normal draws; a direction whose pre-normalization norm falls under 1e-8 is
redrawn (probability zero in practice, but it would shift the stream).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_DEGENERATE_NORM = 1e-8
_CHUNK_DIRECTIONS = 1 << 20


@dataclass(frozen=True)
class SmoothingParams:
    delta: float
    dim: int
    lipschitz: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if not self.lipschitz > 0:
            raise ValueError(f"lipschitz must be positive, got {self.lipschitz}")


def sample_directions(shape, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform unit vectors with array shape ``(*shape, dim)``."""
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    shape = (shape,) if isinstance(shape, (int, np.integer)) else tuple(shape)
    U = rng.standard_normal(shape + (dim,))
    norms = np.linalg.norm(U, axis=-1, keepdims=True)
    bad = norms[..., 0] < _DEGENERATE_NORM
    while np.any(bad):
        U[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(U, axis=-1, keepdims=True)
        bad = norms[..., 0] < _DEGENERATE_NORM
    return U / norms


def sample_unit_sphere(dim: int, rng: np.random.Generator) -> np.ndarray:
    return sample_directions((), dim, rng)


def sample_unit_ball(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    U = sample_directions(n, dim, rng)
    return U * rng.random((n, 1)) ** (1.0 / dim)


def _check_batches(batches, dim_name="batch"):
    if batches.ndim != 3 or batches.shape[1] == 0:
        raise ValueError(f"{dim_name} must contain at least one data point")


def _grad_core(f, sp, x, batches, U):
    n_calls, b, m, dim = U.shape
    p = batches.shape[-1]
    Z = np.broadcast_to(batches[:, :, None, :], (n_calls, b, m, p)).reshape(-1, p)
    shift = sp.delta * U.reshape(-1, dim)
    diff = f.values(x + shift, Z) - f.values(x - shift, Z)
    coef = (dim / (2.0 * sp.delta)) * diff.reshape(n_calls, b, m, 1)
    return (coef * U).mean(axis=(1, 2))


def _diff_core(f, sp, x, y, batches, U):
    n_calls, b, m, dim = U.shape
    p = batches.shape[-1]
    Z = np.broadcast_to(batches[:, :, None, :], (n_calls, b, m, p)).reshape(-1, p)
    shift = sp.delta * U.reshape(-1, dim)
    diff = f.values(x + shift, Z) - f.values(y + shift, Z)
    coef = (dim / sp.delta) * diff.reshape(n_calls, b, m, 1)
    return (coef * U).mean(axis=(1, 2))


def _as_batches(batch):
    batch = np.asarray(batch, dtype=float)
    if batch.ndim == 1:
        batch = batch[:, None]
    return batch[None]


def grad_estimate(f, sp: SmoothingParams, x, batch, rng) -> np.ndarray:
    """Two-point estimate of the smoothed gradient at ``x`` from ``b`` data rows.

    Uses ``b * dim`` fresh directions and ``2 * b * dim`` objective evaluations.
    """
    x = np.asarray(x, dtype=float)
    batches = _as_batches(batch)
    _check_batches(batches)
    U = sample_directions((1, batches.shape[1], sp.dim), sp.dim, rng)
    return _grad_core(f, sp, x, batches, U)[0]


def diff_estimate(f, sp: SmoothingParams, x, y, batch, rng) -> np.ndarray:
    """Estimate of grad F_delta(x) - grad F_delta(y), same direction at x and y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    batches = _as_batches(batch)
    _check_batches(batches)
    U = sample_directions((1, batches.shape[1], sp.dim), sp.dim, rng)
    return _diff_core(f, sp, x, y, batches, U)[0]


def _chunked(batches, sp, rng, core):
    n_calls, b = batches.shape[:2]
    per_call = b * sp.dim
    step = max(1, _CHUNK_DIRECTIONS // per_call)
    out = np.empty((n_calls, sp.dim))
    for lo in range(0, n_calls, step):
        hi = min(n_calls, lo + step)
        U = sample_directions((hi - lo, b, sp.dim), sp.dim, rng)
        out[lo:hi] = core(batches[lo:hi], U)
    return out


def grad_estimate_repeated(f, sp, x, batches, rng) -> np.ndarray:
    """``n`` independent ``grad_estimate`` calls on the batches ``(n, b, p)``.

    Draws the same stream as ``n`` sequential calls, so row ``i`` matches the
    ``i``-th sequential call bit for bit.
    """
    x = np.asarray(x, dtype=float)
    batches = np.asarray(batches, dtype=float)
    _check_batches(batches)
    return _chunked(batches, sp, rng, lambda B, U: _grad_core(f, sp, x, B, U))


def diff_estimate_repeated(f, sp, x, y, batches, rng) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    batches = np.asarray(batches, dtype=float)
    _check_batches(batches)
    return _chunked(batches, sp, rng, lambda B, U: _diff_core(f, sp, x, y, B, U))


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    n_samples: int


def smoothed_grad_reference(f, sp, x, sample_data, n_samples, rng, *,
                            with_stderr=False, chunk=200_000):
    """Monte-Carlo reference for grad F_delta(x); a test oracle only.

    Each sample pairs one fresh data row with one sphere direction and
    evaluates the two-point term.  ``sample_data(rng, n)`` returns data rows.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    x = np.asarray(x, dtype=float)
    total = np.zeros(sp.dim)
    total_sq = np.zeros(sp.dim)
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        Z = np.asarray(sample_data(rng, n), dtype=float)
        U = sample_directions(n, sp.dim, rng)
        shift = sp.delta * U
        diff = f.values(x + shift, Z) - f.values(x - shift, Z)
        terms = (sp.dim / (2.0 * sp.delta)) * diff[:, None] * U
        total += terms.sum(axis=0)
        total_sq += (terms ** 2).sum(axis=0)
        done += n
    mean = total / n_samples
    if not with_stderr:
        return mean
    var = np.maximum(total_sq / n_samples - mean ** 2, 0.0)
    stderr = np.sqrt(var / max(n_samples - 1, 1))
    return MonteCarloEstimate(mean, stderr, n_samples)


def smoothed_value_reference(f, sp, x, sample_data, n_samples, rng, *, chunk=200_000):
    """Monte-Carlo estimate of F_delta(x) over the unit ball; returns (mean, stderr)."""
    x = np.asarray(x, dtype=float)
    total = total_sq = 0.0
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        Z = np.asarray(sample_data(rng, n), dtype=float)
        v = f.values(x + sp.delta * sample_unit_ball(n, sp.dim, rng), Z)
        total += v.sum()
        total_sq += (v ** 2).sum()
        done += n
    mean = total / n_samples
    var = max(total_sq / n_samples - mean ** 2, 0.0)
    return mean, float(np.sqrt(var / max(n_samples - 1, 1)))
