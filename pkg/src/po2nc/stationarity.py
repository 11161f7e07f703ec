"""Upper-bound certificates for the Goldstein delta-stationarity measure.

For any finite set S inside B(x, delta), the norm of the average gradient over
S bounds ||grad F(x)||_delta from above.  Population gradients are replaced
by Monte-Carlo averages of the objective's a.e. gradient over fresh data.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .smoothing import sample_unit_ball


@dataclass(frozen=True)
class Certificate:
    value: float
    kind: str
    n_samples: int
    stderr: float = 0.0
    n_points: int = 1


def _mc_average_gradient(objective, points, sample_data, n_mc, rng, chunk=4096):
    """Mean over points and data draws of grad_ae, with a per-datum stderr."""
    total = np.zeros(objective.dim)
    total_sq = 0.0
    done = 0
    while done < n_mc:
        n = min(chunk, n_mc - done)
        Z = np.asarray(sample_data(rng, n), dtype=float)
        V = objective.mean_grad_per_datum(points, Z)
        total += V.sum(axis=0)
        total_sq += float(np.einsum("ij,ij->", V, V))
        done += n
    mean = total / n_mc
    # trace of the covariance of the per-datum vectors, divided by n_mc
    var = max(total_sq / n_mc - float(mean @ mean), 0.0)
    return mean, float(np.sqrt(var / max(n_mc - 1, 1)))


def inner_average_certificate(objective, w_list, sample_data, n_mc, rng, delta=None):
    """||(1/T) sum_t grad F(w_t)||, a bound on ||grad F(mean w)||_delta.

    With ``delta`` given, every w_t must lie within delta of the mean or the
    bound does not apply.
    """
    W = np.atleast_2d(np.asarray(w_list, dtype=float))
    if delta is not None:
        spread = np.linalg.norm(W - W.mean(axis=0), axis=1).max()
        if spread > delta * (1 + 1e-12):
            raise ValueError(f"points spread {spread:.3g} exceeds delta={delta}")
    mean, stderr = _mc_average_gradient(objective, W, sample_data, n_mc, rng)
    return Certificate(float(np.linalg.norm(mean)), "inner-average", n_mc, stderr, len(W))


def ball_sample_certificate(objective, x, delta, n_points, n_mc, rng):
    """Average-gradient norm over ``n_points`` uniform points of B(x, delta)."""
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    x = np.asarray(x, dtype=float)
    Y = x + delta * sample_unit_ball(n_points, x.shape[0], rng)
    mean, stderr = _mc_average_gradient(objective, Y, objective.sample_data, n_mc, rng)
    return Certificate(float(np.linalg.norm(mean)), "ball-sample", n_mc, stderr, n_points)
