"""Noise calibration and sensitivity bookkeeping for (alpha, alpha rho^2 / 2)-RDP.

A privacy budget is a single scale ``rho``; ``rho = inf`` is the non-private
mode in which every noise scale is zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

NON_PRIVATE = math.inf


@dataclass(frozen=True)
class PrivacyBudget:
    rho: float = NON_PRIVATE

    def __post_init__(self):
        if not self.rho > 0 or math.isnan(self.rho):
            raise ValueError(f"rho must be positive (or inf), got {self.rho}")

    @property
    def private(self) -> bool:
        return math.isfinite(self.rho)


@dataclass(frozen=True)
class SensitivityRecord:
    s: float
    source: str

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("sensitivity must be non-negative")


def sigma_schedule(d: int, L: float, B2: int, T: int, rho: float) -> float:
    """Constant tree-noise scale sqrt(2 ln T) * 4 d L / (B2 T rho).

    Valid when B1 >= T * B2 / 2 and the OSD domain radius is delta / T.
    """
    if T < 2:
        raise ValueError(f"T must be >= 2 for a nonzero noise scale, got {T}")
    if d <= 0 or L <= 0 or B2 <= 0 or not rho > 0:
        raise ValueError("d, L, B2 and rho must be positive")
    if math.isinf(rho):
        return 0.0
    return math.sqrt(2.0 * math.log(T)) * 4.0 * d * L / (B2 * T * rho)


def naive_sigma(d: int, L: float, B: int, rho: float) -> float:
    """Per-step Gaussian scale dL / (B rho) of the non-tree baseline oracle."""
    if d <= 0 or L <= 0 or B <= 0 or not rho > 0:
        raise ValueError("d, L, B and rho must be positive")
    return 0.0 if math.isinf(rho) else d * L / (B * rho)


def sensitivity_bounds(d, L, B1, B2, delta, D) -> tuple[float, float]:
    """(grad-step, diff-step) L2 sensitivities.

    A diff step moves its query point by at most 2D, so its sensitivity is
    2dL * 2D / (B2 delta); with D = delta / T this is 4dL / (B2 T).
    """
    return 2.0 * d * L / B1, 2.0 * d * L * (2.0 * D) / (B2 * delta)


def rdp_to_dp(rho: float, dp_delta: float) -> float:
    """epsilon of the (epsilon, dp_delta)-DP guarantee implied by the RDP budget."""
    if not 0 < dp_delta <= 1:
        raise ValueError(f"dp_delta must lie in (0, 1], got {dp_delta}")
    if dp_delta < math.exp(-rho ** 2):
        raise ValueError(f"dp_delta={dp_delta} below exp(-rho^2)={math.exp(-rho ** 2)}")
    return 2.0 * rho * math.sqrt(math.log(1.0 / dp_delta))


def empirical_sensitivity_probe(oracle_step, batch, n_swaps, rng, replacement=None):
    """Largest output change over ``n_swaps`` neighboring batches.

    ``oracle_step(batch)`` must be deterministic in the batch (directions
    frozen, e.g. by reseeding inside the call).  Each swap replaces one
    uniformly chosen row with ``replacement(rng)`` or, by default, with a
    random row of the same batch scaled by a random sign.
    """
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    base = oracle_step(batch)
    worst = 0.0
    for _ in range(n_swaps):
        i = int(rng.integers(len(batch)))
        if replacement is None:
            new_row = rng.choice([-1.0, 1.0]) * batch[rng.integers(len(batch))]
        else:
            new_row = np.asarray(replacement(rng), dtype=float)
        neighbor = batch.copy()
        neighbor[i] = new_row
        worst = max(worst, float(np.linalg.norm(oracle_step(neighbor) - base)))
    return worst
