"""Projected online subgradient descent on the ball of radius D."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def project_ball(x, D: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x)
    if norm <= D:
        return x.copy()
    return (D / norm) * x


@dataclass
class OsdState:
    """Adaptive-stepsize OSD: eta_t = D / sqrt(sum of squared loss norms so far)."""

    dim: int
    radius: float
    delta_vec: np.ndarray = field(default=None)
    grad_sq_sum: float = 0.0
    step_count: int = 0

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.delta_vec is None:
            self.delta_vec = np.zeros(self.dim)

    def reset(self) -> None:
        self.delta_vec = np.zeros(self.dim)
        self.grad_sq_sum = 0.0
        self.step_count = 0

    def step(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if g.shape != (self.dim,):
            raise ValueError(f"loss vector has shape {g.shape}, expected ({self.dim},)")
        self.grad_sq_sum += float(g @ g)
        self.step_count += 1
        if self.grad_sq_sum > 0:
            eta = self.radius / np.sqrt(self.grad_sq_sum)
            self.delta_vec = project_ball(self.delta_vec - eta * g, self.radius)
        return self.delta_vec


def osd_step(state: OsdState, g) -> np.ndarray:
    return state.step(g)


@dataclass(frozen=True)
class RegretAudit:
    regret: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.regret <= self.bound


def regret_audit(deltas, grads, D: float) -> RegretAudit:
    """Regret against the best fixed point of the D-ball for linear losses.

    The comparator is -D * sum(g) / ||sum(g)||, giving
    regret = sum <g_t, delta_t> + D ||sum g_t||; the bound is 2 D sqrt(sum ||g_t||^2).
    """
    deltas = np.asarray(deltas, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if deltas.shape != grads.shape:
        raise ValueError(f"shape mismatch: {deltas.shape} vs {grads.shape}")
    total = grads.sum(axis=0)
    regret = float(np.einsum("ij,ij->", grads, deltas) + D * np.linalg.norm(total))
    bound = float(2.0 * D * np.sqrt(np.einsum("ij,ij->", grads, grads)))
    return RegretAudit(regret, bound)
