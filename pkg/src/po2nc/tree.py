"""Tree mechanism for noisy prefix sums of adaptively generated vectors."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np


class Interval(NamedTuple):
    lo: int
    hi: int


@lru_cache(maxsize=8192)
def _node(t: int) -> tuple[Interval, ...]:
    depth = (t - 1).bit_length()  # ceil(log2 t) for t >= 1
    k = 0
    out = []
    for i in range(depth + 1):
        if k >= t:
            break
        k_next = k + 2 ** (depth - i)
        if k_next <= t:
            out.append(Interval(k + 1, k_next))
            k = k_next
    return tuple(out)


def node(t: int) -> list[Interval]:
    """Dyadic intervals whose union is [1, t], largest first.

    >>> node(7)
    [Interval(lo=1, hi=4), Interval(lo=5, hi=6), Interval(lo=7, hi=7)]
    """
    if int(t) != t or t < 1:
        raise ValueError(f"t must be a positive integer, got {t}")
    return list(_node(int(t)))


@dataclass
class TreeState:
    """Per-epoch noise store for the tree mechanism.

    ``sigma`` is either a scalar or a length-``horizon`` array of per-index
    scales.  Noise for endpoint i is drawn on first use and kept until
    ``reset``.
    """

    horizon: int
    sigma: float | np.ndarray
    dim: int
    noise_store: dict = field(default_factory=dict)
    last_t: int = 0

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        sig = np.broadcast_to(np.asarray(self.sigma, dtype=float), (self.horizon,))
        if np.any(sig < 0):
            raise ValueError("noise scales must be non-negative")
        self._sigmas = sig

    def sigma_at(self, t: int) -> float:
        return float(self._sigmas[t - 1])

    def reset(self) -> None:
        self.noise_store.clear()
        self.last_t = 0

    def noise(self, t: int, rng: np.random.Generator) -> np.ndarray:
        """Sum of the stored noise vectors over the right endpoints of node(t)."""
        if int(t) != t or not 1 <= t <= self.horizon:
            raise ValueError(f"t={t} outside [1, {self.horizon}]")
        if t < self.last_t:
            raise ValueError(f"tree queried out of order: t={t} after t={self.last_t}")
        self.last_t = t
        total = np.zeros(self.dim)
        for _, hi in _node(int(t)):
            xi = self.noise_store.get(hi)
            if xi is None:
                sig = self._sigmas[hi - 1]
                xi = sig * rng.standard_normal(self.dim) if sig > 0 else np.zeros(self.dim)
                self.noise_store[hi] = xi
            total += xi
        return total


def tree_reset(state: TreeState) -> None:
    state.reset()


def tree_noise(state: TreeState, t: int, rng: np.random.Generator) -> np.ndarray:
    return state.noise(t, rng)


def private_prefix_sum(increments, state: TreeState, rng):
    """Release ``sum(increments[:i]) + tree_noise(i)`` for i = 1, 2, ...

    ``increments`` may be any iterable of vectors.  If it is a generator, each
    released sum is sent back into it before the next increment is drawn, so
    increments can depend on earlier releases.
    """
    state.reset()
    it = iter(increments)
    send = getattr(it, "send", None)
    running = None
    released = None
    t = 0
    while True:
        try:
            if send is not None and released is not None:
                inc = send(released)
            else:
                inc = next(it)
        except StopIteration:
            return
        t += 1
        inc = np.asarray(inc, dtype=float)
        running = inc.copy() if running is None else running + inc
        released = running + state.noise(t, rng)
        yield released
