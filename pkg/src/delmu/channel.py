"""MIMO link capacity from channel eigen-gains and water-filling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChannelError


@dataclass(frozen=True)
class ChannelGains:
    gains: np.ndarray  # eigenvalues of H H^H, non-increasing

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=float).ravel()
        if g.size == 0 or np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ValueError("gains must be a non-empty vector of finite non-negative values")
        g = np.sort(g)[::-1].copy()
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)

    @property
    def antennas(self) -> int:
        return self.gains.size


@dataclass(frozen=True)
class PowerAllocation:
    power: np.ndarray
    water_level: float


def sample_channel(seed, K: int) -> ChannelGains:
    """Gains of a K x K channel with i.i.d. unit-variance complex Gaussian taps."""
    if K < 1:
        raise ValueError("K must be at least 1")
    rng = np.random.default_rng(seed)
    H = (rng.standard_normal((K, K)) + 1j * rng.standard_normal((K, K))) / np.sqrt(2.0)
    lam = np.linalg.eigvalsh(H @ H.conj().T)
    return ChannelGains(np.clip(lam, 0.0, None))


def _gain_array(gains) -> np.ndarray:
    if isinstance(gains, ChannelGains):
        return gains.gains
    return np.atleast_1d(np.asarray(gains, dtype=float))


def water_fill(gains, noise: float, pmax: float) -> PowerAllocation:
    """Optimal power split ``p_k = max(0, mu - noise / lambda_k)`` with sum ``pmax``.

    The water level is found by dropping the weakest channel while its floor
    sits above the level implied by the remaining active set. Power is
    returned in the caller's channel order.
    """
    if not noise > 0 or not pmax > 0:
        raise ValueError("noise and pmax must be positive")
    lam = _gain_array(gains)
    if np.any(lam < 0):
        raise ValueError("gains must be non-negative")
    if not np.any(lam > 0):
        raise DegenerateChannelError("all channel gains are zero")
    order = np.argsort(-lam, kind="stable")
    pos = lam[order] > 0
    floors = np.full(lam.size, np.inf)
    with np.errstate(over="ignore"):
        # a subnormal gain gives an infinite floor, i.e. an unusable channel
        floors[pos] = noise / lam[order][pos]
    n = int(pos.sum())
    while n > 1:
        mu = (pmax + floors[:n].sum()) / n
        if floors[n - 1] < mu:
            break
        n -= 1
    mu = (pmax + floors[:n].sum()) / n
    p_sorted = np.zeros(lam.size)
    p_sorted[:n] = np.maximum(mu - floors[:n], 0.0)
    p = np.empty_like(p_sorted)
    p[order] = p_sorted
    return PowerAllocation(power=p, water_level=float(mu))


def link_capacity(gains, noise: float, pmax: float, bandwidth: float = 1.0) -> float:
    """Shannon capacity ``B * sum log2(1 + lambda p / noise)`` in bits/s."""
    lam = _gain_array(gains)
    p = water_fill(lam, noise, pmax).power
    return float(bandwidth * np.sum(np.log2(1.0 + lam * p / noise)))
