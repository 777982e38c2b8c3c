"""Greedy benchmark solver and a grid brute-force oracle."""
from __future__ import annotations

import math

import numpy as np

from . import _kernels as K
from ._problem import FlowProblem
from .errors import InfeasibleMinimumError, SearchSpaceError
from .model import FEAS_TOL, DemandInstance, Topology

MAX_GRID_POINTS = 10**7


def _require_min_feasible(prob: FlowProblem, tol: float = FEAS_TOL) -> np.ndarray:
    usage = prob.usage(prob.lo)
    if usage.size and usage.max() > 1.0 + tol:
        raise InfeasibleMinimumError(
            f"minimum rates already need {usage.max():.4f} of a node's time"
        )
    return usage


def greedy_fill(prob: FlowProblem, r: np.ndarray, step: float = 1.0,
                tol: float = FEAS_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Raise ``r`` (flattened, feasible) greedily; returns ``(r, gains)``."""
    r = np.array(r, dtype=float)
    usage = prob.usage(r)
    bound = int(np.sum(np.ceil(np.maximum(prob.hi - r, 0.0) / step))) + 1
    gains = np.empty(bound)
    n = K.greedy_fill(r, prob.hi, usage, prob.G, *prob.utility_args, float(step), tol, gains)
    return r, gains[:n]


def greedy_solve(topology: Topology, instance: DemandInstance, params=None,
                 step: float = 1.0, return_gains: bool = False):
    """Start at the minimum rates and repeatedly grant ``step`` Mbps to the
    flow with the largest utility gain that still fits, until none fits."""
    if not step > 0:
        raise ValueError("step must be positive")
    prob = FlowProblem.build(topology, instance, params)
    _require_min_feasible(prob)
    r, gains = greedy_fill(prob, prob.lo, step)
    out = prob.unflatten(r)
    return (out, gains) if return_gains else out


def _grid(lo: float, hi: float, step: float) -> np.ndarray:
    n = int(math.floor((hi - lo) / step + 1e-9))
    pts = lo + step * np.arange(n + 1)
    if pts[-1] < hi - 1e-9:
        pts = np.append(pts, hi)
    return pts


def grid_size(instance: DemandInstance, grid: float) -> int:
    total = 1
    for lo, hi in zip(instance.min_rate.ravel(), instance.max_demand.ravel()):
        total *= _grid(lo, hi, grid).size
    return total


def brute_force_solve(topology: Topology, instance: DemandInstance, params=None,
                      grid: float = 10.0, max_points: int = MAX_GRID_POINTS) -> np.ndarray:
    """Exhaustive search over ``{min, min + grid, ..., demand}`` per flow.

    Returns the feasible grid point of highest total utility, the
    lexicographically smallest on ties.
    """
    if not grid > 0:
        raise ValueError("grid must be positive")
    prob = FlowProblem.build(topology, instance, params)
    _require_min_feasible(prob)
    axes = [_grid(lo, hi, grid) for lo, hi in zip(prob.lo, prob.hi)]
    size = math.prod(a.size for a in axes)
    if size > max_points:
        raise SearchSpaceError(f"grid has {size} points, limit is {max_points}")
    counts = np.array([a.size for a in axes], dtype=np.int64)
    table = np.zeros((len(axes), counts.max()))
    for f, a in enumerate(axes):
        table[f, : a.size] = a
    idx, _ = K.brute_force_k(table, counts, prob.G, *prob.utility_args, FEAS_TOL)
    if idx[0] < 0:
        raise SearchSpaceError("no feasible grid point")
    return prob.unflatten(table[np.arange(len(axes)), idx])
