"""Post-processing that turns an arbitrary rate vector into a feasible one.

Phase one sheds load: while some node's time budget is exceeded, the flow
through the most loaded node whose 10 Mbps cut costs the least utility is
cut. Phase two refills: 1 Mbps increments go to the flow with the largest
gain that still fits, until nothing fits.
"""
from __future__ import annotations

import numpy as np

from . import _kernels as K
from ._problem import FlowProblem
from .baseline import _require_min_feasible, greedy_fill
from .errors import DimensionError, InfeasibleMinimumError
from .model import FEAS_TOL, DemandInstance, Topology

SHED_STEP = 10.0
FILL_STEP = 1.0


def shed(prob: FlowProblem, r: np.ndarray, step: float = SHED_STEP,
         tol: float = FEAS_TOL) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    r = np.clip(np.where(np.isfinite(r), r, prob.lo), prob.lo, prob.hi)
    usage = prob.usage(r)
    # every cut removes at least min(step, r - lo) > 0 from some flow
    bound = int(np.sum(np.ceil((r - prob.lo) / step))) + 1
    n = K.shed_overload(r, prob.lo, usage, prob.G, *prob.utility_args, float(step), tol, bound)
    if n < 0:
        raise InfeasibleMinimumError("overloaded node has no flow above its minimum rate")
    # incremental usage must agree with a full recompute
    assert np.abs(usage - prob.usage(r)).max(initial=0.0) <= 1e-9
    return r


def repair_flat(prob: FlowProblem, raw: np.ndarray, refill: bool = True) -> np.ndarray:
    _require_min_feasible(prob)
    r = shed(prob, raw)
    if refill:
        r, _ = greedy_fill(prob, r, FILL_STEP)
    return r


def repair(topology: Topology, instance: DemandInstance, params, raw,
           refill: bool = True) -> np.ndarray:
    """Clamp ``raw`` into the demand box, shed overload, then refill headroom."""
    prob = FlowProblem.build(topology, instance, params)
    raw = np.asarray(raw, dtype=float)
    if raw.shape != prob.shape:
        raise DimensionError(f"raw allocation shape {raw.shape} != {prob.shape}")
    return prob.unflatten(repair_flat(prob, raw.ravel(), refill))
