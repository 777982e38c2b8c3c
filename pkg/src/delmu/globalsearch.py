"""Multistart local ascent: the global-search benchmark and labelling oracle."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from ._problem import FlowProblem
from .baseline import _require_min_feasible, greedy_fill
from .model import DemandInstance, Topology
from .repair import shed

log = logging.getLogger(__name__)

FIXED_WIDTH = 1e-9
INWARD = 1e-6


@dataclass(frozen=True)
class GsOptions:
    n_starts: int = 100
    max_ascent_iters: int = 500
    barrier_weights: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    tol: float = 1e-6
    seed: int = 0
    armijo: float = 1e-4
    shrink: float = 0.5

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        w = np.asarray(self.barrier_weights, dtype=float)
        if w.size == 0 or np.any(w <= 0) or np.any(np.diff(w) >= 0):
            raise ValueError("barrier weights must be positive and strictly decreasing")


class _Barrier:
    """Strictly-feasible interior of one problem plus kernel arguments."""

    def __init__(self, prob: FlowProblem):
        self.prob = prob
        self.free = (prob.hi - prob.lo) > FIXED_WIDTH
        Gf = prob.G[:, self.free]
        self.rows = np.any(Gf > 0, axis=1) if Gf.size else np.zeros(prob.G.shape[0], bool)
        self.base = prob.usage(prob.lo)
        self.anchor = self._anchor()

    def _anchor(self) -> np.ndarray:
        """A point strictly inside box and node budgets (on the segment from
        the minimum rates towards the demands)."""
        prob = self.prob
        width = np.where(self.free, prob.hi - prob.lo, 0.0)
        t = 0.5
        extra = prob.G @ width
        room = 1.0 - self.base
        with np.errstate(divide="ignore", invalid="ignore"):
            lim = np.where(extra > 0, room / extra, np.inf)
        if lim.size:
            t = min(t, 0.5 * float(lim.min()))
        return prob.lo + t * width

    @property
    def interior_exists(self) -> bool:
        return bool(np.all(self.base[self.rows] < 1.0)) if self.rows.any() else True

    def inward(self, r: np.ndarray, amount: float = INWARD) -> np.ndarray:
        r = np.where(self.free, r, self.prob.lo)
        return (1.0 - amount) * r + amount * self.anchor

    def args(self):
        p = self.prob
        return p.lo, p.hi, self.free, p.G, self.rows, p.kind, p.alpha, p.beta

    def value(self, r, mu):
        return K.barrier_value(np.asarray(r, float), *self.args(), float(mu))

    def grad(self, r, mu):
        return K.barrier_grad(np.asarray(r, float), *self.args(), float(mu))

    def utility_scale(self, r) -> float:
        """Typical utility change available to one flow: mean |U'| x range."""
        p = self.prob
        if not self.free.any():
            return 1.0
        d1 = np.array([K.utility_d1(k, a, b, x) for k, a, b, x in zip(p.kind, p.alpha, p.beta, r)])
        s = float(np.mean(np.abs(d1[self.free]) * (p.hi - p.lo)[self.free]))
        return s if np.isfinite(s) and s > 0 else 1.0


def barrier_objective(topology: Topology, instance: DemandInstance, params, allocation, mu: float):
    """Utility plus ``mu`` times the log of every constraint slack, with its
    gradient, both in Mbps coordinates."""
    bar = _Barrier(FlowProblem.build(topology, instance, params))
    r = np.asarray(allocation, dtype=float).ravel()
    return bar.value(r, mu), bar.prob.unflatten(bar.grad(r, mu))


def _ascend(bar: _Barrier, start: np.ndarray, options: GsOptions) -> np.ndarray:
    """Local ascent from a strictly interior flattened start."""
    prob = bar.prob
    mus = bar.utility_scale(start) * np.asarray(options.barrier_weights, dtype=float)
    r, _ = K.barrier_ascent(
        start, *bar.args(), mus, options.tol, options.max_ascent_iters,
        options.armijo, options.shrink,
    )
    if not np.all(np.isfinite(r)):
        raise FloatingPointError("local ascent produced a non-finite point")
    u_new = K.total_utility_k(r, *prob.utility_args)
    u_old = K.total_utility_k(start, *prob.utility_args)
    if not np.isfinite(u_new):
        raise FloatingPointError("utility is not finite at the ascent result")
    return r if u_new >= u_old else start


def local_ascent(topology: Topology, instance: DemandInstance, params, start,
                 options: GsOptions = GsOptions()) -> np.ndarray:
    """Barrier-continuation ascent from ``start``.

    Boundary starts are pulled inward by a relative 1e-6 first. The result is
    strictly feasible and never worse than the (pulled-in) start.
    """
    prob = FlowProblem.build(topology, instance, params)
    _require_min_feasible(prob)
    bar = _Barrier(prob)
    r0 = np.clip(np.asarray(start, dtype=float).ravel(), prob.lo, prob.hi)
    if not bar.interior_exists:
        return prob.unflatten(shed(prob, r0))
    r0 = bar.inward(r0)
    if not np.isfinite(bar.value(r0, 1.0)):
        raise ValueError("start is not inside the node time budgets")
    return prob.unflatten(_ascend(bar, r0, options))


def _start_points(prob: FlowProblem, options: GsOptions) -> np.ndarray:
    rng = np.random.default_rng(options.seed)
    u = rng.random((options.n_starts, prob.lo.size))
    return prob.lo + u * (prob.hi - prob.lo)


def multistart_solve(topology: Topology, instance: DemandInstance, params=None,
                     options: GsOptions = GsOptions(), return_stats: bool = False):
    """Best local maximum over random box starts plus the greedy solution.

    Random starts are pushed into the feasible region by the load-shedding
    pass before ascent. The greedy allocation itself is also a candidate, so
    the result never scores below greedy.
    """
    prob = FlowProblem.build(topology, instance, params)
    _require_min_feasible(prob)
    bar = _Barrier(prob)
    greedy, _ = greedy_fill(prob, prob.lo, 1.0)
    best = greedy
    best_u = K.total_utility_k(greedy, *prob.utility_args)
    n_improved = 0
    if bar.interior_exists and bar.free.any():
        starts = [greedy] + [shed(prob, s) for s in _start_points(prob, options)]
        for k, s in enumerate(starts):
            try:
                r = _ascend(bar, bar.inward(s), options)
            except FloatingPointError as exc:
                log.warning("start %d abandoned: %s", k, exc)
                continue
            u = K.total_utility_k(r, *prob.utility_args)
            # strict comparison keeps the lowest start index on ties
            if u > best_u:
                best, best_u = r, u
                n_improved += 1
    out = prob.unflatten(best)
    if return_stats:
        return out, {"utility": float(best_u), "improvements": n_improved}
    return out
