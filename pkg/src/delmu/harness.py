"""End-to-end evaluation of the three solvers and the dynamic-event replayer."""
from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .baseline import greedy_solve
from .errors import DimensionError
from .model import DemandInstance, Topology, check_feasible
from .nn import InferencePlan, Surrogate, infer
from .repair import repair
from .utility import DEFAULT_PARAMS, slice_utilities, total_utility

SOLVERS = ("gs", "greedy", "delmu")
WARMUP = 3
DEFAULT_MIN_RATE = 10.0


def delmu_solve(model: Surrogate, topology: Topology, instance: DemandInstance,
                topology_index: int, params=None, plan: InferencePlan | None = None) -> np.ndarray:
    """Network inference followed by the feasibility repair."""
    return repair(topology, instance, params, infer(model, instance, topology_index, plan))


@dataclass
class EvalReport:
    topology_index: int
    rows: list
    utilities: dict
    seconds: dict
    feasible: dict
    flow_utilities: dict = field(default_factory=dict)

    def summary(self, solver: str) -> dict:
        u = np.asarray(self.utilities[solver])
        q = np.quantile(u, [0.0, 0.25, 0.5, 0.75, 1.0])
        return {
            "n": int(u.size), "min": q[0], "q1": q[1], "median": q[2], "q3": q[3], "max": q[4],
            "mean": float(u.mean()),
            "feasible_rate": float(np.mean(self.feasible[solver])),
            "mean_seconds": float(np.mean(self.seconds[solver])),
        }

    def median(self, solver: str) -> float:
        return float(np.median(self.utilities[solver]))

    def slice_sums(self, solver: str) -> np.ndarray:
        """``(rows, I)`` utility summed over paths, per slice."""
        return np.stack([fu.sum(axis=1) for fu in self.flow_utilities[solver]])

    def write(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "utility_dist.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["topo", "solver", "n", "min", "q1", "median", "q3", "max", "mean", "feasible_rate"])
            for s in SOLVERS:
                m = self.summary(s)
                w.writerow([self.topology_index, s, m["n"]] + [repr(float(m[k])) for k in
                           ("min", "q1", "median", "q3", "max", "mean", "feasible_rate")])
        with open(os.path.join(out_dir, "utilities.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["topo", "row", "solver", "utility"])
            for s in SOLVERS:
                for row, u in zip(self.rows, self.utilities[s]):
                    w.writerow([self.topology_index, row, s, repr(float(u))])
        with open(os.path.join(out_dir, "runtimes.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["topo", "solver", "n", "mean_seconds"])
            for s in SOLVERS:
                w.writerow([self.topology_index, s, len(self.seconds[s]),
                            repr(float(np.mean(self.seconds[s])))])
        with open(os.path.join(out_dir, "per_slice.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["topo", "row", "solver", "slice", "path", "utility"])
            for s in SOLVERS:
                for row, fu in zip(self.rows, self.flow_utilities[s]):
                    for i, j in np.ndindex(fu.shape):
                        w.writerow([self.topology_index, row, s, i, j, repr(float(fu[i, j]))])


def evaluate(topology: Topology, test_rows, model: Surrogate, params=None,
             topology_index: int | None = None, warmup: int = WARMUP) -> EvalReport:
    """Greedy and surrogate on every labelled row; GS figures come from the
    stored labels and their recorded solve times."""
    params = DEFAULT_PARAMS if params is None else tuple(params)
    rows = list(getattr(test_rows, "rows", test_rows))
    if topology_index is None:
        topology_index = getattr(test_rows, "topology_index", 1)
    if not rows:
        raise ValueError("no test rows")
    if model.output_size != topology.flow_count:
        raise DimensionError(f"model outputs {model.output_size} rates, topology has {topology.flow_count} flows")

    def run_greedy(inst):
        return greedy_solve(topology, inst, params)

    plan = InferencePlan(model)

    def run_delmu(inst):
        return delmu_solve(model, topology, inst, topology_index, params, plan)

    runners = {"greedy": run_greedy, "delmu": run_delmu}
    for fn in runners.values():
        for r in rows[:warmup]:
            fn(r.instance)

    utilities = {s: [] for s in SOLVERS}
    seconds = {s: [] for s in SOLVERS}
    feasible = {s: [] for s in SOLVERS}
    flows = {s: [] for s in SOLVERS}
    for r in rows:
        allocs = {"gs": r.label}
        seconds["gs"].append(r.gs_seconds)
        for s, fn in runners.items():
            t0 = time.perf_counter()
            allocs[s] = fn(r.instance)
            seconds[s].append(time.perf_counter() - t0)
        for s in SOLVERS:
            a = allocs[s]
            utilities[s].append(total_utility(params, a))
            feasible[s].append(check_feasible(topology, r.instance, a).feasible)
            flows[s].append(slice_utilities(params, a))
    return EvalReport(
        topology_index=topology_index,
        rows=[r.row for r in rows],
        utilities={s: np.array(v) for s, v in utilities.items()},
        seconds={s: np.array(v) for s, v in seconds.items()},
        feasible={s: np.array(v, dtype=bool) for s, v in feasible.items()},
        flow_utilities=flows,
    )


# ---------------------------------------------------------------- replay

EVENT_KINDS = ("flow_join", "flow_leave", "capacity_change")


@dataclass(frozen=True)
class Event:
    t_ms: float
    kind: str
    slice: int | None = None
    path: int | None = None
    demand: float | None = None
    min_rate: float | None = None
    link: tuple | None = None
    capacity: float | None = None

    def to_dict(self) -> dict:
        d = {"t_ms": self.t_ms, "kind": self.kind}
        if self.kind == "capacity_change":
            d.update(link=list(self.link), capacity=self.capacity)
        else:
            d.update(slice=self.slice, path=self.path)
            if self.kind == "flow_join":
                d.update(demand=self.demand, min_rate=self.min_rate)
        return d


@dataclass(frozen=True)
class EventScript:
    events: tuple = ()

    def __post_init__(self):
        times = [e.t_ms for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("event timestamps must be non-decreasing")
        for e in self.events:
            if e.kind not in EVENT_KINDS:
                raise ValueError(f"unknown event kind {e.kind!r}")

    def validate(self, topology: Topology) -> None:
        I, J = topology.shape
        for e in self.events:
            if e.kind == "capacity_change":
                try:
                    topology.link(*e.link)
                except (KeyError, TypeError):
                    raise ValueError(f"event at {e.t_ms} ms names unknown link {e.link}") from None
                if not e.capacity > 0:
                    raise ValueError("capacity must be positive")
            else:
                if not (0 <= e.slice < I and 0 <= e.path < J):
                    raise ValueError(f"event at {e.t_ms} ms names unknown flow ({e.slice}, {e.path})")
                if e.kind == "flow_join" and not 0 <= (e.min_rate or 0.0) <= e.demand:
                    raise ValueError("joining flow needs 0 <= min_rate <= demand")


def load_script(text: str) -> EventScript:
    events = []
    for d in json.loads(text):
        kind = d["kind"]
        if kind == "capacity_change":
            events.append(Event(float(d["t_ms"]), kind, link=tuple(int(x) for x in d["link"]),
                                capacity=float(d["capacity"])))
        elif kind == "flow_join":
            events.append(Event(float(d["t_ms"]), kind, int(d["slice"]), int(d["path"]),
                                float(d["demand"]), float(d.get("min_rate", DEFAULT_MIN_RATE))))
        else:
            events.append(Event(float(d["t_ms"]), kind, int(d["slice"]), int(d["path"])))
    return EventScript(tuple(events))


def dump_script(script: EventScript) -> str:
    return json.dumps([e.to_dict() for e in script.events], indent=2)


def blockage_script() -> EventScript:
    """Shipped scenario: linear/polynomial/logarithmic flows at 200 Mbps on
    every path, a 400 Mbps sigmoid flow on path 1 joining at 100 ms, link
    (0, 1) dropping from 2772 to 693 Mbps at 200 ms, the sigmoid flow leaving
    at 300 ms."""
    text = resources.files("delmu.scenarios").joinpath("blockage.json").read_text()
    return load_script(text)


@dataclass
class ReplayStep:
    t_ms: float
    topology: Topology
    instance: DemandInstance
    allocation: np.ndarray
    latency_s: float


def replay(topology: Topology, script: EventScript, model: Surrogate, params=None,
           topology_index: int = 3, initial: DemandInstance | None = None,
           tick_ms: float | None = None, until_ms: float | None = None) -> list[ReplayStep]:
    """Apply events in time order, re-solving with the surrogate after each
    timestamp (and at every ``tick_ms`` if given). Inactive flows have zero
    minimum rate and demand."""
    script.validate(topology)
    if initial is None:
        lo = np.zeros(topology.shape)
        hi = np.zeros(topology.shape)
    else:
        lo = np.array(initial.min_rate, dtype=float)
        hi = np.array(initial.max_demand, dtype=float)
    times = sorted({0.0} | {float(e.t_ms) for e in script.events})
    if tick_ms:
        end = until_ms if until_ms is not None else max(times)
        times = sorted(set(times) | set(np.arange(0.0, end + 1e-9, tick_ms).tolist()))
    events = list(script.events)
    plan = InferencePlan(model)
    out = []
    topo = topology
    for t in times:
        while events and events[0].t_ms <= t:
            e = events.pop(0)
            if e.kind == "flow_join":
                lo[e.slice, e.path] = DEFAULT_MIN_RATE if e.min_rate is None else e.min_rate
                hi[e.slice, e.path] = e.demand
            elif e.kind == "flow_leave":
                lo[e.slice, e.path] = hi[e.slice, e.path] = 0.0
            else:
                topo = topo.with_capacity(e.link[0], e.link[1], e.capacity)
        inst = DemandInstance(lo.copy(), hi.copy())
        t0 = time.perf_counter()
        alloc = delmu_solve(model, topo, inst, topology_index, params, plan)
        out.append(ReplayStep(t, topo, inst, alloc, time.perf_counter() - t0))
    return out


def write_replay(steps, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        n = steps[0].allocation.size if steps else 0
        w.writerow(["t_ms", "latency_s"] + [f"r_{k}" for k in range(n)])
        for s in steps:
            w.writerow([repr(s.t_ms), repr(s.latency_s)] + [repr(float(x)) for x in s.allocation.ravel()])
