"""Sliced backhaul model: topology, demand instances and the node time budget.

A flow ``(i, j)`` is the slice-``i`` traffic on gateway path ``j``. Every
node on a path transmits on the path's outbound edge and receives on its
inbound edge; the time a node spends in each direction is the sum of
``rate / capacity`` over the flows crossing it, and must not exceed 1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionError, TopologyError

TX = "tx"
RX = "rx"
FEAS_TOL = 1e-9
GATEWAY = 0


@dataclass(frozen=True)
class Link:
    src: int
    dst: int
    capacity: float


@dataclass(frozen=True)
class Topology:
    name: str
    node_count: int
    links: tuple[Link, ...]
    paths: tuple[tuple[int, ...], ...]
    slice_count: int

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "paths", tuple(tuple(int(n) for n in p) for p in self.paths))
        self._validate()

    def _validate(self):
        if self.node_count < 1:
            raise TopologyError("node_count must be positive")
        if self.slice_count < 1:
            raise TopologyError("slice_count must be positive")
        if not self.paths:
            raise TopologyError("topology needs at least one path")
        seen = set()
        for ln in self.links:
            for n in (ln.src, ln.dst):
                if not 0 <= n < self.node_count:
                    raise TopologyError(f"link ({ln.src},{ln.dst}) uses unknown node {n}")
            if ln.src == ln.dst:
                raise TopologyError(f"self-loop on node {ln.src}")
            if not ln.capacity > 0 or not np.isfinite(ln.capacity):
                raise TopologyError(f"link ({ln.src},{ln.dst}) has non-positive capacity")
            if (ln.src, ln.dst) in seen:
                raise TopologyError(f"duplicate link ({ln.src},{ln.dst})")
            seen.add((ln.src, ln.dst))
        for j, path in enumerate(self.paths):
            if len(path) < 2:
                raise TopologyError(f"path {j} has fewer than two nodes")
            if len(set(path)) != len(path):
                raise TopologyError(f"path {j} repeats a node")
            if GATEWAY not in (path[0], path[-1]):
                raise TopologyError(f"path {j} does not touch the gateway")
            for m, n in zip(path, path[1:]):
                if (m, n) not in seen:
                    raise TopologyError(f"path {j} uses missing link ({m},{n})")

    @property
    def path_count(self) -> int:
        return len(self.paths)

    @property
    def flow_count(self) -> int:
        return self.slice_count * self.path_count

    @property
    def shape(self) -> tuple[int, int]:
        return (self.slice_count, self.path_count)

    @cached_property
    def _capacity(self) -> dict:
        return {(ln.src, ln.dst): float(ln.capacity) for ln in self.links}

    def link(self, src: int, dst: int) -> Link:
        for ln in self.links:
            if ln.src == src and ln.dst == dst:
                return ln
        raise KeyError((src, dst))

    def capacity(self, src: int, dst: int) -> float:
        return self._capacity[(src, dst)]

    def with_capacity(self, src: int, dst: int, capacity: float) -> "Topology":
        self.link(src, dst)
        links = tuple(
            Link(ln.src, ln.dst, float(capacity)) if (ln.src, ln.dst) == (src, dst) else ln
            for ln in self.links
        )
        return Topology(self.name, self.node_count, links, self.paths, self.slice_count)

    def roles(self, j: int) -> dict:
        """``{(node, direction): (m, n)}`` for path ``j``: the edge each node
        transmits or receives on."""
        path = self.paths[j]
        out = {}
        for m, n in zip(path, path[1:]):
            out[(m, TX)] = (m, n)
            out[(n, RX)] = (m, n)
        return out

    @cached_property
    def rows(self) -> tuple[tuple[int, str], ...]:
        """Node/direction pairs touched by at least one path, sorted."""
        keys = set()
        for j in range(self.path_count):
            keys.update(self.roles(j))
        return tuple(sorted(keys, key=lambda k: (k[0], k[1] == RX)))

    @cached_property
    def path_matrix(self) -> np.ndarray:
        """``A[row, j] = 1 / c`` of the edge path ``j`` uses at that row."""
        index = {key: k for k, key in enumerate(self.rows)}
        A = np.zeros((len(self.rows), self.path_count))
        for j in range(self.path_count):
            for key, edge in self.roles(j).items():
                A[index[key], j] = 1.0 / self._capacity[edge]
        A.setflags(write=False)
        return A

    @cached_property
    def flow_matrix(self) -> np.ndarray:
        """Path matrix repeated per slice, acting on flattened ``r[i, j]``."""
        G = np.tile(self.path_matrix, (1, self.slice_count))
        G = np.ascontiguousarray(G)
        G.setflags(write=False)
        return G

    def tau(self, j: int, node: int, direction: str) -> int:
        return int((node, direction) in self.roles(j))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "nodes": self.node_count,
            "links": [
                {"src": ln.src, "dst": ln.dst, "capacity_mbps": _num(ln.capacity)}
                for ln in self.links
            ],
            "paths": [list(p) for p in self.paths],
            "slices": self.slice_count,
        }


def _num(x: float):
    x = float(x)
    return int(x) if x.is_integer() else x


def dump_topology(topology: Topology) -> str:
    return json.dumps(topology.to_dict(), indent=2)


def load_topology(text: str) -> Topology:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TopologyError(f"topology is not valid JSON: {exc}") from exc
    try:
        links = tuple(
            Link(int(ln["src"]), int(ln["dst"]), float(ln["capacity_mbps"]))
            for ln in doc["links"]
        )
        return Topology(
            name=str(doc.get("name", "")),
            node_count=int(doc["nodes"]),
            links=links,
            paths=tuple(tuple(p) for p in doc["paths"]),
            slice_count=int(doc["slices"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, TopologyError):
            raise
        raise TopologyError(f"malformed topology document: {exc!r}") from exc


# Four reconstructed evaluation topologies: 4, 6, 8 and 10 base stations,
# three gateway paths each, capacities from {693, 1386, 2772, 6800} Mbps.
_BUILTIN = {
    1: dict(
        nodes=4,
        links=[(0, 1, 2772), (0, 2, 1386), (1, 3, 693)],
        paths=[(0, 1), (0, 2), (0, 1, 3)],
    ),
    2: dict(
        nodes=6,
        links=[(0, 1, 1386), (1, 2, 693), (0, 3, 2772), (3, 4, 1386), (3, 5, 1386)],
        paths=[(0, 1, 2), (0, 3, 4), (0, 3, 5)],
    ),
    3: dict(
        nodes=8,
        links=[
            (0, 1, 2772),
            (1, 2, 1386), (1, 3, 1386), (1, 4, 1386),
            (2, 5, 6800), (3, 6, 2772), (4, 7, 6800),
        ],
        paths=[(0, 1, 2, 5), (0, 1, 3, 6), (0, 1, 4, 7)],
    ),
    4: dict(
        nodes=10,
        links=[
            (0, 1, 1386), (1, 2, 2772), (2, 3, 6800),
            (0, 4, 2772), (4, 5, 1386), (5, 6, 693), (6, 7, 2772),
            (4, 8, 1386), (8, 9, 693),
        ],
        paths=[(0, 1, 2, 3), (0, 4, 5, 6, 7), (0, 4, 8, 9)],
    ),
}

BUILTIN_SLICES = 4


def builtin_topology(index: int) -> Topology:
    if index not in _BUILTIN:
        raise ValueError(f"builtin topology index must be 1..4, got {index!r}")
    spec = _BUILTIN[index]
    return Topology(
        name=f"topology-{index}",
        node_count=spec["nodes"],
        links=tuple(Link(s, d, float(c)) for s, d, c in spec["links"]),
        paths=tuple(spec["paths"]),
        slice_count=BUILTIN_SLICES,
    )


@dataclass(frozen=True)
class DemandInstance:
    """Per-flow minimum rate and demand ceiling, both ``(I, J)`` in Mbps."""

    min_rate: np.ndarray
    max_demand: np.ndarray

    def __post_init__(self):
        lo = np.array(self.min_rate, dtype=float)
        hi = np.array(self.max_demand, dtype=float)
        if lo.ndim != 2 or lo.shape != hi.shape:
            raise DimensionError(f"min_rate {lo.shape} and max_demand {hi.shape} must be equal 2-D shapes")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("demand bounds must be finite")
        if np.any(lo < 0) or np.any(lo > hi):
            raise ValueError("need 0 <= min_rate <= max_demand for every flow")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "min_rate", lo)
        object.__setattr__(self, "max_demand", hi)

    @property
    def shape(self) -> tuple[int, int]:
        return self.min_rate.shape

    def __eq__(self, other):
        if not isinstance(other, DemandInstance):
            return NotImplemented
        return np.array_equal(self.min_rate, other.min_rate) and np.array_equal(
            self.max_demand, other.max_demand
        )

    __hash__ = None


@dataclass
class UsageReport:
    rows: tuple[tuple[int, str], ...]
    fractions: np.ndarray
    violations: list = field(default_factory=list)
    demand_violations: list = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations and not self.demand_violations

    def fraction(self, node: int, direction: str) -> float:
        try:
            return float(self.fractions[self.rows.index((node, direction))])
        except ValueError:
            return 0.0


def _check_shape(topology: Topology, a: np.ndarray, what: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != topology.shape:
        raise DimensionError(f"{what} has shape {a.shape}, topology needs {topology.shape}")
    return a


def node_time_usage(topology: Topology, allocation, tol: float = FEAS_TOL) -> UsageReport:
    r = _check_shape(topology, allocation, "allocation")
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise ValueError("allocation must be finite and non-negative")
    frac = topology.path_matrix @ r.sum(axis=0)
    bad = [
        (node, d, float(x)) for (node, d), x in zip(topology.rows, frac) if x > 1.0 + tol
    ]
    return UsageReport(rows=topology.rows, fractions=frac, violations=bad)


def check_feasible(topology: Topology, instance: DemandInstance, allocation,
                   tol: float = FEAS_TOL) -> UsageReport:
    _check_shape(topology, instance.min_rate, "instance")
    r = _check_shape(topology, allocation, "allocation")
    report = node_time_usage(topology, np.maximum(r, 0.0), tol)
    lo, hi = instance.min_rate, instance.max_demand
    for i, j in zip(*np.nonzero((r < lo - tol) | (r > hi + tol))):
        report.demand_violations.append(
            (int(i), int(j), float(r[i, j]), float(lo[i, j]), float(hi[i, j]))
        )
    return report


def min_rate_feasible(topology: Topology, instance: DemandInstance) -> bool:
    return not node_time_usage(topology, instance.min_rate).violations
