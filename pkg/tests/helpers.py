"""Small hand-checkable networks shared by the test modules."""
import numpy as np

from delmu.model import DemandInstance, Link, Topology
from delmu.utility import DEFAULT_PARAMS, UtilitySpec

LINEAR, SIGMOID, POLY, LOG = DEFAULT_PARAMS


def single_link(capacity: float, slices: int = 2) -> Topology:
    """Two nodes, one link, one path: every slice's only flow shares the link."""
    return Topology("single", 2, (Link(0, 1, capacity),), ((0, 1),), slices)


def chain3(c01: float = 150.0, c12: float = 120.0, slices: int = 2) -> Topology:
    return Topology("chain3", 3, (Link(0, 1, c01), Link(1, 2, c12)), ((0, 1, 2),), slices)


def fork4(cap: float = 80.0, slices: int = 2) -> Topology:
    links = (Link(0, 1, cap), Link(1, 2, cap), Link(0, 3, cap))
    return Topology("fork4", 4, links, ((0, 1, 2), (0, 3)), slices)


CHAIN3_PARAMS = (UtilitySpec("sigmoid", 0.3, 40.0), UtilitySpec("polynomial", 0.2, 0.5))
FORK4_PARAMS = (UtilitySpec("sigmoid", 0.3, 25.0), UtilitySpec("logarithmic", 0.05, 1.0))


def column(*values) -> np.ndarray:
    """``(I, 1)`` array for single-path topologies."""
    return np.array(values, dtype=float).reshape(-1, 1)


def instance(lo, hi) -> DemandInstance:
    return DemandInstance(np.asarray(lo, float), np.asarray(hi, float))


def random_micro_instance(rng, shape, dmax: float) -> DemandInstance:
    """Demands uniform integers in ``[0, dmax]``, minimum rates in ``[0, 10]``
    capped by the demand."""
    d = rng.integers(0, int(dmax) + 1, size=shape).astype(float)
    lo = np.minimum(rng.integers(0, 11, size=shape).astype(float), d)
    return DemandInstance(lo, d)


# one line per acceptance criterion, printed in the terminal summary
CRITERIA: list[str] = []


def record(number: int, title: str, passed: bool, detail: str) -> str:
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    CRITERIA.append(line)
    print(line)
    return line
