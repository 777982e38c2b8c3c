"""Per-slice utility families and the network-wide total."""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels as K

KINDS = {
    "linear": K.LINEAR,
    "sigmoid": K.SIGMOID,
    "polynomial": K.POLYNOMIAL,
    "logarithmic": K.LOGARITHMIC,
}


@dataclass(frozen=True)
class UtilitySpec:
    kind: str
    alpha: float
    beta: float

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown utility kind {self.kind!r}")
        if self.kind == "polynomial" and not 0.0 < self.beta <= 1.0:
            raise ValueError("polynomial utility needs beta in (0, 1]")
        if self.kind == "sigmoid" and not self.alpha > 0.0:
            raise ValueError("sigmoid utility needs alpha > 0")
        if self.kind == "logarithmic" and not (self.beta > 0.0 and self.alpha >= 0.0):
            # keeps alpha * r + beta > 0 for every r >= 0
            raise ValueError("logarithmic utility needs alpha >= 0 and beta > 0")

    @property
    def code(self) -> int:
        return KINDS[self.kind]

    def __call__(self, rate):
        return flow_utility(self, rate)


# Table I values, slices ordered linear, sigmoid, polynomial, logarithmic.
DEFAULT_PARAMS = (
    UtilitySpec("linear", 0.00133, 0.0),
    UtilitySpec("sigmoid", 0.08, 350.0),
    UtilitySpec("polynomial", 0.03651, 0.5),
    UtilitySpec("logarithmic", 0.00229, 1.0),
)


def flow_utility(spec: UtilitySpec, rate):
    """Utility of one flow at ``rate`` Mbps. Accepts scalars or arrays."""
    r = np.asarray(rate, dtype=float)
    if np.any(r < 0):
        raise ValueError("rate must be non-negative")
    a, b = spec.alpha, spec.beta
    if spec.kind == "linear":
        out = a * r + b
    elif spec.kind == "sigmoid":
        z = a * (r - b)
        # split by sign so exp never overflows
        out = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))),
                       np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    elif spec.kind == "polynomial":
        out = a * r ** b
    else:
        arg = a * r + b
        if np.any(arg <= 0):
            raise ValueError("logarithmic utility argument must be positive")
        out = np.log(arg)
    return float(out) if out.ndim == 0 else out


def utility_delta(spec: UtilitySpec, rate: float, step: float) -> float:
    if rate + step < 0:
        raise ValueError("rate + step must be non-negative")
    return flow_utility(spec, rate + step) - flow_utility(spec, rate)


def _as_params(params) -> tuple[UtilitySpec, ...]:
    return tuple(DEFAULT_PARAMS if params is None else params)


def total_utility(params, allocation) -> float:
    params = _as_params(params)
    r = np.asarray(allocation, dtype=float)
    if r.ndim != 2 or r.shape[0] != len(params):
        raise ValueError(f"allocation shape {r.shape} does not match {len(params)} slices")
    return float(sum(np.sum(flow_utility(spec, r[i])) for i, spec in enumerate(params)))


def slice_utilities(params, allocation) -> np.ndarray:
    """Utility of every flow, shape ``(I, J)``."""
    params = _as_params(params)
    r = np.asarray(allocation, dtype=float)
    return np.stack([np.atleast_1d(flow_utility(s, r[i])) for i, s in enumerate(params)])


def flow_arrays(params, paths: int):
    """Kernel encoding: per-flow ``(kind, alpha, beta)`` for ``I * J`` flows.

    Arrays are shared between calls with equal arguments and are read-only.
    """
    return _flow_arrays(_as_params(params), int(paths))


@lru_cache(maxsize=64)
def _flow_arrays(params: tuple, paths: int):
    kind = np.repeat(np.array([s.code for s in params], dtype=np.int64), paths)
    alpha = np.repeat(np.array([s.alpha for s in params], dtype=float), paths)
    beta = np.repeat(np.array([s.beta for s in params], dtype=float), paths)
    for a in (kind, alpha, beta):
        a.flags.writeable = False
    return kind, alpha, beta


def load_params(text: str) -> tuple[UtilitySpec, ...]:
    doc = json.loads(text)
    return tuple(UtilitySpec(str(d["kind"]), float(d["alpha"]), float(d["beta"])) for d in doc)


def dump_params(params) -> str:
    return json.dumps(
        [{"kind": s.kind, "alpha": s.alpha, "beta": s.beta} for s in _as_params(params)],
        indent=2,
    )
