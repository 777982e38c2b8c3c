from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .model import DemandInstance, Topology
from .utility import DEFAULT_PARAMS, flow_arrays


@dataclass(frozen=True)
class FlowProblem:
    """Flattened view of one NUM instance, in the layout the kernels expect."""

    shape: tuple[int, int]
    lo: np.ndarray
    hi: np.ndarray
    G: np.ndarray
    kind: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    @classmethod
    def build(cls, topology: Topology, instance: DemandInstance, params=None) -> "FlowProblem":
        params = DEFAULT_PARAMS if params is None else tuple(params)
        if instance.shape != topology.shape:
            raise DimensionError(f"instance shape {instance.shape} != topology shape {topology.shape}")
        if len(params) != topology.slice_count:
            raise DimensionError(f"{len(params)} utility specs for {topology.slice_count} slices")
        kind, alpha, beta = flow_arrays(params, topology.path_count)
        return cls(
            shape=topology.shape,
            lo=np.ascontiguousarray(instance.min_rate.ravel(), dtype=float),
            hi=np.ascontiguousarray(instance.max_demand.ravel(), dtype=float),
            G=np.ascontiguousarray(topology.flow_matrix, dtype=float),
            kind=kind,
            alpha=alpha,
            beta=beta,
        )

    @property
    def utility_args(self):
        return self.kind, self.alpha, self.beta

    def usage(self, r: np.ndarray) -> np.ndarray:
        return self.G @ r

    def unflatten(self, r: np.ndarray) -> np.ndarray:
        return np.asarray(r, dtype=float).reshape(self.shape)
