"""Utility maximisation for sliced backhaul networks."""
from ._accel import backend
from .model import (
    DemandInstance,
    Link,
    Topology,
    UsageReport,
    builtin_topology,
    check_feasible,
    dump_topology,
    load_topology,
    node_time_usage,
)
from .utility import DEFAULT_PARAMS, UtilitySpec, flow_utility, total_utility, utility_delta

__version__ = "0.1.0"
