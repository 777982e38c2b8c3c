class DelmuError(Exception):
    """Base class for errors raised by this package."""


class TopologyError(DelmuError, ValueError):
    """Malformed or inconsistent topology description."""


class DimensionError(DelmuError, ValueError):
    """Array shapes do not match the topology or model."""


class InfeasibleMinimumError(DelmuError):
    """The all-minimum-rate allocation already violates a node time budget."""


class DegenerateChannelError(DelmuError, ValueError):
    """Every channel gain is zero, so no power can be placed."""


class SearchSpaceError(DelmuError):
    """Brute-force grid too large, or no grid point is feasible."""
