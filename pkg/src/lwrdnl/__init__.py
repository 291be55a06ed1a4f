"""Dynamic network loading on LWR link dynamics with merge/diverge junctions."""

from .fundamental_diagram import DomainError, FundamentalDiagram, check_share_regularity
from .junctions import (diverge_boundary_densities, merge_boundary_densities,
                        series_boundary_densities, solve_diverge, solve_merge)
from .network import (Destination, Junction, Link, Network, NetworkError, Origin, Path,
                      attach_destination, attach_origin, enumerate_paths, network_constants,
                      supply_lower_bound, validate)
from .simulator import (ConfigurationError, NumericalFault, PathFlowProfile, SimulationConfig,
                        Simulator, origin_update, run)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "Destination",
    "DomainError",
    "FundamentalDiagram",
    "Junction",
    "Link",
    "Network",
    "NetworkError",
    "NumericalFault",
    "Origin",
    "Path",
    "PathFlowProfile",
    "SimulationConfig",
    "Simulator",
    "attach_destination",
    "attach_origin",
    "check_share_regularity",
    "diverge_boundary_densities",
    "enumerate_paths",
    "merge_boundary_densities",
    "network_constants",
    "origin_update",
    "run",
    "series_boundary_densities",
    "solve_diverge",
    "solve_merge",
    "supply_lower_bound",
    "validate",
    "__version__",
]
