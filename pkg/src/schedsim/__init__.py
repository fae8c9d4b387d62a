"""Deadline-constrained packet scheduling over unreliable multi-hop sensor trees.

Core pieces: :mod:`~schedsim.model` (network and flow description),
:mod:`~schedsim.engine` (slotted interval simulation with debt accounting),
:mod:`~schedsim.policies` (the four slot schedulers),
:mod:`~schedsim.oracle` (exact finite-horizon optimum and policy values),
:mod:`~schedsim.experiments` (region sweeps and built-in scenarios).
"""

from .engine import DELIVERED, UNBORN, DebtLedger, DebtViews, IntervalState, RunMetrics, run
from .model import (
    FlowSpec,
    RadioMode,
    SystemConfig,
    Topology,
    is_path_topology,
    validate_topology,
)
from .policies import Policy, PolicyKind, make_policy

__version__ = "0.1.0"

__all__ = [
    "DELIVERED",
    "UNBORN",
    "DebtLedger",
    "DebtViews",
    "FlowSpec",
    "IntervalState",
    "Policy",
    "PolicyKind",
    "RadioMode",
    "RunMetrics",
    "SystemConfig",
    "Topology",
    "__version__",
    "is_path_topology",
    "make_policy",
    "run",
    "validate_topology",
]
