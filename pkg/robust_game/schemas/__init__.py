"""Pydantic schemas for scenario files and experiment records."""
from robust_game.schemas.record import (
    ComparisonRecord,
    EllipsoidRecord,
    EpsilonCertificate,
    ExcitationRecord,
    ExperimentRecord,
    IterationRecord,
    PolytopeRecord,
    TerminalRecord,
    TrajectoryRecord,
    VerificationRecord,
)
from robust_game.schemas.scenario import (
    DeviationConfig,
    DeviationType,
    DisturbanceConfig,
    ObeWeight,
    Omega0Config,
    Omega0Mode,
    ScenarioConfig,
    VertexOverflow,
    load_scenario,
)

__all__ = [
    "ComparisonRecord",
    "DeviationConfig",
    "DeviationType",
    "DisturbanceConfig",
    "EllipsoidRecord",
    "EpsilonCertificate",
    "ExcitationRecord",
    "ExperimentRecord",
    "IterationRecord",
    "ObeWeight",
    "Omega0Config",
    "Omega0Mode",
    "PolytopeRecord",
    "ScenarioConfig",
    "TerminalRecord",
    "TrajectoryRecord",
    "VerificationRecord",
    "VertexOverflow",
    "load_scenario",
]
