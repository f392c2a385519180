"""Domain types for the two-player game."""
from robust_game.models.game import (
    CostReport,
    CostWeights,
    DisturbanceBox,
    GameModel,
    KnownDynamics,
    NashGroundTruth,
    ValidationReport,
    evaluate_cost,
    is_detectable,
    is_stabilizable,
    validate_model,
)
from robust_game.models.trajectory import Sample, Trajectory

__all__ = [
    "CostReport",
    "CostWeights",
    "DisturbanceBox",
    "GameModel",
    "KnownDynamics",
    "NashGroundTruth",
    "Sample",
    "Trajectory",
    "ValidationReport",
    "evaluate_cost",
    "is_detectable",
    "is_stabilizable",
    "validate_model",
]
