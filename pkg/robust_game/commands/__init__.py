"""CLI verb handlers."""
from robust_game.commands import equilibrium, experiments

__all__ = ["equilibrium", "experiments"]
