"""Shared fixtures: the contact-robot scenario and small helper systems."""
from pathlib import Path

import numpy as np
import pytest

from robust_game.models import CostWeights, DisturbanceBox, GameModel, NashGroundTruth
from robust_game.schemas import load_scenario
from robust_game.utils.deviation_factory import CosineDecaySignal, ZeroSignal

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def contact_config():
    """Contact-robot scenario as shipped."""
    return load_scenario(SCENARIOS / "contact_robot.json")


@pytest.fixture
def three_state_config():
    return load_scenario(SCENARIOS / "three_state.json")


@pytest.fixture
def contact_model(contact_config):
    c = contact_config
    return GameModel(A=c.A, B1=c.B1, B2=c.B2, param_mask=c.param_mask)


@pytest.fixture
def contact_weights(contact_config):
    c = contact_config
    return CostWeights(Q=c.Q1, R=c.R1, owner=1), CostWeights(Q=c.Q2, R=c.R2, owner=2)


@pytest.fixture
def contact_truth():
    """Equilibrium gain [2.69, 1.37] with the decaying cosine deviation."""
    return NashGroundTruth(
        K2_star=np.array([[2.69, 1.37]]),
        u_tilde=CosineDecaySignal(amplitude=2.0, omega=2 * np.pi, decay=0.2),
    )


@pytest.fixture
def quiet_truth():
    """Equilibrium play without deviation."""
    return NashGroundTruth(K2_star=np.array([[2.69, 1.37]]), u_tilde=ZeroSignal())


@pytest.fixture
def zero_box():
    return DisturbanceBox.from_bounds([0.0, 0.0])


@pytest.fixture
def rng():
    return np.random.default_rng(0)
