"""Closed-loop simulation of the game and sample collection."""
import logging
from typing import Optional, Sequence

import numpy as np

from robust_game.errors import DivergenceError, InputError
from robust_game.models import DisturbanceBox, GameModel, NashGroundTruth, Sample, Trajectory

logger = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12


def adversary_input(truth: NashGroundTruth, x: np.ndarray, t: float) -> np.ndarray:
    """u2 = -K2* x + u_tilde(t)."""
    return -truth.K2_star @ np.asarray(x, dtype=float) + truth.u_tilde(t)


def sample_disturbance(box: DisturbanceBox, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the box {|w_i| <= gamma_i}."""
    gamma = box.per_axis_gamma
    return rng.uniform(-gamma, gamma)


def lumped_box(model: GameModel, gamma, envelope: float, lumped_gamma=None) -> DisturbanceBox:
    """
    Set used for identification: the exogenous box inflated by |B2_i| times the deviation envelope.

    An explicit lumped_gamma overrides the inflation.
    """
    if lumped_gamma is not None:
        return DisturbanceBox.from_bounds(lumped_gamma)
    inflation = np.abs(model.B2).sum(axis=1) * envelope
    return DisturbanceBox.from_bounds(np.asarray(gamma, dtype=float) + inflation)


def simulate(model: GameModel, K1: np.ndarray, truth: NashGroundTruth, box: DisturbanceBox, x0: np.ndarray,
             t0: float, t1: float, dt_integrate: float, rng: np.random.Generator,
             w_initial: Optional[np.ndarray] = None) -> Trajectory:
    """
    Fixed-step RK4 integration of xdot = A x + B1 u1 + B2 u2 + w.

    u1 = -K1 x and u2 follows the adversary's policy. w is drawn once per
    step and held over it. The row at t1 carries a fresh draw, the value
    the next segment should start from (pass it back as w_initial).

    Raises:
        InputError: If the time span or step is not positive
        DivergenceError: If the state becomes non-finite
    """
    if dt_integrate <= 0 or t1 <= t0:
        raise InputError("simulate needs dt_integrate > 0 and t1 > t0")
    n_steps = int(round((t1 - t0) / dt_integrate))
    times = t0 + dt_integrate * np.arange(n_steps + 1)
    K1 = np.atleast_2d(K1)
    A, B1, B2 = model.A, model.B1, model.B2

    states = np.empty((n_steps + 1, model.nx))
    u1 = np.empty((n_steps + 1, model.nu1))
    u2 = np.empty((n_steps + 1, model.nu2))
    w = np.empty((n_steps + 1, model.nx))

    def rhs(t, x, wk):
        return A @ x - B1 @ (K1 @ x) + B2 @ adversary_input(truth, x, t) + wk

    x = np.asarray(x0, dtype=float).copy()
    for k in range(n_steps + 1):
        t = times[k]
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_LIMIT:
            raise DivergenceError("State diverged", blow_up_time=float(t))
        wk = w_initial if (k == 0 and w_initial is not None) else sample_disturbance(box, rng)
        states[k] = x
        u1[k] = -K1 @ x
        u2[k] = adversary_input(truth, x, t)
        w[k] = wk
        if k == n_steps:
            break
        h = dt_integrate
        k1 = rhs(t, x, wk)
        k2 = rhs(t + h / 2, x + h / 2 * k1, wk)
        k3 = rhs(t + h / 2, x + h / 2 * k2, wk)
        k4 = rhs(t + h, x + h * k3, wk)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

    return Trajectory(times=times, states=states, u1=u1, u2=u2, w=w)


def lumped_disturbance(model: GameModel, truth: NashGroundTruth, trajectory: Trajectory) -> np.ndarray:
    """w + B2 u_tilde(t) along a trajectory."""
    deviation = np.array([truth.u_tilde(t) for t in trajectory.times]).reshape(len(trajectory), model.nu2)
    return trajectory.w + deviation @ model.B2.T


def collect_samples(trajectory: Trajectory, model: GameModel, truth: NashGroundTruth,
                    sample_times: Sequence[float]) -> list[Sample]:
    """
    Identification samples at grid times; xdot is the exact dynamics right-hand side.

    Raises:
        InputError: If a sample time is not on the trajectory grid
    """
    samples = []
    for t in sample_times:
        k = trajectory.index_of(t)
        x, u1, tk = trajectory.states[k], trajectory.u1[k], float(trajectory.times[k])
        xdot = model.A @ x + model.B1 @ u1 + model.B2 @ adversary_input(truth, x, tk) + trajectory.w[k]
        samples.append(Sample(xdot=xdot, x=x.copy(), u1=u1.copy(), t=tk))
    return samples
