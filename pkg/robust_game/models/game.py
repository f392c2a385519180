"""Game definition, cost weights, disturbance sets and well-posedness checks."""
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import linprog

from robust_game.errors import AssumptionViolationError, ConfigurationError, InputError
from robust_game.models.trajectory import Trajectory
from robust_game.settings import get_settings
from robust_game.utils import numerical_rank, params_from_matrix, psd_sqrt
from robust_game.utils.deviation_factory import DeviationSignal

logger = logging.getLogger(__name__)


def _as_matrix(M, name: str) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise ConfigurationError(f"{name} must be a matrix")
    return M


class KnownDynamics(NamedTuple):
    """What the controlled player knows about the plant."""

    A: np.ndarray
    B1: np.ndarray
    param_mask: np.ndarray


@dataclass(frozen=True)
class GameModel:
    """
    Two-player linear game xdot = A x + B1 u1 + B2 u2 + w.

    B2 is simulation truth only. param_mask marks the entries of B2 K2
    treated as unknown; every other entry is fixed at zero.
    """

    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    param_mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A, "A"))
        object.__setattr__(self, "B1", _as_matrix(self.B1, "B1"))
        object.__setattr__(self, "B2", _as_matrix(self.B2, "B2"))
        object.__setattr__(self, "param_mask", np.atleast_2d(np.asarray(self.param_mask, dtype=bool)))
        nx = self.A.shape[0]
        if self.A.shape != (nx, nx):
            raise ConfigurationError(f"A must be square, got {self.A.shape}")
        if self.B1.shape[0] != nx or self.B2.shape[0] != nx:
            raise ConfigurationError(f"B1 and B2 must have {nx} rows")
        if self.param_mask.shape != (nx, nx):
            raise ConfigurationError(f"param_mask must be {nx}x{nx}, got {self.param_mask.shape}")
        if not self.param_mask.any():
            raise ConfigurationError("param_mask marks no unknown entries")

    @property
    def nx(self) -> int:
        return self.A.shape[0]

    @property
    def nu1(self) -> int:
        return self.B1.shape[1]

    @property
    def nu2(self) -> int:
        return self.B2.shape[1]

    @property
    def n_params(self) -> int:
        return int(self.param_mask.sum())

    def knowns(self) -> KnownDynamics:
        return KnownDynamics(self.A, self.B1, self.param_mask)

    def policy_matrix(self, K2: np.ndarray) -> np.ndarray:
        """The adversary's closed-loop contribution B2 K2."""
        K2 = _as_matrix(K2, "K2")
        if K2.shape != (self.nu2, self.nx):
            raise ConfigurationError(f"K2 must be {self.nu2}x{self.nx}, got {K2.shape}")
        return self.B2 @ K2

    def check_mask(self, K2: np.ndarray, tol: float = 1e-12) -> None:
        """
        Raise if B2 K2 has nonzero entries outside param_mask.

        Raises:
            ConfigurationError: If the mask hides a nonzero entry
        """
        outside = np.abs(self.policy_matrix(K2)[~self.param_mask])
        if outside.size and outside.max() > tol:
            raise ConfigurationError(f"param_mask hides nonzero entries of B2K2 (max {outside.max():.3e})")

    def policy_params(self, K2: np.ndarray) -> np.ndarray:
        """Masked entries of B2 K2 in column-major order."""
        return params_from_matrix(self.policy_matrix(K2), self.param_mask)


@dataclass(frozen=True)
class CostWeights:
    """Quadratic cost weights of one player."""

    Q: np.ndarray
    R: np.ndarray
    owner: int = 1

    def __post_init__(self):
        Q = _as_matrix(self.Q, "Q")
        R = _as_matrix(self.R, "R")
        object.__setattr__(self, "Q", 0.5 * (Q + Q.T))
        object.__setattr__(self, "R", 0.5 * (R + R.T))
        if self.owner not in (1, 2):
            raise ConfigurationError(f"Cost owner must be 1 or 2, got {self.owner}")
        if Q.shape[0] != Q.shape[1] or R.shape[0] != R.shape[1]:
            raise ConfigurationError("Q and R must be square")
        if np.linalg.eigvalsh(self.Q).min() < -1e-10:
            raise ConfigurationError(f"Q{self.owner} is not positive semidefinite")
        if np.linalg.eigvalsh(self.R).min() <= 1e-12:
            raise ConfigurationError(f"R{self.owner} is not positive definite")

    @property
    def Q_sqrt(self) -> np.ndarray:
        return psd_sqrt(self.Q)


@dataclass(frozen=True)
class DisturbanceBox:
    """
    Polytopic disturbance set {w : Gw w <= gw} with per-axis bounds.

    A zero per-axis bound is allowed for exogenous noise; identification
    sets built from lumped bounds are strictly positive.
    """

    Gw: np.ndarray
    gw: np.ndarray
    per_axis_gamma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Gw", _as_matrix(self.Gw, "Gw"))
        object.__setattr__(self, "gw", np.asarray(self.gw, dtype=float).ravel())
        object.__setattr__(self, "per_axis_gamma", np.asarray(self.per_axis_gamma, dtype=float).ravel())
        if self.Gw.shape[0] != self.gw.size or self.Gw.shape[1] != self.per_axis_gamma.size:
            raise ConfigurationError("Gw, gw and per_axis_gamma have inconsistent sizes")
        if np.any(self.per_axis_gamma < 0):
            raise ConfigurationError("Per-axis disturbance bounds must be nonnegative")
        if np.any(self.gw < 0):
            raise ConfigurationError("Disturbance set must contain the origin")
        self._check_contained_in_box()

    @classmethod
    def from_bounds(cls, gamma) -> "DisturbanceBox":
        """Axis-aligned box {|w_i| <= gamma_i}."""
        gamma = np.asarray(gamma, dtype=float).ravel()
        n = gamma.size
        return cls(Gw=np.vstack([np.eye(n), -np.eye(n)]), gw=np.concatenate([gamma, gamma]), per_axis_gamma=gamma)

    @property
    def nx(self) -> int:
        return self.per_axis_gamma.size

    @property
    def is_positive(self) -> bool:
        return bool(np.all(self.per_axis_gamma > 0))

    def contains(self, w: np.ndarray, tol: float = 1e-9) -> bool:
        return bool(np.all(self.Gw @ np.asarray(w, dtype=float) <= self.gw + tol))

    def _check_contained_in_box(self) -> None:
        tol = get_settings().lp_tolerance
        for i in range(self.nx):
            for sign in (1.0, -1.0):
                c = np.zeros(self.nx)
                c[i] = -sign
                res = linprog(c, A_ub=self.Gw, b_ub=self.gw, bounds=[(None, None)] * self.nx, method="highs")
                if res.status == 3:
                    raise ConfigurationError("Disturbance set is unbounded")
                if res.status != 0:
                    raise ConfigurationError(f"Disturbance set LP failed: {res.message}")
                if -res.fun > self.per_axis_gamma[i] + max(tol, 1e-9 * self.per_axis_gamma[i]):
                    raise ConfigurationError(f"Disturbance set exceeds per-axis bound on axis {i}")


@dataclass(frozen=True)
class NashGroundTruth:
    """Adversary equilibrium gain and its deviation signal."""

    K2_star: np.ndarray
    u_tilde: DeviationSignal

    def __post_init__(self):
        object.__setattr__(self, "K2_star", _as_matrix(self.K2_star, "K2_star"))


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the stabilizability-detectability checks for both players."""

    player1_ok: bool
    player2_ok: bool
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.player1_ok or self.player2_ok


@dataclass(frozen=True)
class CostReport:
    """Truncated quadratic cost of one player along a recorded trajectory."""

    value: float
    horizon: float
    n_points: int
    truncated: bool = True

    def __float__(self) -> float:
        return self.value


def _candidate_modes(A: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    eigs = np.linalg.eigvals(A)
    return eigs[eigs.real >= -tol]


def is_stabilizable(A: np.ndarray, B: np.ndarray, rtol: Optional[float] = None) -> bool:
    """PBH test: rank [A - lambda I, B] = nx for every eigenvalue with Re >= 0."""
    rtol = rtol or get_settings().rank_tolerance
    nx = A.shape[0]
    for lam in _candidate_modes(A):
        if numerical_rank(np.hstack([A - lam * np.eye(nx), B]), rtol) < nx:
            return False
    return True


def is_detectable(A: np.ndarray, C: np.ndarray, rtol: Optional[float] = None) -> bool:
    """PBH test: rank [A - lambda I; C] = nx for every eigenvalue with Re >= 0."""
    return is_stabilizable(A.T, C.T, rtol)


def validate_model(model: GameModel, q1: CostWeights, q2: CostWeights) -> ValidationReport:
    """
    Check that at least one of (A, B1, sqrt Q1) and (A, B2, sqrt Q2) is stabilizable-detectable.

    Raises:
        ConfigurationError: If the weights do not match the model dimensions
        AssumptionViolationError: If neither triple passes
    """
    nx = model.nx
    if q1.Q.shape != (nx, nx) or q2.Q.shape != (nx, nx):
        raise ConfigurationError(f"State weights must be {nx}x{nx}")
    if q1.R.shape != (model.nu1, model.nu1):
        raise ConfigurationError(f"R1 must be {model.nu1}x{model.nu1}")
    if q2.R.shape != (model.nu2, model.nu2):
        raise ConfigurationError(f"R2 must be {model.nu2}x{model.nu2}")

    details = {
        "stabilizable_1": is_stabilizable(model.A, model.B1),
        "detectable_1": is_detectable(model.A, q1.Q_sqrt),
        "stabilizable_2": is_stabilizable(model.A, model.B2),
        "detectable_2": is_detectable(model.A, q2.Q_sqrt),
    }
    report = ValidationReport(
        player1_ok=details["stabilizable_1"] and details["detectable_1"],
        player2_ok=details["stabilizable_2"] and details["detectable_2"],
        details=details,
    )
    logger.debug("Model validation: %s", details)
    if not report.passed:
        raise AssumptionViolationError(f"Neither player's triple is stabilizable-detectable: {details}")
    return report


def evaluate_cost(trajectory: Trajectory, weights: CostWeights, gain: np.ndarray) -> CostReport:
    """
    Trapezoidal approximation of the integral of x'Qx + u'Ru with u = -K x.

    Raises:
        InputError: If the trajectory is empty
    """
    if trajectory.is_empty:
        raise InputError("Cannot evaluate the cost of an empty trajectory")
    X = np.asarray(trajectory.states, dtype=float)
    U = -X @ np.atleast_2d(gain).T
    integrand = np.einsum("ki,ij,kj->k", X, weights.Q, X) + np.einsum("ki,ij,kj->k", U, weights.R, U)
    value = float(trapezoid(integrand, trajectory.times)) if len(trajectory) > 1 else 0.0
    return CostReport(
        value=max(value, 0.0),
        horizon=float(trajectory.times[-1] - trajectory.times[0]),
        n_points=len(trajectory),
    )
