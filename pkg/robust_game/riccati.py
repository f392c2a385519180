"""
Riccati and Lyapunov solvers for the equilibrium ground truth.

One-sided CAREs are solved by Newton-Kleinman iteration (one Lyapunov solve
per step). The coupled pair is solved by alternating best responses.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, solve_continuous_are, solve_continuous_lyapunov

from robust_game.errors import AssumptionViolationError, ContractViolationError, ConvergenceError, NumericalError
from robust_game.utils import is_hurwitz, spectral_abscissa

logger = logging.getLogger(__name__)

STABILITY_MARGIN = 1e-9


@dataclass(frozen=True)
class CareSolution:
    """Stabilizing solution of A'P + PA - P B R^-1 B' P + Q = 0."""

    P: np.ndarray
    K: np.ndarray
    residual_norm: float
    closed_loop_eigs: np.ndarray
    iterations: int = 0


@dataclass(frozen=True)
class NashSolution:
    """Feedback Nash equilibrium of the two-player game."""

    P1: np.ndarray
    P2: np.ndarray
    K1_star: np.ndarray
    K2_star: np.ndarray
    residuals: tuple[float, float]
    coupled_eigs: np.ndarray
    iterations: int = 0


def _sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def solve_lyapunov(A_stable: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """
    Solve A'X + XA + Q = 0 for a Hurwitz A.

    Raises:
        ContractViolationError: If A is not Hurwitz
    """
    A_stable = np.atleast_2d(np.asarray(A_stable, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if not is_hurwitz(A_stable):
        raise ContractViolationError(
            f"Lyapunov solve needs a Hurwitz matrix (spectral abscissa {spectral_abscissa(A_stable):.3e})"
        )
    return _sym(solve_continuous_lyapunov(A_stable.T, -Q))


def care_residual(A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray, P: np.ndarray) -> float:
    """Frobenius norm of the CARE residual scaled by 1 + ||P||."""
    S = B @ np.linalg.solve(R, B.T)
    res = A.T @ P + P @ A - P @ S @ P + Q
    return float(np.linalg.norm(res) / (1.0 + np.linalg.norm(P)))


def initial_stabilizing_gain(A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray) -> np.ndarray:
    """
    A gain K with A - B K Hurwitz.

    Tries K = 0, then a shifted Lyapunov design, then scipy's CARE solver.

    Raises:
        AssumptionViolationError: If no stabilizing gain is found
    """
    nx, nu = B.shape
    if is_hurwitz(A, STABILITY_MARGIN):
        return np.zeros((nu, nx))

    beta = max(spectral_abscissa(A), 0.0) + 1.0
    shifted = A + beta * np.eye(nx)
    try:
        Z = solve_continuous_lyapunov(shifted, 2.0 * B @ B.T)
        K = B.T @ np.linalg.inv(_sym(Z))
        if np.all(np.isfinite(K)) and is_hurwitz(A - B @ K, STABILITY_MARGIN):
            return K
    except LinAlgError:
        pass
    logger.debug("Shifted design failed; falling back to scipy CARE for the initial gain")

    try:
        P = solve_continuous_are(A, B, Q + np.eye(nx), R)
        K = np.linalg.solve(R, B.T @ P)
        if is_hurwitz(A - B @ K, STABILITY_MARGIN):
            return K
    except (LinAlgError, ValueError):
        pass
    raise AssumptionViolationError("No stabilizing initial gain found; (A, B) is not stabilizable")


def solve_care(A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray, K0: Optional[np.ndarray] = None,
               tol: float = 1e-10, max_iters: int = 100) -> CareSolution:
    """
    Stabilizing CARE solution by Newton-Kleinman iteration.

    Args:
        K0: Optional stabilizing initial gain (warm start)

    Raises:
        AssumptionViolationError: If no stabilizing initial gain exists
        ConvergenceError: If the iteration does not converge
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = _sym(np.atleast_2d(np.asarray(Q, dtype=float)))
    R = _sym(np.atleast_2d(np.asarray(R, dtype=float)))

    if K0 is not None and is_hurwitz(A - B @ K0, STABILITY_MARGIN):
        K = np.atleast_2d(np.asarray(K0, dtype=float))
    else:
        K = initial_stabilizing_gain(A, B, Q, R)

    P = np.zeros_like(A)
    residual = np.inf
    for it in range(1, max_iters + 1):
        A_cl = A - B @ K
        if not is_hurwitz(A_cl):
            raise NumericalError("Newton-Kleinman iterate lost stability", iterate={"K": K.tolist(), "iteration": it})
        P = solve_continuous_lyapunov(A_cl.T, -(Q + K.T @ R @ K))
        P = _sym(P)
        K_next = np.linalg.solve(R, B.T @ P)
        residual = care_residual(A, B, Q, R, P)
        change = np.linalg.norm(K_next - K)
        K = K_next
        logger.debug("Newton-Kleinman step %d: residual %.3e, gain change %.3e", it, residual, change)
        if residual <= tol or change <= 1e-13 * (1.0 + np.linalg.norm(K)):
            break
    else:
        raise ConvergenceError(
            f"Newton-Kleinman did not converge in {max_iters} iterations (residual {residual:.3e})",
            diagnostics={"residual": residual, "K": K.tolist()},
        )

    return CareSolution(
        P=P,
        K=K,
        residual_norm=residual,
        closed_loop_eigs=np.linalg.eigvals(A - B @ K),
        iterations=it,
    )


def coupled_residuals(A, B1, B2, Q1, Q2, R1, R2, P1, P2) -> tuple[float, float]:
    """Scaled residuals of both coupled Riccati equations."""
    S1 = B1 @ np.linalg.solve(R1, B1.T)
    S2 = B2 @ np.linalg.solve(R2, B2.T)
    A1 = A - S2 @ P2
    A2 = A - S1 @ P1
    r1 = A1.T @ P1 + P1 @ A1 - P1 @ S1 @ P1 + Q1
    r2 = A2.T @ P2 + P2 @ A2 - P2 @ S2 @ P2 + Q2
    return (
        float(np.linalg.norm(r1) / (1.0 + np.linalg.norm(P1))),
        float(np.linalg.norm(r2) / (1.0 + np.linalg.norm(P2))),
    )


def solve_coupled_care(A, B1, B2, Q1, Q2, R1, R2, tol: float = 1e-10, max_iters: int = 500) -> NashSolution:
    """
    Feedback Nash gains from the coupled CAREs.

    Each player in turn best-responds to the other's latest gain until
    neither gain moves by more than tol.

    Raises:
        AssumptionViolationError: If neither player can start the iteration
        ConvergenceError: If the alternation does not settle in max_iters rounds
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B1 = np.atleast_2d(np.asarray(B1, dtype=float))
    B2 = np.atleast_2d(np.asarray(B2, dtype=float))
    Q1, Q2, R1, R2 = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (Q1, Q2, R1, R2))

    K1 = np.zeros((B1.shape[1], A.shape[0]))
    K2 = np.zeros((B2.shape[1], A.shape[0]))
    try:
        sol1 = solve_care(A, B1, Q1, R1)
        K1 = sol1.K
    except AssumptionViolationError:
        logger.debug("Player 1 cannot stabilize alone; starting with player 2")
        K2 = solve_care(A, B2, Q2, R2).K

    sol1 = sol2 = None
    change = np.inf
    for it in range(1, max_iters + 1):
        sol1 = solve_care(A - B2 @ K2, B1, Q1, R1, K0=K1)
        sol2 = solve_care(A - B1 @ sol1.K, B2, Q2, R2, K0=K2)
        change = max(np.linalg.norm(sol1.K - K1), np.linalg.norm(sol2.K - K2))
        K1, K2 = sol1.K, sol2.K
        if change < tol:
            break
    else:
        raise ConvergenceError(
            f"Coupled CARE iteration did not converge in {max_iters} rounds (last change {change:.3e})",
            diagnostics={"K1": K1.tolist(), "K2": K2.tolist(), "change": change},
        )

    residuals = coupled_residuals(A, B1, B2, Q1, Q2, R1, R2, sol1.P, sol2.P)
    logger.info("Nash gains after %d rounds: K1*=%s K2*=%s", it, np.round(K1, 4).tolist(), np.round(K2, 4).tolist())
    return NashSolution(
        P1=sol1.P,
        P2=sol2.P,
        K1_star=K1,
        K2_star=K2,
        residuals=residuals,
        coupled_eigs=np.linalg.eigvals(A - B1 @ K1 - B2 @ K2),
        iterations=it,
    )


def trajectory_gram(A_cl: np.ndarray, x0: np.ndarray) -> tuple[np.ndarray, float]:
    """
    Integral of x(t) x(t)' for the autonomous loop xdot = A_cl x, x(0) = x0.

    Raises:
        ContractViolationError: If A_cl is not Hurwitz
    """
    A_cl = np.atleast_2d(np.asarray(A_cl, dtype=float))
    x0 = np.asarray(x0, dtype=float).reshape(-1, 1)
    if not is_hurwitz(A_cl):
        raise ContractViolationError("Trajectory Gramian needs a Hurwitz closed loop")
    P1 = _sym(solve_continuous_lyapunov(A_cl, -x0 @ x0.T))
    return P1, float(np.trace(P1))
