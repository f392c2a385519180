"""epsilon-Nash certificate for the learned gain from the terminal uncertainty."""
import logging
from typing import Mapping, Optional, Union

import numpy as np

from robust_game.errors import CertificateError, ContractViolationError, RobustGameError
from robust_game.estimator import Ellipsoid, OmegaSet, row_parameter_indices
from robust_game.models import KnownDynamics
from robust_game.polytope import chebyshev_center
from robust_game.riccati import solve_care, trajectory_gram
from robust_game.schemas.record import EpsilonCertificate
from robust_game.utils import mask_columns, matrix_from_params

logger = logging.getLogger(__name__)


def _as_list(ellipsoids) -> list[Ellipsoid]:
    return list(ellipsoids.values()) if isinstance(ellipsoids, Mapping) else list(ellipsoids)


def perturbation_bound(ellipsoids, gamma) -> float:
    """nx * max_i gamma_i * sqrt(max_i lambda_max(S_i)); nx is the length of gamma."""
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    ellipsoids = _as_list(ellipsoids)
    if not ellipsoids:
        return 0.0
    lam = max(e.lambda_max for e in ellipsoids)
    return float(gamma.size * gamma.max() * np.sqrt(max(lam, 0.0)))


def _perturbed_policies(center_policy: np.ndarray, uncertainty, mask: np.ndarray) -> list[np.ndarray]:
    if isinstance(uncertainty, OmegaSet):
        return [matrix_from_params(v, mask) for v in uncertainty.vertices]
    d = float(uncertainty)
    if d < 0:
        raise ContractViolationError("Perturbation bound must be nonnegative")
    if d == 0.0:
        return []
    nx = mask.shape[0]
    policies = []
    for col in mask_columns(mask):
        i, j = col % nx, col // nx
        for sign in (1.0, -1.0):
            V = center_policy.copy()
            V[i, j] += sign * d
            policies.append(V)
    return policies


def delta_gain_bound(knowns: KnownDynamics, Q1: np.ndarray, R1: np.ndarray, center_policy: np.ndarray,
                     uncertainty: Union[OmegaSet, float], return_count: bool = False):
    """
    Largest deviation of the one-sided LQR gain over the uncertainty.

    The CARE is re-solved at every vertex of Omega, or at +-d along each
    masked entry when only a scalar bound d is given.

    Raises:
        CertificateError: If the center or a perturbed CARE cannot be solved
    """
    A, B1 = knowns.A, knowns.B1
    try:
        K_center = solve_care(A - center_policy, B1, Q1, R1).K
    except RobustGameError as e:
        raise CertificateError(f"CARE at the center policy is unsolvable: {e}") from e

    policies = _perturbed_policies(np.asarray(center_policy, dtype=float), uncertainty, knowns.param_mask)
    delta = 0.0
    for V in policies:
        try:
            K = solve_care(A - V, B1, Q1, R1, K0=K_center).K
        except RobustGameError as e:
            raise CertificateError(f"Perturbed CARE is unsolvable; uncertainty too large for a local bound: {e}") from e
        delta = max(delta, float(np.linalg.norm(K - K_center, 2)))
    logger.debug("delta = %.4g over %d perturbations", delta, len(policies))
    return (delta, len(policies)) if return_count else delta


def epsilon_bound(delta: float, K1_star: np.ndarray, R1: np.ndarray, trace_P1: float) -> float:
    """
    (2 ||K1*' R1|| delta + ||R1|| delta^2) Tr(P1) with induced 2-norms.

    Raises:
        ContractViolationError: If delta or trace_P1 is negative
    """
    if delta < 0 or trace_P1 < 0:
        raise ContractViolationError("epsilon needs nonnegative delta and Tr(P1)")
    K1_star = np.atleast_2d(K1_star)
    R1 = np.atleast_2d(R1)
    return float((2 * np.linalg.norm(K1_star.T @ R1, 2) * delta + np.linalg.norm(R1, 2) * delta**2) * trace_P1)


def certify(knowns: KnownDynamics, Q1: np.ndarray, R1: np.ndarray, ellipsoids, gamma, K1_star: np.ndarray,
            x0: np.ndarray, omega: Optional[OmegaSet] = None) -> EpsilonCertificate:
    """
    Assemble the certificate from the terminal ellipsoids and, when given, the terminal Omega.

    The center policy is the Chebyshev center of Omega (or the ellipsoid
    centers without Omega); Tr(P1) comes from the center closed loop.

    Raises:
        CertificateError: If the ellipsoids are not sigma-bounded or a CARE fails
    """
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    ellipsoids = _as_list(ellipsoids)
    if not ellipsoids:
        raise CertificateError("No row ellipsoids to certify from")
    lambda_max_S = max(e.lambda_max for e in ellipsoids)
    l_max = max(np.sqrt(max(e.sigma2, 0.0) * e.lambda_max) for e in ellipsoids)
    g = float(gamma.max())
    if l_max > g * np.sqrt(lambda_max_S) * (1 + 1e-12):
        raise CertificateError("Ellipsoid radius exceeds gamma; the certificate needs sigma-minimizing OBE weights")
    dA1 = perturbation_bound(ellipsoids, gamma)

    mask = knowns.param_mask
    if omega is not None:
        center_theta, _ = chebyshev_center(omega.hrep)
        center_policy = matrix_from_params(center_theta, mask)
        delta, count = delta_gain_bound(knowns, Q1, R1, center_policy, omega, return_count=True)
        method = "vertex-resolve"
    else:
        center_policy = np.zeros_like(knowns.A)
        for e in ellipsoids:
            js, _ = row_parameter_indices(mask, e.row)
            center_policy[e.row, js] = e.center
        delta, count = delta_gain_bound(knowns, Q1, R1, center_policy, dA1, return_count=True)
        method = "axis-resolve"

    K_center = solve_care(knowns.A - center_policy, knowns.B1, Q1, R1).K
    try:
        _, trace_P1 = trajectory_gram(knowns.A - center_policy - knowns.B1 @ K_center, x0)
    except ContractViolationError as e:
        raise CertificateError(f"Center closed loop is not Hurwitz: {e}") from e

    epsilon = epsilon_bound(delta, K1_star, R1, trace_P1)
    logger.info("Certificate: delta=%.4g Tr(P1)=%.4g epsilon=%.4g", delta, trace_P1, epsilon)
    return EpsilonCertificate(
        gamma=g,
        lambda_max_S=lambda_max_S,
        l_max=float(l_max),
        dA1_bound=dA1,
        delta=delta,
        trace_P1=trace_P1,
        epsilon=epsilon,
        delta_method=method,
        n_perturbations=count,
        K1_center=K_center.tolist(),
    )
