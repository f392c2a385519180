"""
Set-membership identification of the adversary policy B2 K2.

Samples become halfspaces on the masked entries of vec(B2 K2). The same
data also feeds a row-wise outer-bounding-ellipsoid recursion used to
monitor convergence, and a least-squares point estimate used as baseline.
"""
import logging
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, null_space, solve
from scipy.optimize import minimize_scalar

from robust_game.errors import EstimationError, FalsificationError, InputError
from robust_game.models import DisturbanceBox, KnownDynamics, Sample
from robust_game.polytope import HPolytope, VPolytope, add_halfspaces, enumerate_vertices
from robust_game.schemas.scenario import ObeWeight
from robust_game.settings import get_settings
from robust_game.utils import mask_columns, numerical_rank

logger = logging.getLogger(__name__)

RIDGE = 1e-10


@dataclass(frozen=True)
class OmegaSet:
    """Unfalsified adversary policies; vrep_cache is dropped whenever the set changes."""

    hrep: HPolytope
    vrep_cache: Optional[VPolytope] = None
    iteration: int = 0

    def with_vertices(self) -> "OmegaSet":
        if self.vrep_cache is not None:
            return self
        return replace(self, vrep_cache=enumerate_vertices(self.hrep))

    @property
    def vertices(self) -> np.ndarray:
        return self.with_vertices().vrep_cache.vertices


@dataclass(frozen=True)
class Ellipsoid:
    """{theta : (theta - c)' S^-1 (theta - c) <= sigma2} for one row of B2 K2."""

    center: np.ndarray
    S: np.ndarray
    sigma2: float
    row: int

    def contains(self, theta: np.ndarray, tol: float = 1e-9) -> bool:
        d = np.asarray(theta, dtype=float) - self.center
        return float(d @ np.linalg.solve(self.S, d)) <= self.sigma2 * (1 + tol) + tol

    @property
    def lambda_max(self) -> float:
        return float(np.linalg.eigvalsh(self.S).max())


@dataclass(frozen=True)
class ExcitationReport:
    """Extreme eigenvalues of the windowed moment sum of [x; w_i]."""

    alpha1: float
    alpha2: float
    window: int

    @property
    def persistent(self) -> bool:
        return self.alpha1 > 1e-12


def constraints_from_sample(s: Sample, knowns: KnownDynamics, box: DisturbanceBox,
                            mask: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Halfspaces E_k theta <= b_k implied by one sample.

    E_k = (x_k' kron Gw) on the masked columns; b_k = gw - Gw (xdot - A x - B1 u1).
    """
    mask = knowns.param_mask if mask is None else mask
    E_full = np.kron(s.x.reshape(1, -1), box.Gw)
    residual = s.xdot - knowns.A @ s.x - knowns.B1 @ s.u1
    b = box.gw - box.Gw @ residual
    return E_full[:, mask_columns(mask)], b


def update_omega(prev: OmegaSet, batch: Iterable[tuple[np.ndarray, np.ndarray]], start_index: int = 0) -> OmegaSet:
    """
    Intersect Omega with every sample's halfspaces.

    Raises:
        FalsificationError: If a sample empties the set, naming its index
    """
    hrep = prev.hrep
    for k, (E_k, b_k) in enumerate(batch):
        try:
            hrep = add_halfspaces(hrep, E_k, b_k, prune=True)
        except FalsificationError as e:
            raise FalsificationError(f"Disturbance model violated: {e}", sample_index=start_index + k) from e
    if hrep is prev.hrep:
        return replace(prev, iteration=prev.iteration + 1)
    return OmegaSet(hrep=hrep, vrep_cache=None, iteration=prev.iteration + 1)


def _regression(samples: Sequence[Sample], knowns: KnownDynamics, mask: np.ndarray):
    cols = mask_columns(mask)
    nx = knowns.A.shape[0]
    Phi = np.vstack([np.kron(s.x.reshape(1, -1), np.eye(nx))[:, cols] for s in samples])
    target = np.concatenate([-(s.xdot - knowns.A @ s.x - knowns.B1 @ s.u1) for s in samples])
    return Phi, target


def least_squares_estimate(samples: Sequence[Sample], knowns: KnownDynamics,
                           mask: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Least-squares estimate of the masked entries of B2 K2.

    Raises:
        EstimationError: If the stacked regressor is rank deficient
    """
    mask = knowns.param_mask if mask is None else mask
    if not samples:
        raise EstimationError("No samples for least squares")
    Phi, target = _regression(samples, knowns, mask)
    p = Phi.shape[1]
    if numerical_rank(Phi, get_settings().rank_tolerance) < p:
        deficient = null_space(Phi, rcond=get_settings().rank_tolerance)
        raise EstimationError(
            f"Least-squares regressor has rank below {p}; more excitation needed",
            deficient_subspace=deficient,
        )
    G = Phi.T @ Phi
    rhs = Phi.T @ target
    try:
        return solve(G, rhs, assume_a="pos")
    except LinAlgError:
        logger.debug("Normal equations singular; using ridge %.0e", RIDGE)
        return solve(G + RIDGE * np.eye(p), rhs, assume_a="pos")


def row_parameter_indices(mask: np.ndarray, row: int) -> tuple[np.ndarray, np.ndarray]:
    """
    For one matrix row: the masked column indices j, and the positions of
    entries (row, j) inside the masked parameter vector.
    """
    mask = np.asarray(mask, dtype=bool)
    nx = mask.shape[0]
    cols = mask_columns(mask)
    js = np.flatnonzero(mask[row])
    positions = np.searchsorted(cols, js * nx + row)
    return js, positions


def obe_row_data(s: Sample, knowns: KnownDynamics, row: int, mask: Optional[np.ndarray] = None):
    """Scalar regression y = theta' x + v for one row, |v| <= gamma_row."""
    mask = knowns.param_mask if mask is None else mask
    js, _ = row_parameter_indices(mask, row)
    residual = s.xdot - knowns.A @ s.x - knowns.B1 @ s.u1
    return s.x[js], float(-residual[row])


def initial_ellipsoids(lower, upper, mask: np.ndarray, gamma) -> dict[int, Ellipsoid]:
    """
    Row ellipsoids enclosing the initial parameter box.

    sigma2 starts at gamma_i^2 and S at p_row diag(h^2) / gamma_i^2, where h
    are the box half-widths.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    ellipsoids = {}
    for row in range(np.asarray(mask).shape[0]):
        js, positions = row_parameter_indices(mask, row)
        if js.size == 0:
            continue
        half = 0.5 * (upper[positions] - lower[positions])
        center = 0.5 * (upper[positions] + lower[positions])
        g2 = gamma[row] ** 2
        ellipsoids[row] = Ellipsoid(center=center, S=js.size * np.diag(half**2) / g2, sigma2=g2, row=row)
    return ellipsoids


def _updated(e: Ellipsoid, x: np.ndarray, err: float, gamma: float, lam: float) -> Ellipsoid:
    Sx = e.S @ x
    G = float(x @ Sx)
    denom = 1.0 + lam * G
    S_new = e.S - (lam / denom) * np.outer(Sx, Sx)
    return Ellipsoid(
        center=e.center + (lam * err / denom) * Sx,
        S=0.5 * (S_new + S_new.T),
        sigma2=max(e.sigma2 + lam * gamma**2 - lam * err**2 / denom, 0.0),
        row=e.row,
    )


def _sigma2_after(e: Ellipsoid, G: float, err: float, gamma: float, lam: float) -> float:
    return e.sigma2 + lam * gamma**2 - lam * err**2 / (1.0 + lam * G)


def obe_update(e: Ellipsoid, x: np.ndarray, y: float, gamma: float,
               weight: ObeWeight = ObeWeight.SIGMA) -> Ellipsoid:
    """
    One outer-bounding-ellipsoid step with the data slab |y - theta' x| <= gamma.

    SIGMA picks the weight minimizing the updated sigma2; VOLUME minimizes
    the ellipsoid volume by a bounded scalar search.

    Raises:
        InputError: If gamma is not positive
        FalsificationError: If the slab misses the ellipsoid
    """
    if gamma <= 0:
        raise InputError("OBE update needs a positive disturbance bound")
    x = np.asarray(x, dtype=float)
    err = float(y - e.center @ x)
    G = float(x @ e.S @ x)
    reach = np.sqrt(max(e.sigma2, 0.0) * max(G, 0.0))
    slack = 1e-9 * (1.0 + gamma)

    if abs(err) > gamma + reach + slack:
        raise FalsificationError(f"Row {e.row} slab misses the ellipsoid (|e|={abs(err):.4g}, gamma={gamma:.4g})")
    if G <= 1e-14 or abs(err) + reach <= gamma:
        return e

    if weight == ObeWeight.SIGMA:
        if abs(err) <= gamma:
            return e
        lam = (abs(err) / gamma - 1.0) / G
    else:
        p = e.center.size

        def log_volume(mu: float) -> float:
            t = mu / (1.0 - mu)
            s2 = _sigma2_after(e, G, err, gamma, t / G)
            return p * np.log(max(s2, 1e-300)) - np.log1p(t)

        res = minimize_scalar(log_volume, bounds=(0.0, 1.0 - 1e-9), method="bounded", options={"xatol": 1e-12})
        if not res.success or res.fun >= log_volume(0.0):
            return e
        lam = (res.x / (1.0 - res.x)) / G

    logger.debug("OBE row %d weight %.4g", e.row, lam)
    return _updated(e, x, err, gamma, lam)


def obe_update_rows(ellipsoids: dict[int, Ellipsoid], s: Sample, knowns: KnownDynamics, gamma,
                    weight: ObeWeight = ObeWeight.SIGMA, sample_index: Optional[int] = None) -> dict[int, Ellipsoid]:
    """Feed one sample to every row recursion."""
    gamma = np.asarray(gamma, dtype=float)
    out = {}
    for row, e in ellipsoids.items():
        x, y = obe_row_data(s, knowns, row)
        try:
            out[row] = obe_update(e, x, y, float(gamma[row]), weight)
        except FalsificationError as err:
            raise FalsificationError(str(err), sample_index=sample_index) from err
    return out


def excitation_metric(samples: Sequence[Sample], disturbances: np.ndarray, i: int) -> ExcitationReport:
    """
    Extreme eigenvalues of sum_k z_k z_k' with z_k = [x_k; w_k,i].

    Raises:
        InputError: If the window is empty or sizes disagree
    """
    if len(samples) == 0:
        raise InputError("Excitation window is empty")
    disturbances = np.atleast_2d(np.asarray(disturbances, dtype=float))
    if disturbances.shape[0] != len(samples):
        raise InputError("Excitation window needs one disturbance per sample")
    Z = np.column_stack([np.vstack([s.x for s in samples]), disturbances[:, i]])
    eigs = np.linalg.eigvalsh(Z.T @ Z)
    return ExcitationReport(alpha1=float(max(eigs[0], 0.0)), alpha2=float(max(eigs[-1], 0.0)), window=len(samples))
