"""
Robust LQR design over the vertices of the unfalsified set.

minimize Tr(Q1 W) + Tr(X) subject to, for every vertex policy V,
    (A - V) W + W (A - V)' - B1 Y - Y' B1' + I <= 0,
    [[X, R1^1/2 Y], [Y' R1^1/2, W]] >= 0,  W >= eps I,
and K1 = Y W^-1.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import cvxpy as cp
import numpy as np

from robust_game.errors import ConfigurationError, ContractViolationError, NumericalError, RobustInfeasibleError
from robust_game.estimator import OmegaSet
from robust_game.models import KnownDynamics
from robust_game.polytope import HPolytope, enumerate_vertices
from robust_game.schemas.record import VerificationRecord
from robust_game.schemas.scenario import VertexOverflow
from robust_game.settings import get_settings
from robust_game.utils import matrix_from_params, psd_sqrt, spectral_abscissa

logger = logging.getLogger(__name__)

W_FLOOR = 1e-8


@dataclass(frozen=True)
class RobustLqrProblem:
    """Data of the vertex-constrained program."""

    A: np.ndarray
    B1: np.ndarray
    Q1: np.ndarray
    R1: np.ndarray
    vertex_policies: tuple

    def __post_init__(self):
        if len(self.vertex_policies) == 0:
            raise ContractViolationError("Robust design needs at least one vertex policy")
        if np.linalg.eigvalsh(0.5 * (self.Q1 + self.Q1.T)).min() < -1e-10:
            raise ConfigurationError("Q1 is not positive semidefinite")
        if np.linalg.eigvalsh(0.5 * (self.R1 + self.R1.T)).min() <= 0:
            raise ConfigurationError("R1 is not positive definite")

    @property
    def nx(self) -> int:
        return self.A.shape[0]

    @property
    def nu1(self) -> int:
        return self.B1.shape[1]

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_policies)

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B1": self.B1.tolist(),
            "Q1": self.Q1.tolist(),
            "R1": self.R1.tolist(),
            "vertex_policies": [V.tolist() for V in self.vertex_policies],
        }


@dataclass(frozen=True)
class SdpSolution:
    """Optimal program variables and the recovered gain."""

    Wc: np.ndarray
    Y: np.ndarray
    X: np.ndarray
    objective: float
    K1: np.ndarray
    kkt_gap: float
    status: str
    kkt_ok: bool = True


def policy_problem(A, B1, Q1, R1, policies: Sequence[np.ndarray]) -> RobustLqrProblem:
    """Problem over an explicit list of B2K2 matrices."""
    return RobustLqrProblem(
        A=np.atleast_2d(np.asarray(A, dtype=float)),
        B1=np.atleast_2d(np.asarray(B1, dtype=float)),
        Q1=np.atleast_2d(np.asarray(Q1, dtype=float)),
        R1=np.atleast_2d(np.asarray(R1, dtype=float)),
        vertex_policies=tuple(np.atleast_2d(np.asarray(V, dtype=float)) for V in policies),
    )


def build_problem(knowns: KnownDynamics, Q1: np.ndarray, R1: np.ndarray, omega: OmegaSet,
                  mask: Optional[np.ndarray] = None, max_vertices: int = 512,
                  overflow: VertexOverflow = VertexOverflow.RAISE) -> RobustLqrProblem:
    """
    One stability LMI per vertex of Omega.

    With overflow=BOUNDING_BOX an Omega above the cap is replaced by the
    corners of its bounding box, a superset, so the design stays robust.

    Raises:
        RobustInfeasibleError: If Omega is unbounded or empty, or has more vertices than max_vertices
    """
    mask = knowns.param_mask if mask is None else mask
    try:
        omega = omega.with_vertices()
    except ContractViolationError as e:
        raise RobustInfeasibleError(f"Omega is unbounded; collect more informative data first ({e})") from e
    vertices = omega.vrep_cache.vertices
    if omega.vrep_cache.n_v == 0:
        raise RobustInfeasibleError("Omega has no vertices")
    if len(vertices) > max_vertices and overflow == VertexOverflow.BOUNDING_BOX:
        n_exact = len(vertices)
        vertices = enumerate_vertices(HPolytope.box(vertices.min(axis=0), vertices.max(axis=0))).vertices
        logger.warning("Omega has %d vertices, above the cap of %d; designing on its %d bounding-box corners",
                       n_exact, max_vertices, len(vertices))
    if len(vertices) > max_vertices:
        raise RobustInfeasibleError(
            f"Omega has {len(vertices)} vertices, above the cap of {max_vertices}; prune or shrink Omega"
        )
    if len(vertices) > 0.8 * max_vertices:
        logger.warning("Vertex count %d is close to the cap %d", len(vertices), max_vertices)
    policies = [matrix_from_params(v, mask) for v in vertices]
    return policy_problem(knowns.A, knowns.B1, Q1, R1, policies)


def _sym(M):
    return 0.5 * (M + M.T)


def lmi_matrix(A: np.ndarray, B1: np.ndarray, V: np.ndarray, W: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Numeric value of (A - V) W + W (A - V)' - B1 Y - Y' B1' + I."""
    Acl = A - V
    M = Acl @ W + W @ Acl.T - B1 @ Y - Y.T @ B1.T + np.eye(A.shape[0])
    return _sym(M)


def solver_options(solver: str, tol: float) -> dict:
    """Gap and feasibility tolerances in the keyword names each cvxpy backend expects."""
    name = solver.upper()
    if name == "CLARABEL":
        return {"tol_gap_abs": tol, "tol_gap_rel": tol, "tol_feas": tol}
    if name == "SCS":
        return {"eps_abs": tol, "eps_rel": tol, "max_iters": 200_000}
    logger.warning("No tolerance mapping for solver %s; using its defaults", solver)
    return {}


def solve_robust_lqr(problem: RobustLqrProblem, solver: Optional[str] = None, kkt_tolerance: Optional[float] = None,
                     strict_kkt: Optional[bool] = None) -> SdpSolution:
    """
    Solve the vertex-constrained program.

    A KKT gap above kkt_tolerance * max(1, |objective|) is logged and
    flagged on the solution, or raised when strict_kkt is set.

    Raises:
        RobustInfeasibleError: If no common certificate exists
        NumericalError: If the solver fails, returns an unusable point, or misses the KKT tolerance in strict mode
    """
    settings = get_settings()
    solver = solver or settings.sdp_solver
    kkt_tolerance = settings.kkt_tolerance if kkt_tolerance is None else kkt_tolerance
    strict_kkt = settings.strict_kkt if strict_kkt is None else strict_kkt
    nx, nu = problem.nx, problem.nu1
    A, B1 = problem.A, problem.B1
    R_half = psd_sqrt(problem.R1)
    I = np.eye(nx)

    W = cp.Variable((nx, nx), symmetric=True)
    Y = cp.Variable((nu, nx))
    X = cp.Variable((nu, nu), symmetric=True)

    constraints = []
    for V in problem.vertex_policies:
        Acl = A - V
        M = Acl @ W + W @ Acl.T - B1 @ Y - Y.T @ B1.T + I
        constraints.append(-_sym(M) >> 0)
    schur = cp.bmat([[X, R_half @ Y], [(R_half @ Y).T, W]])
    constraints.append(_sym(schur) >> 0)
    constraints.append(W - W_FLOOR * I >> 0)

    prob = cp.Problem(cp.Minimize(cp.trace(problem.Q1 @ W) + cp.trace(X)), constraints)
    try:
        prob.solve(solver=solver, **solver_options(solver, settings.sdp_tolerance))
    except cp.SolverError as e:
        raise NumericalError(f"SDP solver {solver} failed: {e}", iterate={"n_vertices": problem.n_vertices}) from e

    status = prob.status
    logger.debug("SDP status %s, objective %s", status, prob.value)
    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        raise RobustInfeasibleError(
            f"No common quadratic certificate for {problem.n_vertices} vertices; Omega is too large"
        )
    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or W.value is None:
        raise NumericalError(f"SDP ended with status {status}", iterate={"status": status})
    if status == cp.OPTIMAL_INACCURATE:
        logger.warning("SDP solved inaccurately; objective %.6g", prob.value)

    Wv = _sym(W.value)
    Yv = np.asarray(Y.value)
    K1 = np.linalg.solve(Wv.T, Yv.T).T
    kkt_gap = 0.0
    for c in constraints:
        if c.dual_value is not None and c.args[0].value is not None:
            kkt_gap += abs(float(np.sum(np.asarray(c.dual_value) * np.asarray(c.args[0].value))))
    if not np.all(np.isfinite(K1)):
        raise NumericalError("Recovered gain is not finite", iterate={"W": Wv.tolist(), "Y": Yv.tolist()})
    kkt_bound = kkt_tolerance * max(1.0, abs(float(prob.value)))
    kkt_ok = kkt_gap <= kkt_bound
    if not kkt_ok:
        if strict_kkt:
            raise NumericalError(f"KKT gap {kkt_gap:.3g} exceeds {kkt_bound:.3g}",
                                 iterate={"kkt_gap": kkt_gap, "status": status})
        logger.warning("KKT gap %.3g exceeds %.3g on %d vertices", kkt_gap, kkt_bound, problem.n_vertices)

    return SdpSolution(
        Wc=Wv,
        Y=Yv,
        X=_sym(np.atleast_2d(X.value)),
        objective=float(prob.value),
        K1=K1,
        kkt_gap=kkt_gap,
        status=status,
        kkt_ok=kkt_ok,
    )


def verify_quadratic_stability(sol: SdpSolution, problem: RobustLqrProblem, n_combos: int = 100,
                               seed: int = 0, tol: float = 1e-7) -> VerificationRecord:
    """
    Re-check the LMIs and closed-loop stability for the solution's gain.

    The vertex LMIs are evaluated with Y = K1 Wc, then n_combos random
    convex combinations of vertex policies are checked the same way.
    """
    W = sol.Wc
    Y = sol.K1 @ W
    A, B1 = problem.A, problem.B1
    scaled_tol = tol * (1.0 + np.linalg.norm(W))

    def margins(V):
        return (
            float(np.linalg.eigvalsh(lmi_matrix(A, B1, V, W, Y)).max()),
            spectral_abscissa(A - V - B1 @ sol.K1),
        )

    vertex = [margins(V) for V in problem.vertex_policies]
    failures = [i for i, (lmi, absc) in enumerate(vertex) if lmi > scaled_tol or absc >= 0]

    rng = np.random.default_rng(seed)
    stack = np.stack(problem.vertex_policies)
    combo_lmi, combo_abs = -np.inf, -np.inf
    for _ in range(n_combos):
        lam = rng.dirichlet(np.ones(len(stack)))
        lmi, absc = margins(np.tensordot(lam, stack, axes=1))
        combo_lmi, combo_abs = max(combo_lmi, lmi), max(combo_abs, absc)

    worst_vertex_lmi = max(v[0] for v in vertex)
    worst_vertex_abs = max(v[1] for v in vertex)
    passed = not failures and (n_combos == 0 or (combo_lmi <= scaled_tol and combo_abs < 0))
    return VerificationRecord(
        passed=passed,
        n_vertices=problem.n_vertices,
        n_combos=n_combos,
        worst_vertex_lmi=worst_vertex_lmi,
        worst_combo_lmi=float(combo_lmi) if n_combos else worst_vertex_lmi,
        worst_vertex_abscissa=worst_vertex_abs,
        worst_combo_abscissa=float(combo_abs) if n_combos else worst_vertex_abs,
        vertex_failures=failures,
    )
