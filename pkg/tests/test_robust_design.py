"""Tests for the vertex-constrained robust LQR program and its verification."""
from dataclasses import replace

import numpy as np
import pytest

from robust_game.errors import ConfigurationError, ContractViolationError, NumericalError, RobustInfeasibleError
from robust_game.estimator import OmegaSet
from robust_game.polytope import HPolytope
from robust_game.riccati import solve_care
from robust_game.robust_design import (
    build_problem,
    lmi_matrix,
    policy_problem,
    solver_options,
    solve_robust_lqr,
    verify_quadratic_stability,
)
from robust_game.schemas import VertexOverflow
from robust_game.utils import matrix_from_params, spectral_abscissa

THETA = np.array([0.8 / 6 * 2.69, 0.8 / 6 * 1.37])


@pytest.fixture
def knowns(contact_model):
    return contact_model.knowns()


@pytest.fixture
def q1(contact_weights):
    return contact_weights[0]


@pytest.fixture
def small_box(knowns):
    return OmegaSet(hrep=HPolytope.box(THETA - 0.05, THETA + 0.05))


@pytest.fixture
def octagon():
    """Square of half-width 0.05 around the truth with its corners cut off."""
    E = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0],
                  [1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    offsets = np.array([0.05, 0.05, 0.05, 0.05, 0.07, 0.07, 0.07, 0.07])
    return OmegaSet(hrep=HPolytope(E=E, b=E @ THETA + offsets))


class TestRobustLqrProblem:
    """Test suite for problem construction."""

    def test_needs_a_policy(self, knowns, q1):
        """Test that an empty policy list is rejected."""
        with pytest.raises(ContractViolationError, match="at least one vertex"):
            policy_problem(knowns.A, knowns.B1, q1.Q, q1.R, [])

    def test_indefinite_q(self, knowns, q1):
        """Test that Q1 must be positive semidefinite."""
        with pytest.raises(ConfigurationError, match="Q1"):
            policy_problem(knowns.A, knowns.B1, -np.eye(2), q1.R, [np.zeros((2, 2))])

    def test_singular_r(self, knowns, q1):
        """Test that R1 must be positive definite."""
        with pytest.raises(ConfigurationError, match="R1"):
            policy_problem(knowns.A, knowns.B1, q1.Q, np.zeros((1, 1)), [np.zeros((2, 2))])

    def test_one_lmi_per_vertex(self, knowns, q1, small_box):
        """Test that a box in two parameters yields four vertex policies."""
        problem = build_problem(knowns, q1.Q, q1.R, small_box)
        assert problem.n_vertices == 4
        for V in problem.vertex_policies:
            assert np.all(V[0] == 0.0)
        assert set(problem.to_dict()) == {"A", "B1", "Q1", "R1", "vertex_policies"}

    def test_vertex_cap(self, knowns, q1, small_box):
        """Test that more vertices than the cap is infeasible."""
        with pytest.raises(RobustInfeasibleError, match="above the cap"):
            build_problem(knowns, q1.Q, q1.R, small_box, max_vertices=3)

    def test_overflow_raises_by_default(self, knowns, q1, octagon):
        """Test that eight vertices over a cap of five is infeasible without a fallback."""
        with pytest.raises(RobustInfeasibleError, match="8 vertices, above the cap of 5"):
            build_problem(knowns, q1.Q, q1.R, octagon, max_vertices=5)

    def test_overflow_bounding_box(self, knowns, q1, octagon):
        """Test that the bounding-box fallback designs on four corners that enclose the octagon."""
        problem = build_problem(knowns, q1.Q, q1.R, octagon, max_vertices=5, overflow=VertexOverflow.BOUNDING_BOX)
        assert problem.n_vertices == 4
        corners = np.array([V[1] for V in problem.vertex_policies])
        assert corners.min(axis=0) == pytest.approx(THETA - 0.05)
        assert corners.max(axis=0) == pytest.approx(THETA + 0.05)
        sol = solve_robust_lqr(problem)
        for v in octagon.with_vertices().vrep_cache.vertices:
            V = matrix_from_params(v, knowns.param_mask)
            assert spectral_abscissa(knowns.A - V - knowns.B1 @ sol.K1) < 0

    def test_overflow_box_still_capped(self, knowns, q1, octagon):
        """Test that a bounding box with more corners than the cap still raises."""
        with pytest.raises(RobustInfeasibleError, match="4 vertices, above the cap of 3"):
            build_problem(knowns, q1.Q, q1.R, octagon, max_vertices=3, overflow=VertexOverflow.BOUNDING_BOX)

    def test_unbounded_omega(self, knowns, q1):
        """Test that an unbounded set cannot be designed against."""
        half_plane = OmegaSet(hrep=HPolytope(E=np.array([[1.0, 0.0]]), b=np.array([1.0])))
        with pytest.raises(RobustInfeasibleError, match="unbounded"):
            build_problem(knowns, q1.Q, q1.R, half_plane)


class TestLmiMatrix:
    """Test suite for the numeric stability LMI."""

    def test_symmetric(self, knowns):
        """Test that the evaluated LMI is symmetric."""
        W = np.array([[2.0, 0.3], [0.3, 1.0]])
        Y = np.array([[1.0, -2.0]])
        M = lmi_matrix(knowns.A, knowns.B1, np.zeros((2, 2)), W, Y)
        assert np.allclose(M, M.T)

    def test_identity_when_w_vanishes(self, knowns):
        """Test that W = 0 and Y = 0 leave the identity."""
        M = lmi_matrix(knowns.A, knowns.B1, np.ones((2, 2)), np.zeros((2, 2)), np.zeros((1, 2)))
        assert np.allclose(M, np.eye(2))


class TestSolveRobustLqr:
    """Test suite for the SDP solve."""

    def test_singleton_recovers_lqr(self, knowns, q1):
        """Test that one known policy gives the one-sided LQR gain."""
        V = matrix_from_params(THETA, knowns.param_mask)
        sol = solve_robust_lqr(policy_problem(knowns.A, knowns.B1, q1.Q, q1.R, [V]))
        lqr = solve_care(knowns.A - V, knowns.B1, q1.Q, q1.R).K
        assert sol.K1 == pytest.approx(lqr, rel=1e-3)

    def test_singleton_at_truth_matches_nash(self, knowns, q1):
        """Test that the learned gain at the true policy is the equilibrium gain."""
        V = matrix_from_params(THETA, knowns.param_mask)
        sol = solve_robust_lqr(policy_problem(knowns.A, knowns.B1, q1.Q, q1.R, [V]))
        assert sol.K1 == pytest.approx(np.array([[13.81, 12.05]]), abs=0.05)

    def test_box_gain_stabilizes_every_vertex(self, knowns, q1, small_box):
        """Test that the robust gain makes every vertex closed loop Hurwitz."""
        problem = build_problem(knowns, q1.Q, q1.R, small_box)
        sol = solve_robust_lqr(problem)
        for V in problem.vertex_policies:
            assert spectral_abscissa(knowns.A - V - knowns.B1 @ sol.K1) < 0
        assert np.all(np.linalg.eigvalsh(sol.Wc) > 0)

    def test_larger_set_costs_more(self, knowns, q1, small_box):
        """Test that the optimal cost grows with the uncertainty set."""
        wide = OmegaSet(hrep=HPolytope.box(THETA - 0.3, THETA + 0.3))
        narrow = solve_robust_lqr(build_problem(knowns, q1.Q, q1.R, small_box))
        broad = solve_robust_lqr(build_problem(knowns, q1.Q, q1.R, wide))
        assert broad.objective >= narrow.objective - 1e-6

    def test_kkt_gap_within_tolerance(self, knowns, q1, small_box):
        """Test a KKT gap of at most 1e-7 per unit objective on the small box."""
        sol = solve_robust_lqr(build_problem(knowns, q1.Q, q1.R, small_box))
        assert sol.kkt_ok
        assert sol.kkt_gap <= 1e-7 * max(1.0, abs(sol.objective))

    def test_kkt_miss_is_flagged(self, knowns, q1, small_box, caplog):
        """Test that a missed KKT tolerance is logged and recorded when not strict."""
        problem = build_problem(knowns, q1.Q, q1.R, small_box)
        sol = solve_robust_lqr(problem, kkt_tolerance=0.0, strict_kkt=False)
        assert not sol.kkt_ok
        assert "KKT gap" in caplog.text

    def test_kkt_miss_raises_when_strict(self, knowns, q1, small_box):
        """Test that strict mode turns a missed KKT tolerance into a numerical error."""
        problem = build_problem(knowns, q1.Q, q1.R, small_box)
        with pytest.raises(NumericalError, match="KKT gap .* exceeds"):
            solve_robust_lqr(problem, kkt_tolerance=0.0, strict_kkt=True)


class TestSolverOptions:
    """Test suite for the per-backend tolerance keywords."""

    def test_clarabel(self):
        """Test the Clarabel gap and feasibility keywords."""
        assert solver_options("CLARABEL", 1e-9) == {"tol_gap_abs": 1e-9, "tol_gap_rel": 1e-9, "tol_feas": 1e-9}

    def test_scs(self):
        """Test the SCS keywords, case-insensitive."""
        opts = solver_options("scs", 1e-8)
        assert opts["eps_abs"] == 1e-8
        assert opts["eps_rel"] == 1e-8

    def test_unknown_solver(self, caplog):
        """Test that an unmapped backend keeps its defaults with a warning."""
        assert solver_options("MOSEK", 1e-9) == {}
        assert "No tolerance mapping" in caplog.text


class TestVerifyQuadraticStability:
    """Test suite for the a-posteriori check."""

    def test_box_passes(self, knowns, q1, small_box):
        """Test that vertices and 100 convex combinations all pass."""
        problem = build_problem(knowns, q1.Q, q1.R, small_box)
        sol = solve_robust_lqr(problem)
        report = verify_quadratic_stability(sol, problem, n_combos=100)
        assert report.passed
        assert report.n_vertices == 4
        assert report.vertex_failures == []
        assert report.worst_combo_abscissa < 0

    def test_perturbed_gain_fails(self, knowns, q1):
        """Test that scaling the first gain entry breaks the certificate."""
        V = matrix_from_params(THETA, knowns.param_mask)
        problem = policy_problem(knowns.A, knowns.B1, q1.Q, q1.R, [V])
        sol = solve_robust_lqr(problem)
        K = sol.K1.copy()
        K[0, 0] *= 1.5
        report = verify_quadratic_stability(replace(sol, K1=K), problem, n_combos=10)
        assert not report.passed
        assert report.vertex_failures == [0]
        assert report.worst_vertex_lmi > 0

    def test_no_combos(self, knowns, q1, small_box):
        """Test that n_combos = 0 reports the vertex margins only."""
        problem = build_problem(knowns, q1.Q, q1.R, small_box)
        report = verify_quadratic_stability(solve_robust_lqr(problem), problem, n_combos=0)
        assert report.passed
        assert report.worst_combo_lmi == report.worst_vertex_lmi
