"""Unit tests for closed-loop simulation and sample collection."""
import numpy as np
import pytest
from scipy.linalg import expm

from robust_game.errors import DivergenceError, InputError
from robust_game.models import DisturbanceBox, GameModel, NashGroundTruth
from robust_game.sim import (
    adversary_input,
    collect_samples,
    lumped_box,
    lumped_disturbance,
    sample_disturbance,
    simulate,
)
from robust_game.utils.deviation_factory import ZeroSignal

K1_NASH = np.array([[13.81, 12.05]])


def _passive_model(A):
    A = np.atleast_2d(A)
    n = A.shape[0]
    return GameModel(A=A, B1=np.zeros((n, 1)), B2=np.zeros((n, 1)), param_mask=np.ones((n, n), bool))


def _passive_truth(n):
    return NashGroundTruth(K2_star=np.zeros((1, n)), u_tilde=ZeroSignal())


class TestAdversaryInput:
    """Test suite for the adversary's policy."""

    def test_deviation_at_origin(self, contact_truth):
        """Test that u2 = u_tilde(0) = 2 at the origin."""
        assert adversary_input(contact_truth, np.zeros(2), 0.0) == pytest.approx([2.0])

    def test_pure_equilibrium(self, quiet_truth):
        """Test that without deviation u2 = -K2* x."""
        assert adversary_input(quiet_truth, np.array([1.0, 0.0]), 3.0) == pytest.approx([-2.69])

    def test_deviation_vanishes(self, contact_truth):
        """Test that the deviation decays for large t."""
        assert adversary_input(contact_truth, np.array([1.0, 0.0]), 100.0)[0] == pytest.approx(-2.69, abs=1e-6)


class TestSampleDisturbance:
    """Test suite for uniform disturbance draws."""

    def test_draws_inside_box(self, rng):
        """Test that every draw respects |w_i| <= 0.5."""
        box = DisturbanceBox.from_bounds([0.5, 0.5])
        draws = np.array([sample_disturbance(box, rng) for _ in range(20000)])
        assert np.abs(draws).max() <= 0.5

    def test_zero_box(self, rng, zero_box):
        """Test that a zero box always draws zero."""
        assert np.array_equal(sample_disturbance(zero_box, rng), np.zeros(2))

    def test_mean_near_zero(self, rng):
        """Test that the empirical mean is within four standard errors of zero."""
        box = DisturbanceBox.from_bounds([0.5, 0.5])
        draws = np.array([sample_disturbance(box, rng) for _ in range(20000)])
        stderr = 0.5 / np.sqrt(3) / np.sqrt(len(draws))
        assert np.all(np.abs(draws.mean(axis=0)) < 4 * stderr)

    def test_reproducible(self):
        """Test that equal seeds give equal draws."""
        box = DisturbanceBox.from_bounds([0.5, 0.5])
        a = sample_disturbance(box, np.random.default_rng(7))
        b = sample_disturbance(box, np.random.default_rng(7))
        assert np.array_equal(a, b)


class TestSimulate:
    """Test suite for RK4 integration of the game."""

    def test_matches_matrix_exponential(self, rng):
        """Test a passive stable system against exp(A t) x0."""
        A = np.array([[-1.0, 2.0], [0.0, -3.0]])
        x0 = np.array([1.0, 1.0])
        traj = simulate(_passive_model(A), np.zeros((1, 2)), _passive_truth(2), DisturbanceBox.from_bounds([0.0, 0.0]),
                        x0, 0.0, 2.0, 1e-3, rng)
        for k in (0, 500, 1000, 2000):
            assert traj.states[k] == pytest.approx(expm(A * traj.times[k]) @ x0, abs=1e-6)

    def test_fourth_order_convergence(self, rng):
        """Test that halving the step cuts the error at t = 1 about sixteenfold."""
        A = np.array([[-1.0, 2.0], [0.0, -3.0]])
        x0 = np.array([1.0, 1.0])
        exact = expm(A) @ x0
        errors = []
        for dt in (0.1, 0.05):
            traj = simulate(_passive_model(A), np.zeros((1, 2)), _passive_truth(2),
                            DisturbanceBox.from_bounds([0.0, 0.0]), x0, 0.0, 1.0, dt, rng)
            errors.append(np.linalg.norm(traj.final_state - exact))
        assert 12.0 < errors[0] / errors[1] < 20.0

    def test_equilibrium_stays_put(self, contact_model, quiet_truth, zero_box, rng):
        """Test that x0 = 0 without disturbance stays at zero."""
        traj = simulate(contact_model, K1_NASH, quiet_truth, zero_box, np.zeros(2), 0.0, 1.0, 1e-3, rng)
        assert np.all(traj.states == 0.0)

    def test_nash_gains_regulate(self, contact_model, quiet_truth, zero_box, rng):
        """Test that equilibrium play drives x0 = [-3, 0] to the origin."""
        traj = simulate(contact_model, K1_NASH, quiet_truth, zero_box, np.array([-3.0, 0.0]), 0.0, 10.0, 1e-3, rng)
        assert len(traj) == 10001
        assert np.linalg.norm(traj.final_state) < 1e-2

    def test_records_inputs(self, contact_model, contact_truth, rng):
        """Test that recorded inputs follow both policies."""
        box = DisturbanceBox.from_bounds([0.5, 0.5])
        traj = simulate(contact_model, K1_NASH, contact_truth, box, np.array([-3.0, 0.0]), 0.0, 0.1, 1e-3, rng)
        k = 40
        assert traj.u1[k] == pytest.approx(-K1_NASH @ traj.states[k])
        assert traj.u2[k] == pytest.approx(adversary_input(contact_truth, traj.states[k], traj.times[k]))
        assert np.abs(traj.w).max() <= 0.5

    def test_initial_disturbance_carried(self, contact_model, contact_truth, rng):
        """Test that w_initial is used on the first row."""
        box = DisturbanceBox.from_bounds([0.5, 0.5])
        w0 = np.array([0.1, -0.2])
        traj = simulate(contact_model, K1_NASH, contact_truth, box, np.zeros(2), 0.3, 0.33, 1e-3, rng, w_initial=w0)
        assert np.array_equal(traj.w[0], w0)
        assert traj.times[0] == pytest.approx(0.3)
        assert traj.times[-1] == pytest.approx(0.33)

    def test_divergence_reports_time(self, rng):
        """Test that blow-up raises with the time it happened."""
        model = _passive_model(np.array([[50.0]]))
        with pytest.raises(DivergenceError, match="diverged") as exc_info:
            simulate(model, np.zeros((1, 1)), _passive_truth(1), DisturbanceBox.from_bounds([0.0]),
                     np.array([1.0]), 0.0, 1.0, 1e-3, rng)
        assert exc_info.value.blow_up_time == pytest.approx(np.log(1e12) / 50, abs=0.01)

    def test_bad_span(self, contact_model, quiet_truth, zero_box, rng):
        """Test that an empty time span is an input error."""
        with pytest.raises(InputError, match="t1 > t0"):
            simulate(contact_model, K1_NASH, quiet_truth, zero_box, np.zeros(2), 1.0, 1.0, 1e-3, rng)

    def test_deterministic(self, contact_model, contact_truth):
        """Test that equal seeds give identical trajectories."""
        box = DisturbanceBox.from_bounds([0.5, 0.5])
        runs = [
            simulate(contact_model, K1_NASH, contact_truth, box, np.array([-3.0, 0.0]), 0.0, 0.5, 1e-3,
                     np.random.default_rng(11))
            for _ in range(2)
        ]
        assert np.array_equal(runs[0].states, runs[1].states)
        assert np.array_equal(runs[0].w, runs[1].w)


class TestSamples:
    """Test suite for sample collection and the lumped disturbance."""

    def test_xdot_is_dynamics(self, contact_model, contact_truth, rng):
        """Test that xdot equals the right-hand side at the recorded signals."""
        box = DisturbanceBox.from_bounds([0.5, 0.5])
        traj = simulate(contact_model, K1_NASH, contact_truth, box, np.array([-3.0, 0.0]), 0.0, 0.03, 1e-3, rng)
        samples = collect_samples(traj, contact_model, contact_truth, [0.0, 0.01, 0.02])
        assert [s.t for s in samples] == pytest.approx([0.0, 0.01, 0.02])
        for s in samples:
            k = traj.index_of(s.t)
            expected = (contact_model.A @ traj.states[k] + contact_model.B1 @ traj.u1[k]
                        + contact_model.B2 @ traj.u2[k] + traj.w[k])
            assert s.xdot == pytest.approx(expected)

    def test_off_grid_sample(self, contact_model, contact_truth, rng):
        """Test that a sample time between grid points is rejected."""
        box = DisturbanceBox.from_bounds([0.5, 0.5])
        traj = simulate(contact_model, K1_NASH, contact_truth, box, np.zeros(2), 0.0, 0.03, 1e-3, rng)
        with pytest.raises(InputError, match="not on the integration grid"):
            collect_samples(traj, contact_model, contact_truth, [0.0105])

    def test_lumped_box_inflation(self, contact_model):
        """Test that the lumped bound adds |B2_i| times the envelope."""
        box = lumped_box(contact_model, [0.5, 0.5], envelope=2.0)
        assert box.per_axis_gamma == pytest.approx([0.5, 0.5 + 0.8 / 6 * 2.0])

    def test_lumped_box_override(self, contact_model):
        """Test that an explicit lumped bound wins."""
        box = lumped_box(contact_model, [0.5, 0.5], envelope=2.0, lumped_gamma=[1.0, 1.0])
        assert box.per_axis_gamma == pytest.approx([1.0, 1.0])

    def test_lumped_disturbance_inside_lumped_box(self, contact_model, contact_truth, rng):
        """Test that w + B2 u_tilde stays inside the inflated box."""
        box = DisturbanceBox.from_bounds([0.5, 0.5])
        traj = simulate(contact_model, K1_NASH, contact_truth, box, np.array([-3.0, 0.0]), 0.0, 2.0, 1e-3, rng)
        lumped = lumped_box(contact_model, [0.5, 0.5], envelope=2.0)
        w_tilde = lumped_disturbance(contact_model, contact_truth, traj)
        assert all(lumped.contains(w) for w in w_tilde)
