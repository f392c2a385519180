"""
End-to-end experiments: the learning loop, the least-squares comparison and seed sweeps.

Every experiment owns its random generator, so a config and a seed fully
determine the resulting record.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import expm

from robust_game.epsilon_cert import certify
from robust_game.errors import CertificateError, ConfigurationError, RobustGameError
from robust_game.estimator import (
    Ellipsoid,
    OmegaSet,
    constraints_from_sample,
    excitation_metric,
    initial_ellipsoids,
    least_squares_estimate,
    obe_update_rows,
    update_omega,
)
from robust_game.models import (
    CostWeights,
    DisturbanceBox,
    GameModel,
    NashGroundTruth,
    Trajectory,
    evaluate_cost,
    validate_model,
)
from robust_game.polytope import HPolytope, cut_report, volume_with_error
from robust_game.riccati import NashSolution, solve_coupled_care
from robust_game.robust_design import (
    RobustLqrProblem,
    SdpSolution,
    build_problem,
    policy_problem,
    solve_robust_lqr,
    verify_quadratic_stability,
)
from robust_game.schemas.record import (
    ComparisonRecord,
    EpsilonCertificate,
    EllipsoidRecord,
    ExcitationRecord,
    ExperimentRecord,
    IterationRecord,
    PolytopeRecord,
    TerminalRecord,
    TrajectoryRecord,
)
from robust_game.schemas.scenario import Omega0Mode, ScenarioConfig
from robust_game.sim import collect_samples, lumped_box, lumped_disturbance, simulate
from robust_game.utils import matrix_from_params, spectral_abscissa
from robust_game.utils.deviation_factory import DeviationFactory

logger = logging.getLogger(__name__)

VERIFY_COMBOS = 50
TRACE_CLIP = 1e6


@dataclass(frozen=True)
class Scenario:
    """Everything derived from a scenario config before the first sample."""

    config: ScenarioConfig
    model: GameModel
    q1: CostWeights
    q2: CostWeights
    truth: NashGroundTruth
    nash: NashSolution
    exogenous: DisturbanceBox
    lumped: DisturbanceBox
    omega0: OmegaSet
    omega0_lower: np.ndarray
    omega0_upper: np.ndarray
    x0: np.ndarray
    theta_true: np.ndarray


def nash_for_config(config: ScenarioConfig) -> NashSolution:
    """Coupled-CARE equilibrium of the scenario's game."""
    return solve_coupled_care(config.A, config.B1, config.B2, config.Q1, config.Q2, config.R1, config.R2)


def build_scenario(config: ScenarioConfig) -> Scenario:
    """
    Assemble the model, ground truth, disturbance sets and initial Omega.

    Raises:
        ConfigurationError: If the mask hides part of the true policy
        AssumptionViolationError: If neither player's triple is stabilizable-detectable
    """
    model = GameModel(A=config.A, B1=config.B1, B2=config.B2, param_mask=config.param_mask)
    q1 = CostWeights(Q=config.Q1, R=config.R1, owner=1)
    q2 = CostWeights(Q=config.Q2, R=config.R2, owner=2)
    validate_model(model, q1, q2)

    nash = nash_for_config(config)
    K2_star = np.asarray(config.K2_star, dtype=float) if config.K2_star is not None else nash.K2_star
    model.check_mask(K2_star)
    signal = DeviationFactory.create_signal(config.u_tilde, nu2=model.nu2)
    truth = NashGroundTruth(K2_star=K2_star, u_tilde=signal)

    envelope = config.disturbance.envelope if config.disturbance.envelope is not None else signal.envelope()
    exogenous = DisturbanceBox.from_bounds(config.disturbance.gamma)
    lumped = lumped_box(model, config.disturbance.gamma, envelope, config.disturbance.lumped_gamma)
    if not lumped.is_positive:
        raise ConfigurationError("The identification box needs a positive bound on every axis; set lumped_gamma")

    theta_true = model.policy_params(K2_star)
    if config.omega0.mode == Omega0Mode.BOX:
        lower = np.asarray(config.omega0.lower, dtype=float)
        upper = np.asarray(config.omega0.upper, dtype=float)
    else:
        lower = np.minimum(0.0, 2.0 * theta_true)
        upper = np.maximum(0.0, 2.0 * theta_true)
        pad = max(1e-3, 0.1 * float(np.abs(theta_true).max()))
        flat = upper - lower < 1e-9
        lower[flat] -= pad
        upper[flat] += pad

    return Scenario(
        config=config,
        model=model,
        q1=q1,
        q2=q2,
        truth=truth,
        nash=nash,
        exogenous=exogenous,
        lumped=lumped,
        omega0=OmegaSet(hrep=HPolytope.box(lower, upper)),
        omega0_lower=lower,
        omega0_upper=upper,
        x0=np.asarray(config.x0, dtype=float),
        theta_true=theta_true,
    )


def _omega_volume(omega: OmegaSet, n_samples: int) -> tuple[float, float]:
    if omega.hrep.p <= 2:
        return volume_with_error(omega.vrep_cache)
    return volume_with_error(omega.hrep, n_samples=n_samples, seed=0)


def _ellipsoid_records(ellipsoids: dict[int, Ellipsoid]) -> list[EllipsoidRecord]:
    return [
        EllipsoidRecord(row=row, center=e.center.tolist(), S=e.S.tolist(), sigma2=e.sigma2)
        for row, e in sorted(ellipsoids.items())
    ]


def _iteration_record(j: int, t: float, K1: np.ndarray, omega: OmegaSet, sol: SdpSolution, problem: RobustLqrProblem,
                      volume: tuple[float, float, float], n_samples: int, changed: bool, cut: tuple[int, int],
                      ellipsoids: dict[int, Ellipsoid], excitation: list[ExcitationRecord],
                      max_vertices: int) -> IterationRecord:
    vol, raw, stderr = volume
    vrep = omega.vrep_cache
    # Vertex lists above the design cap are left out of the record.
    vertices = vrep.vertices.tolist() if vrep.n_v <= max_vertices else []
    return IterationRecord(
        iteration=j,
        time=t,
        K1=K1.tolist(),
        volume=vol,
        volume_raw=raw,
        volume_stderr=stderr,
        n_vertices=vrep.n_v,
        n_constraints=omega.hrep.m,
        n_samples=n_samples,
        objective=sol.objective,
        solver_status=sol.status,
        kkt_gap=sol.kkt_gap,
        kkt_ok=sol.kkt_ok,
        omega_changed=changed,
        cut_removed=cut[0],
        cut_created=cut[1],
        polytope=PolytopeRecord(
            E=omega.hrep.E.tolist(),
            b=omega.hrep.b.tolist(),
            vertices=vertices,
            degenerate=vrep.degenerate,
        ),
        ellipsoids=_ellipsoid_records(ellipsoids),
        excitation=excitation,
        verification=verify_quadratic_stability(sol, problem, n_combos=VERIFY_COMBOS),
    )


def _certifiable(omega: OmegaSet, config: ScenarioConfig) -> Optional[OmegaSet]:
    """Omega for the vertex-resolve bound, or None to fall back to the ellipsoid bound above the cap."""
    omega = omega.with_vertices()
    if omega.vrep_cache.n_v > config.max_vertices:
        logger.info("Certifying from the ellipsoids: Omega has %d vertices", omega.vrep_cache.n_v)
        return None
    return omega


def _running_cost(segments: list[Trajectory], gains: list[np.ndarray], weights: CostWeights,
                  horizon: float) -> Optional[float]:
    """Player 1's cost over the first `horizon` seconds of learning, each segment under its own gain."""
    if not segments:
        return None
    total = 0.0
    for traj, K1 in zip(segments, gains):
        part = traj.until(horizon)
        if part.is_empty:
            break
        total += evaluate_cost(part, weights, K1).value
    return total


def _trajectory_record(parts: list[Trajectory]) -> Optional[TrajectoryRecord]:
    if not parts:
        return None
    traj = Trajectory.concatenate(parts)
    return TrajectoryRecord(
        times=traj.times.tolist(),
        states=traj.states.tolist(),
        u1=traj.u1.tolist(),
        u2=traj.u2.tolist(),
        w=traj.w.tolist(),
    )


def run_algorithm1(config: ScenarioConfig, seed: Optional[int] = None,
                   max_iterations: Optional[int] = None) -> ExperimentRecord:
    """
    Learn a robust gain online.

    Starts from the robust design on Omega0, then per update interval:
    simulate under the current gain, collect samples, shrink Omega and
    redesign when Omega changed. Stops after max_iterations, once the
    gain has moved less than stop_tol over stop_patience intervals that
    cut Omega ("converged"), or after plateau_patience intervals without
    a cut ("plateau").

    Raises:
        FalsificationError, RobustInfeasibleError, DivergenceError: Propagated with the iteration logged
    """
    seed = config.seed if seed is None else seed
    max_iterations = config.max_iterations if max_iterations is None else max_iterations
    sc = build_scenario(config)
    rng = np.random.default_rng(seed)
    model, knowns = sc.model, sc.model.knowns()
    Q1, R1 = sc.q1.Q, sc.q1.R
    gamma = sc.lumped.per_axis_gamma

    omega = sc.omega0.with_vertices()
    problem = build_problem(knowns, Q1, R1, omega, max_vertices=config.max_vertices,
                            overflow=config.vertex_overflow)
    sol = solve_robust_lqr(problem)
    K1 = sol.K1
    ellipsoids = initial_ellipsoids(sc.omega0_lower, sc.omega0_upper, model.param_mask, gamma)
    vol, stderr = _omega_volume(omega, config.volume_samples)
    volume = (vol, vol, stderr)

    iterations = [
        _iteration_record(0, 0.0, K1, omega, sol, problem, volume, 0, True, (0, 0), ellipsoids, [], config.max_vertices)
    ]
    logger.info("Iteration 0: %d vertices, volume %.4g, K1=%s", omega.vrep_cache.n_v, vol, np.round(K1, 3).tolist())

    t, x, w_carry = 0.0, sc.x0, None
    segments: list[Trajectory] = []
    segment_gains: list[np.ndarray] = []
    window_samples, window_w = [], []
    n_total = 0
    streak = stale = 0
    stop_reason = "max_iterations"
    n_per = config.samples_per_update

    for j in range(1, max_iterations + 1):
        try:
            t_next = t + config.T_update
            traj = simulate(model, K1, sc.truth, sc.exogenous, x, t, t_next, config.dt_integrate, rng,
                            w_initial=w_carry)
            segments.append(traj)
            segment_gains.append(K1)
            samples = collect_samples(traj, model, sc.truth, t + config.dt_sample * np.arange(n_per))
            w_lumped = lumped_disturbance(model, sc.truth, traj)
            batch = [constraints_from_sample(s, knowns, sc.lumped) for s in samples]
            new_omega = update_omega(omega, batch, start_index=n_total)
            for k, s in enumerate(samples):
                ellipsoids = obe_update_rows(ellipsoids, s, knowns, gamma, config.obe_weight, sample_index=n_total + k)
                window_samples.append(s)
                window_w.append(w_lumped[traj.index_of(s.t)])
                if not sc.lumped.contains(window_w[-1]):
                    logger.warning("Sample at t=%.4g: lumped disturbance leaves the identification box", s.t)
            n_total += len(samples)
            window_samples = window_samples[-config.excitation_window:]
            window_w = window_w[-config.excitation_window:]

            changed = new_omega.hrep is not omega.hrep
            cut = (0, 0)
            if changed:
                new_omega = new_omega.with_vertices()
                report = cut_report(omega.vrep_cache, new_omega.vrep_cache)
                cut = (len(report.removed), len(report.created))
                logger.debug("Iteration %d cut: %d removed, %d created, %d kept", j, *cut, len(report.kept))
                problem = build_problem(knowns, Q1, R1, new_omega, max_vertices=config.max_vertices,
                                        overflow=config.vertex_overflow)
                sol = solve_robust_lqr(problem)
                vol_raw, stderr = _omega_volume(new_omega, config.volume_samples)
                volume = (min(vol_raw, volume[0]), vol_raw, stderr)
            K1_new = sol.K1
        except RobustGameError as e:
            logger.error("Iteration %d failed: %s", j, e)
            raise

        excitation = []
        for row in sorted(ellipsoids):
            rep = excitation_metric(window_samples, np.vstack(window_w), row)
            if not rep.persistent:
                logger.warning("Iteration %d: row %d window is not persistently exciting", j, row)
            excitation.append(ExcitationRecord(row=row, alpha1=rep.alpha1, alpha2=rep.alpha2, window=rep.window))

        iterations.append(
            _iteration_record(j, t_next, K1_new, new_omega, sol, problem, volume, n_total, changed, cut,
                              ellipsoids, excitation, config.max_vertices)
        )
        change = float(np.abs(K1_new - K1).max())
        logger.info(
            "Iteration %d: %d constraints, %d vertices, volume %.4g, K1=%s, objective %.5g",
            j, new_omega.hrep.m, new_omega.vrep_cache.n_v, volume[0], np.round(K1_new, 3).tolist(), sol.objective,
        )

        K1, omega = K1_new, new_omega
        x, w_carry, t = traj.final_state, traj.w[-1], t_next
        # Only intervals that cut Omega count toward convergence.
        if changed:
            streak = streak + 1 if change < config.stop_tol else 0
            stale = 0
        else:
            stale += 1
        if streak >= config.stop_patience:
            stop_reason = "converged"
            break
        if config.plateau_patience is not None and stale >= config.plateau_patience:
            logger.info("Omega unchanged for %d intervals; stopping on a plateau", stale)
            stop_reason = "plateau"
            break

    K1_star = sc.nash.K1_star
    certificate = None
    try:
        certificate = certify(knowns, Q1, R1, ellipsoids, gamma, K1_star, sc.x0, _certifiable(omega, config))
    except CertificateError as e:
        logger.warning("No epsilon certificate: %s", e)

    terminal = TerminalRecord(
        K1_final=K1.tolist(),
        K1_star=K1_star.tolist(),
        K2_star=sc.truth.K2_star.tolist(),
        gap_inf=float(np.abs(K1 - K1_star).max()),
        stop_reason=stop_reason,
        theta_true=sc.theta_true.tolist(),
        theta_in_omega=bool(omega.hrep.contains(sc.theta_true, tol=1e-7)),
        running_cost=_running_cost(segments, segment_gains, sc.q1, config.horizon),
        certificate=certificate,
    )
    return ExperimentRecord(
        scenario=config.name,
        seed=seed,
        config=config,
        iterations=iterations,
        terminal=terminal,
        trajectory=_trajectory_record(segments),
    )


def _x1_trace(A_cl: np.ndarray, x0: np.ndarray, dt: float, n: int) -> list[float]:
    step = expm(A_cl * dt)
    x = x0.copy()
    trace = []
    for _ in range(n):
        trace.append(float(np.clip(x[0], -TRACE_CLIP, TRACE_CLIP)))
        x = step @ x
        if np.linalg.norm(x) > TRACE_CLIP:
            x = x / np.linalg.norm(x) * TRACE_CLIP
    return trace


def run_ls_comparison(config: ScenarioConfig, n_samples: int = 9, seed: Optional[int] = None) -> ComparisonRecord:
    """
    Robust-set gain versus least-squares gain from the same data batch.

    Both gains come from the same program: the robust one over every vertex
    of Omega, the nominal one over the single LS point. Each is then checked
    against every vertex policy.

    Raises:
        EstimationError: If the LS regressor is rank deficient
    """
    seed = config.seed if seed is None else seed
    sc = build_scenario(config)
    rng = np.random.default_rng(seed)
    knowns = sc.model.knowns()
    Q1, R1 = sc.q1.Q, sc.q1.R
    A, B1 = knowns.A, knowns.B1

    omega0 = sc.omega0.with_vertices()
    K1_0 = solve_robust_lqr(build_problem(knowns, Q1, R1, omega0, max_vertices=config.max_vertices,
                                          overflow=config.vertex_overflow)).K1
    traj = simulate(sc.model, K1_0, sc.truth, sc.exogenous, sc.x0, 0.0, n_samples * config.dt_sample,
                    config.dt_integrate, rng)
    samples = collect_samples(traj, sc.model, sc.truth, config.dt_sample * np.arange(n_samples))
    batch = [constraints_from_sample(s, knowns, sc.lumped) for s in samples]
    omega = update_omega(omega0, batch).with_vertices()

    robust_problem = build_problem(knowns, Q1, R1, omega, max_vertices=config.max_vertices,
                                   overflow=config.vertex_overflow)
    K_rob = solve_robust_lqr(robust_problem).K1
    theta_ls = least_squares_estimate(samples, knowns)
    ls_problem = policy_problem(A, B1, Q1, R1, [matrix_from_params(theta_ls, knowns.param_mask)])
    K_ls = solve_robust_lqr(ls_problem).K1

    policies = robust_problem.vertex_policies
    robust_abscissa = [spectral_abscissa(A - V - B1 @ K_rob) for V in policies]
    ls_abscissa = [spectral_abscissa(A - V - B1 @ K_ls) for V in policies]
    n_trace = int(round(config.horizon / config.dt_sample)) + 1
    trace_times = (config.dt_sample * np.arange(n_trace)).tolist()
    logger.info(
        "Comparison seed %d: %d vertices, robust worst abscissa %.4g, LS worst abscissa %.4g",
        seed, len(policies), max(robust_abscissa), max(ls_abscissa),
    )

    return ComparisonRecord(
        scenario=config.name,
        seed=seed,
        n_samples=n_samples,
        theta_true=sc.theta_true.tolist(),
        ls_estimate=theta_ls.tolist(),
        ls_inside_omega=bool(omega.hrep.contains(theta_ls, tol=1e-7)),
        vertices=omega.vrep_cache.vertices.tolist(),
        robust_gain=K_rob.tolist(),
        ls_gain=K_ls.tolist(),
        robust_abscissa=robust_abscissa,
        ls_abscissa=ls_abscissa,
        robust_all_stable=max(robust_abscissa) < 0,
        ls_all_stable=max(ls_abscissa) < 0,
        trace_times=trace_times,
        robust_traces=[_x1_trace(A - V - B1 @ K_rob, sc.x0, config.dt_sample, n_trace) for V in policies],
        ls_traces=[_x1_trace(A - V - B1 @ K_ls, sc.x0, config.dt_sample, n_trace) for V in policies],
    )


def _sweep_job(args) -> Union[ExperimentRecord, ComparisonRecord]:
    config, seed, n_samples = args
    if n_samples is None:
        return run_algorithm1(config, seed=seed)
    return run_ls_comparison(config, n_samples=n_samples, seed=seed)


def run_seed_sweep(config: ScenarioConfig, seeds: Sequence[int], n_samples: Optional[int] = None,
                   max_workers: Optional[int] = None) -> list[Union[ExperimentRecord, ComparisonRecord]]:
    """
    Independent experiments, one per seed, in a process pool.

    With n_samples set each job is an LS comparison, otherwise a learning run.
    """
    jobs = [(config, int(s), n_samples) for s in seeds]
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(_sweep_job, jobs))


def certify_record(record: ExperimentRecord) -> EpsilonCertificate:
    """
    Recompute the epsilon certificate from a saved record's last iteration.

    Raises:
        ConfigurationError: If the record has no config or no iterations
        CertificateError: If the certificate cannot be formed
    """
    if record.config is None or not record.iterations:
        raise ConfigurationError("Record needs a config snapshot and at least one iteration")
    config = record.config
    last = record.iterations[-1]
    sc = build_scenario(config)
    ellipsoids = {
        e.row: Ellipsoid(center=np.asarray(e.center), S=np.asarray(e.S), sigma2=e.sigma2, row=e.row)
        for e in last.ellipsoids
    }
    omega = OmegaSet(hrep=HPolytope(E=np.asarray(last.polytope.E), b=np.asarray(last.polytope.b)))
    K1_star = np.asarray(record.terminal.K1_star) if record.terminal is not None else sc.nash.K1_star
    return certify(sc.model.knowns(), sc.q1.Q, sc.q1.R, ellipsoids, sc.lumped.per_axis_gamma, K1_star, sc.x0,
                   _certifiable(omega, config))
