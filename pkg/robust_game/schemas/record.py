"""Pydantic schemas for experiment records and their JSON serialization."""
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from robust_game.schemas.scenario import ScenarioConfig

Matrix = list[list[float]]


class PolytopeRecord(BaseModel):
    """H- and V-representation of Omega at one iteration."""
    E: Matrix = Field(default_factory=list)
    b: list[float] = Field(default_factory=list)
    vertices: Matrix = Field(default_factory=list)
    degenerate: bool = False


class EllipsoidRecord(BaseModel):
    """Outer-bounding ellipsoid of one row of B2K2."""
    row: int
    center: list[float]
    S: Matrix
    sigma2: float = Field(..., ge=0)


class ExcitationRecord(BaseModel):
    """Excitation metric over the trailing sample window for one row."""
    row: int
    alpha1: float = Field(..., ge=0)
    alpha2: float = Field(..., ge=0)
    window: int


class VerificationRecord(BaseModel):
    """Post-hoc quadratic-stability check of a deployed gain."""
    passed: bool
    n_vertices: int
    n_combos: int
    worst_vertex_lmi: float
    worst_combo_lmi: float
    worst_vertex_abscissa: float
    worst_combo_abscissa: float
    vertex_failures: list[int] = Field(default_factory=list)


class EpsilonCertificate(BaseModel):
    """
    Certificate that the learned gain is an epsilon-Nash strategy.
    All quantities are nonnegative.
    """
    gamma: float = Field(..., ge=0, description="Disturbance bound used")
    lambda_max_S: float = Field(..., ge=0, description="Largest eigenvalue of the terminal shape matrices")
    l_max: float = Field(..., ge=0, description="Longest ellipsoid axis bound")
    dA1_bound: float = Field(..., ge=0, description="Bound on the policy perturbation norm")
    delta: float = Field(..., ge=0, description="Gain deviation bound")
    trace_P1: float = Field(..., ge=0)
    epsilon: float = Field(..., ge=0)
    delta_method: str = "vertex-resolve"
    n_perturbations: int = 0
    K1_center: Matrix = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_axis_bound(self):
        """The longest axis cannot exceed gamma sqrt(lambda_max)."""
        if self.l_max > self.gamma * self.lambda_max_S**0.5 * (1 + 1e-12) + 1e-15:
            raise ValueError("l_max exceeds gamma * sqrt(lambda_max_S)")
        return self


class IterationRecord(BaseModel):
    """State of the learning loop after one update interval."""
    iteration: int = Field(..., ge=0)
    time: float
    K1: Matrix
    volume: float = Field(..., ge=0)
    volume_raw: float = Field(0.0, ge=0)
    volume_stderr: float = Field(0.0, ge=0)
    n_vertices: int
    n_constraints: int
    n_samples: int
    objective: float
    solver_status: str
    kkt_gap: float
    kkt_ok: bool = True
    omega_changed: bool
    cut_removed: int = 0
    cut_created: int = 0
    polytope: PolytopeRecord
    ellipsoids: list[EllipsoidRecord] = Field(default_factory=list)
    excitation: list[ExcitationRecord] = Field(default_factory=list)
    verification: Optional[VerificationRecord] = None


class TrajectoryRecord(BaseModel):
    """Recorded closed-loop signals, row k at times[k]."""
    times: list[float] = Field(default_factory=list)
    states: Matrix = Field(default_factory=list)
    u1: Matrix = Field(default_factory=list)
    u2: Matrix = Field(default_factory=list)
    w: Matrix = Field(default_factory=list)


class TerminalRecord(BaseModel):
    """Final gain, equilibrium reference and certificate."""
    K1_final: Matrix
    K1_star: Matrix
    K2_star: Matrix
    gap_inf: float = Field(..., ge=0, description="max |K1_final - K1_star|")
    stop_reason: str
    theta_true: list[float] = Field(default_factory=list)
    theta_in_omega: bool = True
    running_cost: Optional[float] = Field(None, ge=0, description="Player 1 cost over the first horizon seconds of learning")
    certificate: Optional[EpsilonCertificate] = None


class ExperimentRecord(BaseModel):
    """
    Full record of one learning run.
    Iterations are contiguous from 0 and volumes never increase.
    """
    scenario: str = "scenario"
    seed: int = 0
    config: Optional[ScenarioConfig] = None
    iterations: list[IterationRecord] = Field(default_factory=list)
    terminal: Optional[TerminalRecord] = None
    trajectory: Optional[TrajectoryRecord] = None

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "scenario": "contact_robot",
                "seed": 0,
                "iterations": [],
            }
        }
    )

    @model_validator(mode="after")
    def validate_iterations(self):
        """Iterations are numbered 0, 1, ... and the volume sequence is nonincreasing."""
        for k, it in enumerate(self.iterations):
            if it.iteration != k:
                raise ValueError(f"Iteration {k} is numbered {it.iteration}")
        volumes = [it.volume for it in self.iterations]
        for prev, cur in zip(volumes, volumes[1:]):
            if cur > prev * (1 + 1e-9) + 1e-12:
                raise ValueError("Volume sequence increases")
        return self


class ComparisonRecord(BaseModel):
    """Robust-set versus least-squares gains evaluated on every vertex of Omega."""
    scenario: str = "scenario"
    seed: int = 0
    n_samples: int
    theta_true: list[float]
    ls_estimate: list[float]
    ls_inside_omega: bool
    vertices: Matrix
    robust_gain: Matrix
    ls_gain: Matrix
    robust_abscissa: list[float]
    ls_abscissa: list[float]
    robust_all_stable: bool
    ls_all_stable: bool
    trace_times: list[float] = Field(default_factory=list)
    robust_traces: Matrix = Field(default_factory=list, description="x1(t) per vertex under the robust gain")
    ls_traces: Matrix = Field(default_factory=list, description="x1(t) per vertex under the LS gain")
