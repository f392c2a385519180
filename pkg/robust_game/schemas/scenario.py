"""Pydantic schemas for scenario configuration files."""
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from robust_game.errors import ConfigurationError

Matrix = list[list[float]]


class DeviationType(str, Enum):
    """Enumeration for the adversary's deviation signal shapes."""
    COSINE_DECAY = "cosine_decay"
    ZERO = "zero"


class ObeWeight(str, Enum):
    """Weight selection rule of the outer-bounding-ellipsoid recursion."""
    SIGMA = "sigma"
    VOLUME = "volume"


class Omega0Mode(str, Enum):
    """How the initial unfalsified set is specified."""
    BOX = "box"
    RELATIVE = "relative"


class VertexOverflow(str, Enum):
    """What the design step does when Omega has more vertices than allowed."""
    RAISE = "raise"
    BOUNDING_BOX = "bounding_box"


class DeviationConfig(BaseModel):
    """Parametric deviation signal amplitude * cos(omega t) * exp(-decay t)."""
    kind: DeviationType = Field(DeviationType.COSINE_DECAY, description="Signal shape")
    amplitude: float = Field(0.0, description="Peak amplitude")
    omega: float = Field(0.0, description="Angular frequency in rad/s")
    decay: float = Field(0.0, ge=0, description="Exponential decay rate in 1/s")


class DisturbanceConfig(BaseModel):
    """Exogenous disturbance bounds and the lumped bound used for identification."""
    gamma: list[float] = Field(..., description="Per-axis bound of the exogenous uniform noise")
    envelope: Optional[float] = Field(None, ge=0, description="Bound on |u_tilde(t)|; defaults to |amplitude|")
    lumped_gamma: Optional[list[float]] = Field(None, description="Explicit per-axis lumped disturbance bound")

    @field_validator("gamma")
    @classmethod
    def validate_gamma(cls, v):
        """Exogenous bounds must be nonnegative."""
        if any(g < 0 for g in v):
            raise ValueError("Disturbance bounds must be nonnegative")
        return v

    @field_validator("lumped_gamma")
    @classmethod
    def validate_lumped(cls, v):
        """Lumped bounds must be strictly positive."""
        if v is not None and any(g <= 0 for g in v):
            raise ValueError("Lumped disturbance bounds must be positive")
        return v


class Omega0Config(BaseModel):
    """Initial conservative set of adversary policies."""
    mode: Omega0Mode = Omega0Mode.BOX
    lower: Optional[list[float]] = Field(None, description="Lower bound per masked entry (box mode)")
    upper: Optional[list[float]] = Field(None, description="Upper bound per masked entry (box mode)")

    @model_validator(mode="after")
    def validate_bounds(self):
        """Box mode needs ordered bounds of equal length."""
        if self.mode == Omega0Mode.BOX:
            if self.lower is None or self.upper is None:
                raise ValueError("Box mode requires lower and upper bounds")
            if len(self.lower) != len(self.upper):
                raise ValueError("Lower and upper bounds differ in length")
            if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
                raise ValueError("Each lower bound must be below its upper bound")
        return self


class ScenarioConfig(BaseModel):
    """
    Schema for a game scenario.
    Matrices are row-major nested arrays.
    """
    name: str = Field("scenario", description="Scenario label used in exports")
    A: Matrix
    B1: Matrix
    B2: Matrix
    Q1: Matrix
    R1: Matrix
    Q2: Matrix
    R2: Matrix
    K2_star: Optional[Matrix] = Field(None, description="Adversary equilibrium gain; solved from the CAREs if absent")
    u_tilde: DeviationConfig = Field(default_factory=DeviationConfig)
    disturbance: DisturbanceConfig
    param_mask: list[list[bool]]
    x0: list[float]
    T_update: float = Field(..., gt=0, description="Learning interval in seconds")
    dt_sample: float = Field(..., gt=0, description="Sampling period in seconds")
    dt_integrate: float = Field(..., gt=0, description="RK4 step in seconds")
    horizon: float = Field(10.0, gt=0, description="Truncation horizon for costs and response traces")
    seed: int = Field(0, ge=0)
    omega0: Omega0Config
    max_iterations: int = Field(60, ge=0)
    stop_tol: float = Field(1e-3, gt=0)
    stop_patience: int = Field(5, ge=1, description="Intervals with a changed Omega and a gain step below stop_tol")
    plateau_patience: Optional[int] = Field(None, ge=1, description="Stop after this many intervals without a cut")
    max_vertices: int = Field(512, ge=1)
    vertex_overflow: VertexOverflow = VertexOverflow.RAISE
    volume_samples: int = Field(1_000_000, ge=1000)
    obe_weight: ObeWeight = ObeWeight.SIGMA
    excitation_window: int = Field(30, ge=1)

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "name": "contact_robot",
                "A": [[0.0, 1.0], [0.0, 0.0333]],
                "B1": [[0.0], [0.1667]],
                "param_mask": [[False, False], [True, True]],
                "T_update": 0.03,
                "dt_sample": 0.01,
                "dt_integrate": 0.001,
            }
        }
    )

    @model_validator(mode="after")
    def validate_dimensions(self):
        """Validate that every matrix agrees with the state dimension."""
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        nx = A.shape[0]
        for name in ("B1", "B2"):
            if np.asarray(getattr(self, name)).shape[0] != nx:
                raise ValueError(f"{name} must have {nx} rows")
        nu1 = np.asarray(self.B1).shape[1]
        nu2 = np.asarray(self.B2).shape[1]
        for name, size in (("Q1", nx), ("Q2", nx), ("R1", nu1), ("R2", nu2)):
            if np.asarray(getattr(self, name)).shape != (size, size):
                raise ValueError(f"{name} must be {size}x{size}")
        if self.K2_star is not None and np.asarray(self.K2_star).shape != (nu2, nx):
            raise ValueError(f"K2_star must be {nu2}x{nx}")
        if np.asarray(self.param_mask).shape != (nx, nx):
            raise ValueError(f"param_mask must be {nx}x{nx}")
        if len(self.x0) != nx or len(self.disturbance.gamma) != nx:
            raise ValueError("x0 and disturbance.gamma must have length nx")
        if self.disturbance.lumped_gamma is not None and len(self.disturbance.lumped_gamma) != nx:
            raise ValueError("disturbance.lumped_gamma must have length nx")
        n_params = int(np.count_nonzero(self.param_mask))
        if self.omega0.mode == Omega0Mode.BOX and len(self.omega0.lower) != n_params:
            raise ValueError(f"omega0 needs one bound pair per masked entry ({n_params})")
        return self

    @model_validator(mode="after")
    def validate_timing(self):
        """The sampling grid must sit on the integration grid."""
        if not _is_multiple(self.T_update, self.dt_sample):
            raise ValueError("T_update must be a multiple of dt_sample")
        if not _is_multiple(self.dt_sample, self.dt_integrate):
            raise ValueError("dt_sample must be a multiple of dt_integrate")
        return self

    @property
    def samples_per_update(self) -> int:
        return int(round(self.T_update / self.dt_sample))


def _is_multiple(value: float, step: float) -> bool:
    ratio = value / step
    return ratio >= 1 - 1e-9 and abs(ratio - round(ratio)) < 1e-6


def load_scenario(path: Path | str) -> ScenarioConfig:
    """
    Read and validate a scenario file.

    Raises:
        ConfigurationError: If the file is missing or fails validation
    """
    path = Path(path)
    try:
        return ScenarioConfig.model_validate_json(path.read_text())
    except FileNotFoundError as e:
        raise ConfigurationError(f"Scenario file not found: {path}") from e
    except ValidationError as e:
        raise ConfigurationError(f"Invalid scenario {path}: {e}") from e
