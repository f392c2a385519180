"""Runtime settings loaded from the environment and an optional .env file."""
from functools import lru_cache
from pathlib import Path

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables
load_dotenv()


class Settings(BaseSettings):
    """
    Process-wide settings.

    Every field can be overridden with an environment variable prefixed
    with ``ROBUST_GAME_`` (e.g. ``ROBUST_GAME_SDP_SOLVER=SCS``).
    """

    log_level: str = Field("INFO", description="Root logging level")
    sdp_solver: str = Field("CLARABEL", description="cvxpy solver used for the robust LQR program")
    sdp_tolerance: float = Field(1e-9, gt=0, description="Gap and feasibility tolerance passed to the SDP solver")
    kkt_tolerance: float = Field(1e-7, gt=0, description="Largest accepted complementary-slackness sum per unit objective")
    strict_kkt: bool = Field(False, description="Raise instead of warning when the KKT gap exceeds kkt_tolerance")
    output_dir: Path = Field(Path("results"), description="Default directory for experiment exports")
    lp_tolerance: float = Field(1e-9, gt=0, description="Absolute tolerance of LP redundancy tests")
    vertex_merge_tol: float = Field(1e-9, gt=0, description="Vertices closer than this are merged")
    rank_tolerance: float = Field(1e-8, gt=0, description="Relative singular-value cutoff for rank tests")

    model_config = SettingsConfigDict(env_prefix="ROBUST_GAME_", extra="ignore")


@lru_cache
def get_settings() -> Settings:
    """Return the cached settings instance."""
    return Settings()
