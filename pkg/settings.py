"""
Numerical settings loaded from the environment (or a local .env file).
"""

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class SolverSettings(BaseSettings):
    """Tolerances and thresholds shared by the solvers.

    Every field can be overridden with an environment variable carrying the
    MICROMORPHIC_ prefix, e.g. MICROMORPHIC_RTOL=1e-12.
    """

    model_config = SettingsConfigDict(env_prefix="MICROMORPHIC_", env_file=".env", extra="ignore", frozen=True)

    rtol: float = Field(1e-10, gt=0)
    max_iterations: int = Field(20000, gt=0)
    dense_threshold: int = Field(3000, ge=0)
    harmonic_tolerance: float = Field(1e-8, gt=0)
    harmonic_modes: int = Field(6, gt=0)
    chunk_size: int = Field(128, gt=0)
    log_level: str = "WARNING"


def get_settings(**overrides):
    """Build settings, letting explicit keyword overrides win over the environment."""
    return SolverSettings(**overrides)
