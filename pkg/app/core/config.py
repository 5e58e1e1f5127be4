"""
Runtime settings for the pseudomode toolkit.
"""

from functools import lru_cache

from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.core.exceptions import ConfigError


class Settings(BaseSettings):
    """Ambient settings, read from PSEUDOMODE_* environment variables or .env."""

    model_config = SettingsConfigDict(
        env_prefix="PSEUDOMODE_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore"
    )

    # Logging
    log_level: str = Field("INFO")

    # Operator assembly / dense spectra (Hilbert-space dimension M)
    dense_dimension_limit: int = Field(4096, gt=0)
    dense_eigen_limit: int = Field(64, gt=0)

    # Integrator
    ode_rtol: float = Field(1e-10, gt=0)
    ode_atol: float = Field(1e-12, gt=0)
    leakage_threshold: float = Field(1e-6, gt=0)

    # Exceptional points
    lep_tolerance: float = Field(1e-12, gt=0)

    # Sweeps
    threads: int = Field(1, ge=1)


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance; invalid environment values raise ConfigError."""
    try:
        return Settings()
    except ValidationError as exc:
        error = exc.errors()[0]
        name = "_".join(str(part) for part in error["loc"]).upper()
        raise ConfigError(f"PSEUDOMODE_{name}: {error['msg']}") from exc
