"""Centralized configuration loaded from environment variables."""

from functools import lru_cache
from pathlib import Path
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings


# Resolve .env relative to project root (parent of campus_epi/)
ENV_FILE = Path(__file__).resolve().parent.parent / ".env"


class Settings(BaseSettings):
    """Runtime settings from CAMPUS_EPI_* environment variables or .env."""

    # Worker cap for Monte-Carlo ensembles (None = machine parallelism)
    threads: Optional[int] = Field(default=None, ge=1)

    log_level: str = "INFO"

    # Fixed-point iteration for dorm generating functions
    fixed_point_tolerance: float = Field(default=1e-10, gt=0)
    fixed_point_max_iterations: int = Field(default=10_000, ge=1)
    fixed_point_grid_size: int = Field(default=1001, ge=2)

    # Campus shape used when sweeps are given n*p_D and N*p_G directly
    dorm_size: int = Field(default=120, ge=1)
    num_dorms: int = Field(default=50, ge=1)

    model_config = {
        "env_prefix": "CAMPUS_EPI_",
        "env_file": str(ENV_FILE),
        "env_file_encoding": "utf-8",
        "extra": "ignore",  # Don't error on unexpected env vars
    }


@lru_cache
def get_settings() -> Settings:
    return Settings()
