from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache
from typing import Literal, Optional


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="SYMPAR_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Solver
    solver: Optional[str] = None  # external command line, e.g. "z3 -in"
    solver_backend: Literal["internal", "external"] = "internal"
    solver_timeout_ms: int = 10_000
    solver_seed_option: Optional[str] = None  # e.g. "(set-option :random-seed 0)"
    unknown_policy: Literal["keep_part", "drop_part"] = "keep_part"
    cube_limit: int = 10_000
    nonlinear_samples: int = 2_000
    witness_integer_candidates: int = 64

    # Symbolic execution / interpreter
    loop_fuel: int = 100_000
    default_depth: int = 12

    # Workers
    jobs: int = 1

    # Learning
    locate_cache_size: int = 100_000
    alpha: float = 0.1
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay: float = 0.8
    episodes: int = 500
    max_steps: int = 200

    # Output
    log_level: str = "INFO"
    raster_resolution: int = 200


@lru_cache()
def get_settings() -> Settings:
    return Settings()
