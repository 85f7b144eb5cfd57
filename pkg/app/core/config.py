"""
Application settings
"""
import os
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field


class Settings(BaseSettings):
    """Application settings"""

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=False,
        populate_by_name=True,
        extra="ignore",
    )

    # Planner settings
    default_model_dim: int = Field(default=1_000_000, alias="DDEF_MODEL_DIM")  # δ_floor = 1/d
    saturation_tol: float = 1e-9  # relative slack on T_avg <= T_comp
    phi_log_space_tau: int = 64  # evaluate φ in log-space above this τ

    # Sweep settings
    max_parallel_cells: int = Field(default=os.cpu_count() or 1, alias="DDEF_MAX_WORKERS")

    # Output settings
    output_dir: str = Field(default="runs", alias="DDEF_OUTPUT_DIR")
    config_schema_version: int = 1

    # Celery settings
    redis_url: str = Field(default="redis://localhost:6379/0", alias="REDIS_URL")
    task_time_limit: int = Field(default=3900, alias="DDEF_TASK_TIME_LIMIT")  # seconds

    # Logging
    log_level: str = Field(default="INFO", alias="LOG_LEVEL")
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


settings = Settings()
