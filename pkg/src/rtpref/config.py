"""Configuration settings for rtpref"""

from pathlib import Path
from typing import Optional, Tuple

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings"""

    # CLI Settings
    app_name: str = "rtpref"
    app_version: str = "0.1.0"

    # Output Settings
    output_base_path: Path = Path("./outputs")

    # Worker pool
    max_concurrent_fits: int = 4

    # Series truncation for the first-passage density
    series_tol: float = 1e-12
    series_max_terms: int = 200

    # Estimation defaults
    default_seed: int = 0
    default_n_train: int = 100
    sgd_safety_factor: float = 1.0  # multiplies lambda = 1/(8 D^2)
    lnr_restarts: int = 8
    bisection_bracket: Tuple[float, float] = (1e-3, 1e3)

    # Logging
    log_level: str = "INFO"
    log_file: Optional[Path] = None

    model_config = SettingsConfigDict(
        env_prefix="RTPREF_",
        env_file=".env",
        env_file_encoding="utf-8",
    )


# Global settings instance
settings = Settings()
