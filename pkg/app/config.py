"""
Application configuration using Pydantic Settings.
"""

import os
from functools import lru_cache
from pydantic_settings import BaseSettings


def get_env_file() -> str:
    """Determine which env file to use based on environment."""
    env = os.getenv("TWIST_ENV", "development")
    if env == "ci":
        return ".env.ci"
    return ".env.development"


class Settings(BaseSettings):
    """Application settings loaded from TWIST_* environment variables."""

    # App settings
    app_name: str = "Twist Census"
    log_level: str = "INFO"

    # Table cache (SQLite file under cache_dir)
    cache_dir: str = "./.twist-cache"
    cache_enabled: bool = True
    format_version: int = 1

    # p-adic working precision in digits of p
    default_precision: int = 40

    # Numeric certification of signs (mpmath decimal places)
    numeric_dps: int = 30
    max_numeric_dps: int = 240

    # Parallel sign evaluation
    workers: int = 1

    # Theta selection
    theta_count: int = 4
    theta_seed: int = 0

    class Config:
        env_prefix = "TWIST_"
        env_file = get_env_file()
        env_file_encoding = "utf-8"
        extra = "ignore"


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
