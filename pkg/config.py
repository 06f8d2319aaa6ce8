import os
import sys
from functools import lru_cache

from loguru import logger
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

LOG_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <green>{level: <8}</green> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)


class Settings(BaseSettings):
    """Runtime settings, read from the environment (prefix ``SIHT_``) and ``.env``."""

    model_config = SettingsConfigDict(
        env_prefix="SIHT_",
        env_file=".env",
        extra="ignore",
    )

    workers: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    log_level: str = "INFO"

    default_n: int = Field(1000, ge=1)
    default_t: int = Field(100, ge=1)
    default_trials: int = Field(100, ge=1)
    default_threshold: float = Field(1e-3, gt=0)
    c_tilde: float = Field(96.0, gt=0)
    ric_subset_cap: int = Field(10**6, ge=1)
    output_dir: str = "."


@lru_cache
def get_settings() -> Settings:
    return Settings()


def configure_logging(level: str = "INFO", sink=sys.stdout) -> None:
    """Replace loguru's default handler with the project sink."""
    logger.remove()  # Remove default handler
    logger.add(sink, format=LOG_FORMAT, level=level)
