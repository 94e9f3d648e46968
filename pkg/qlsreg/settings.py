"""Process-level settings read from the environment.

Variables use the ``QLSREG_`` prefix, for example ``QLSREG_NUM_WORKERS=8``.
"""

from __future__ import annotations

import logging

from pydantic import Field
from pydantic_settings import BaseSettings
from pydantic_settings import SettingsConfigDict


class Settings(BaseSettings):
    """Environment defaults for the command line and Monte Carlo runs."""

    model_config = SettingsConfigDict(env_prefix='QLSREG_')

    # Default number of worker threads or processes
    num_workers: int = Field(default=1, ge=1)
    # Root log level used by the command line
    log_level: str = 'INFO'


# Global settings instance
_settings: Settings | None = None


def get_settings() -> Settings:
    """Get the global settings instance (reads the environment once)."""
    global _settings  # noqa: PLW0603
    if _settings is None:
        _settings = Settings()
    return _settings


def reset_settings() -> None:
    """Reset the global settings (useful for testing)."""
    global _settings  # noqa: PLW0603
    _settings = None


def configure_logging(level: str | None = None) -> None:
    """Configure the root logger with a rich handler on stderr."""
    from rich.console import Console
    from rich.logging import RichHandler

    logging.basicConfig(
        level=(level or get_settings().log_level).upper(),
        format='%(message)s',
        datefmt='[%X]',
        handlers=[
            RichHandler(
                console=Console(stderr=True),
                rich_tracebacks=False,
                show_path=False,
            ),
        ],
        force=True,
    )
