import logging
import os
from dataclasses import dataclass, replace
from typing import Optional

from dotenv import load_dotenv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Settings:
    """
    Runtime settings shared by the numerical services.

    Values come from the process environment (optionally seeded from a
    ``.env`` file) and are frozen once the manager is initialized.
    """

    workers: int = 1
    quad_order: int = 5
    iterative_threshold: int = 5000
    seed: int = 0
    log_level: str = "INFO"

    @classmethod
    def from_env(cls) -> "Settings":
        """
        Build settings from ``PIEZOSCATTER_*`` environment variables.

        Returns:
            Settings instance with defaults for unset keys
        """
        return cls(
            workers=_int_env("PIEZOSCATTER_WORKERS", 1),
            quad_order=_int_env("PIEZOSCATTER_QUAD_ORDER", 5),
            iterative_threshold=_int_env("PIEZOSCATTER_ITERATIVE_THRESHOLD", 5000),
            seed=_int_env("PIEZOSCATTER_SEED", 0),
            log_level=os.getenv("PIEZOSCATTER_LOG_LEVEL", "INFO").upper(),
        )


def _int_env(key: str, default: int) -> int:
    raw = os.getenv(key)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {key}={raw!r}, using {default}")
        return default


# Global instance
_settings: Optional[Settings] = None


def init_settings(load_env_file: bool = True, **overrides) -> Settings:
    """
    Initialize the global settings.

    Args:
        load_env_file: Whether to read a ``.env`` file first
        **overrides: Explicit values taking precedence over the environment

    Returns:
        Settings instance
    """
    global _settings
    if load_env_file:
        load_dotenv()
    base = Settings.from_env()
    if overrides:
        explicit = {k: v for k, v in overrides.items() if v is not None}
        base = replace(base, **explicit)
    _settings = base
    logger.debug(f"Settings initialized: {_settings}")
    return _settings


def get_settings() -> Settings:
    """
    Get the global settings, initializing from the environment on first use.

    Returns:
        Settings instance
    """
    if _settings is None:
        return init_settings(load_env_file=False)
    return _settings
