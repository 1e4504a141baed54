import logging
import os
from typing import Optional

from src.errors import ConfigError

SEED_ENV = "POSEKIT_SEED"
LOG_LEVEL_ENV = "POSEKIT_LOG_LEVEL"

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def resolve_seed(seed: Optional[int]) -> int:
    """Return the seed to use, giving POSEKIT_SEED precedence over configured values."""
    override = os.environ.get(SEED_ENV)
    if override is not None and override.strip() != "":
        try:
            return int(override)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got '{override}'")
    return 0 if seed is None else int(seed)


def configure_logging(verbose: bool = False) -> None:
    level_name = "DEBUG" if verbose else os.environ.get(LOG_LEVEL_ENV, "INFO").upper()
    level = logging.getLevelName(level_name)
    if not isinstance(level, int):
        raise ConfigError(f"Unknown log level '{level_name}'")
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    logging.captureWarnings(True)
