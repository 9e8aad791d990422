"""
Settings

This module provides process-level settings read from the environment (and an
optional .env file): the default output root, the dense memory budget and the
log level.
"""

import os
import logging
from functools import lru_cache

from pydantic import BaseModel, Field

try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass

logger = logging.getLogger(__name__)

TOOL_VERSION = "0.3.0"


class Settings(BaseModel):
    output_root: str = "results"
    max_dense_dim: int = Field(default=4096, ge=2)
    log_level: str = "INFO"


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Read settings once per process."""
    settings = Settings(
        output_root=os.getenv("SPECTRAL_LAB_OUTPUT_ROOT", "results"),
        max_dense_dim=int(os.getenv("SPECTRAL_LAB_MAX_DENSE_DIM", "4096")),
        log_level=os.getenv("SPECTRAL_LAB_LOG_LEVEL", "INFO").upper(),
    )
    logger.debug(f"Loaded settings: {settings}")
    return settings


def ensure_dense_budget(dim: int, what: str = "matrix") -> None:
    """
    Raise ResourceError if a dim x dim complex matrix exceeds the dense budget.

    Args:
        dim: Matrix dimension
        what: Description used in the error message

    Raises:
        ResourceError: If dim exceeds SPECTRAL_LAB_MAX_DENSE_DIM
    """
    from .errors import ResourceError

    limit = get_settings().max_dense_dim
    if dim > limit:
        raise ResourceError(f"Dense {what} of dimension {dim} exceeds budget {limit} "
                            f"(set SPECTRAL_LAB_MAX_DENSE_DIM to raise it)")
