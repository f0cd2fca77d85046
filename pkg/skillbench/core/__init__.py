"""Core utilities: logging, errors, metrics, seeding, storage."""

from skillbench.core.logging import get_logger, setup_logging
from skillbench.core.middleware import RequestContextMiddleware

__all__ = ["RequestContextMiddleware", "get_logger", "setup_logging"]
