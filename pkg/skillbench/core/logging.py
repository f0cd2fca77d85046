"""Structured logging configuration.

Logs always go to stderr; stdout is reserved for command output (JSON
reports, rankings, summary tables).
"""

import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any, TextIO

import structlog
from structlog.types import EventDict, Processor

from skillbench.config import settings

# Service requests carry a request id; harness runs carry a run id and a stage.
request_id_ctx: ContextVar[str | None] = ContextVar("request_id", default=None)
run_id_ctx: ContextVar[str | None] = ContextVar("run_id", default=None)
stage_ctx: ContextVar[str | None] = ContextVar("stage", default=None)

_CONTEXT_FIELDS: tuple[tuple[str, ContextVar[str | None]], ...] = (
    ("request_id", request_id_ctx),
    ("run_id", run_id_ctx),
    ("stage", stage_ctx),
)

_QUIET_LOGGERS = ("uvicorn.access", "httpcore", "httpx")


def add_context(logger: logging.Logger, method_name: str, event_dict: EventDict) -> EventDict:
    """Attach request, run and stage ids plus the app identity to an event."""
    for key, var in _CONTEXT_FIELDS:
        value = var.get()
        if value:
            # an explicit stage= on the call wins
            event_dict.setdefault(key, value)
    event_dict["app"] = settings.app_name
    event_dict["environment"] = settings.environment
    return event_dict


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Tag every log event emitted inside the block with a pipeline stage."""
    token = stage_ctx.set(name)
    try:
        yield
    finally:
        stage_ctx.reset(token)


def _renderer(log_format: str, stream: TextIO) -> Processor:
    if log_format == "json":
        return structlog.processors.JSONRenderer()
    return structlog.dev.ConsoleRenderer(colors=stream.isatty())


def setup_logging(
    level: str | None = None,
    log_format: str | None = None,
    stream: TextIO | None = None,
) -> None:
    """Route structlog and stdlib logging through one formatter.

    ``level`` and ``log_format`` default to the settings.
    """
    stream = stream or sys.stderr
    pre_chain: list[Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.PositionalArgumentsFormatter(),
        add_context,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.UnicodeDecoder(),
    ]
    structlog.configure(
        processors=[*pre_chain, structlog.stdlib.ProcessorFormatter.wrap_for_formatter],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    handler = logging.StreamHandler(stream)
    handler.setFormatter(
        structlog.stdlib.ProcessorFormatter(
            foreign_pre_chain=pre_chain,
            processors=[
                structlog.stdlib.ProcessorFormatter.remove_processors_meta,
                _renderer(log_format or settings.log_format, stream),
            ],
        )
    )
    root = logging.getLogger()
    root.handlers.clear()
    root.addHandler(handler)
    root.setLevel(getattr(logging, (level or settings.log_level).upper()))

    for name in _QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)


def get_logger(name: str | None = None) -> Any:
    """Get a structured logger instance."""
    return structlog.get_logger(name)
