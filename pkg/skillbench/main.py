"""Scoring service application.

Serves the template library and the reference language model, so a
``remote`` backend can point at another workbench instance.
"""

import time
from collections.abc import AsyncGenerator
from contextlib import asynccontextmanager
from typing import Any

from fastapi import FastAPI
from prometheus_client import make_asgi_app

from skillbench.api.v1 import router as api_v1_router
from skillbench.config import Settings, get_settings
from skillbench.core.exceptions import setup_exception_handlers
from skillbench.core.logging import get_logger, setup_logging
from skillbench.core.middleware import RequestContextMiddleware
from skillbench.dependencies import get_reference_backend
from skillbench.services.library import build_library

setup_logging()
logger = get_logger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI) -> AsyncGenerator[None, None]:
    settings = get_settings()
    started = time.perf_counter()
    # estimate the reference model before the first /score request
    get_reference_backend(settings)
    logger.info(
        "service_started",
        environment=settings.environment,
        version=settings.app_version,
        templates=len(build_library()),
        model_ready_ms=round((time.perf_counter() - started) * 1000, 2),
    )
    yield
    logger.info("service_stopped")


def create_application(settings: Settings | None = None) -> FastAPI:
    """Build the scoring service for ``settings`` (the cached settings by default)."""
    settings = settings or get_settings()
    docs = not settings.is_production
    app = FastAPI(
        title=settings.app_name,
        version=settings.app_version,
        description="Behavior-template library and reference language-model scoring",
        docs_url="/docs" if docs else None,
        redoc_url="/redoc" if docs else None,
        openapi_url="/openapi.json" if docs else None,
        lifespan=lifespan,
    )
    app.add_middleware(RequestContextMiddleware)
    setup_exception_handlers(app)
    if settings.metrics_enabled:
        app.mount("/metrics", make_asgi_app())
    app.include_router(api_v1_router, prefix=settings.api_v1_prefix)

    @app.get("/", include_in_schema=False)
    async def root() -> dict[str, Any]:
        return {
            "app": settings.app_name,
            "version": settings.app_version,
            "score_url": f"{settings.api_v1_prefix}/score",
            "docs": "/docs" if docs else None,
        }

    return app


app = create_application()
