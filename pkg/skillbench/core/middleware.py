"""Request context middleware for the scoring service."""

import time
import uuid
from collections.abc import Awaitable, Callable

from starlette.middleware.base import BaseHTTPMiddleware
from starlette.requests import Request
from starlette.responses import Response
from starlette.routing import Match

from skillbench.core.logging import get_logger, request_id_ctx
from skillbench.core.metrics import REQUEST_COUNT, REQUEST_IN_PROGRESS, REQUEST_LATENCY

logger = get_logger(__name__)


def _endpoint_label(request: Request) -> str:
    # Route templates keep /templates/{template_id} a single label. Before the
    # router has run the route is matched here.
    route = request.scope.get("route")
    if route is None:
        for candidate in getattr(request.app, "routes", ()):
            match, _ = candidate.matches(request.scope)
            if match == Match.FULL:
                route = candidate
                break
    return getattr(route, "path", request.url.path)


class RequestContextMiddleware(BaseHTTPMiddleware):
    """Attach a request id, time the request and record metrics."""

    async def dispatch(
        self, request: Request, call_next: Callable[[Request], Awaitable[Response]]
    ) -> Response:
        request_id = request.headers.get("X-Request-ID", str(uuid.uuid4()))
        token = request_id_ctx.set(request_id)
        start_time = time.perf_counter()
        in_progress = REQUEST_IN_PROGRESS.labels(
            method=request.method, endpoint=_endpoint_label(request)
        )
        in_progress.inc()

        logger.info("request_started", method=request.method, path=request.url.path)

        try:
            response = await call_next(request)
        except Exception as e:
            REQUEST_COUNT.labels(
                method=request.method, endpoint=_endpoint_label(request), status_code=500
            ).inc()
            logger.exception(
                "request_failed", method=request.method, path=request.url.path, error=str(e)
            )
            raise
        finally:
            in_progress.dec()
            request_id_ctx.reset(token)

        duration_seconds = time.perf_counter() - start_time
        endpoint = _endpoint_label(request)
        REQUEST_COUNT.labels(
            method=request.method, endpoint=endpoint, status_code=response.status_code
        ).inc()
        REQUEST_LATENCY.labels(method=request.method, endpoint=endpoint).observe(
            duration_seconds
        )

        response.headers["X-Request-ID"] = request_id
        response.headers["X-Response-Time"] = f"{duration_seconds * 1000:.2f}ms"

        logger.info(
            "request_completed",
            method=request.method,
            path=request.url.path,
            status_code=response.status_code,
            duration_ms=round(duration_seconds * 1000, 2),
        )
        return response
