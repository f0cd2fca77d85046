"""Health checks of the scoring service."""

import time
from typing import Any

from skillbench.config import Settings, get_settings
from skillbench.core.exceptions import SkillbenchError
from skillbench.core.logging import get_logger
from skillbench.models.common import HealthCheck, HealthResponse, StatusEnum
from skillbench.services.backends import build_backend, tokenize
from skillbench.services.formats import read_codec

logger = get_logger(__name__)

_PROBE_PROMPT = tokenize("To successfully wipe the plate with the cloth you should")
_PROBE_CONTINUATION = tokenize("move the cloth")


class HealthService:
    """Service for performing health checks."""

    @staticmethod
    def check_language_model(settings: Settings) -> HealthCheck:
        """Score a fixed sentence with the reference backend."""
        start = time.perf_counter()
        try:
            backend = build_backend("topical", settings)
            backend.continuation_logprobs(_PROBE_PROMPT, _PROBE_CONTINUATION)
            return HealthCheck(
                name="language_model",
                status=StatusEnum.HEALTHY,
                latency_ms=round((time.perf_counter() - start) * 1000, 2),
            )
        except (OSError, SkillbenchError) as e:
            logger.error("language_model_health_check_failed", error=str(e))
            return HealthCheck(
                name="language_model",
                status=StatusEnum.UNHEALTHY,
                latency_ms=round((time.perf_counter() - start) * 1000, 2),
                message=str(e),
            )

    @staticmethod
    def check_codec(settings: Settings) -> HealthCheck | None:
        """Read the configured codec file; ``None`` when none is configured.

        A missing or corrupt codec only degrades the service, since scoring
        does not need it.
        """
        if settings.codec_path is None:
            return None
        start = time.perf_counter()
        try:
            params = read_codec(settings.codec_path)
        except (OSError, SkillbenchError) as e:
            logger.warning("codec_health_check_failed", path=str(settings.codec_path), error=str(e))
            return HealthCheck(
                name="codec",
                status=StatusEnum.DEGRADED,
                latency_ms=round((time.perf_counter() - start) * 1000, 2),
                message=str(e),
            )
        return HealthCheck(
            name="codec",
            status=StatusEnum.HEALTHY,
            latency_ms=round((time.perf_counter() - start) * 1000, 2),
            message=f"K={params.codebook_size} D={params.latent_dim}",
        )

    @classmethod
    async def get_health(
        cls, settings: Settings | None = None, include_details: bool = True
    ) -> HealthResponse:
        """Get overall health status."""
        settings = settings or get_settings()
        checks: list[HealthCheck] = []

        if include_details:
            checks.append(cls.check_language_model(settings))
            codec = cls.check_codec(settings)
            if codec is not None:
                checks.append(codec)

        if not checks:
            overall_status = StatusEnum.HEALTHY
        elif any(c.status == StatusEnum.UNHEALTHY for c in checks):
            overall_status = StatusEnum.UNHEALTHY
        elif any(c.status == StatusEnum.DEGRADED for c in checks):
            overall_status = StatusEnum.DEGRADED
        else:
            overall_status = StatusEnum.HEALTHY

        return HealthResponse(status=overall_status, version=settings.app_version, checks=checks)

    @classmethod
    async def get_readiness(cls, settings: Settings | None = None) -> dict[str, Any]:
        """Ready unless a check is unhealthy."""
        health = await cls.get_health(settings)
        return {
            "ready": health.status != StatusEnum.UNHEALTHY,
            "status": health.status.value,
        }

    @staticmethod
    async def get_liveness() -> dict[str, Any]:
        return {"alive": True}
