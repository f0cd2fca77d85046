"""Health check endpoints."""

from typing import Any

from fastapi import APIRouter, status
from fastapi.responses import JSONResponse

from skillbench.dependencies import SettingsDep
from skillbench.models.common import HealthResponse
from skillbench.services.health import HealthService

router = APIRouter()


@router.get(
    "/health",
    response_model=HealthResponse,
    summary="Health Check",
    description="Reference language model and codec file status.",
)
async def health_check(settings: SettingsDep) -> HealthResponse:
    return await HealthService.get_health(settings)


@router.get("/health/live", summary="Liveness Probe")
async def liveness() -> dict[str, Any]:
    return await HealthService.get_liveness()


@router.get("/health/ready", summary="Readiness Probe")
async def readiness(settings: SettingsDep) -> JSONResponse:
    """503 while the reference language model cannot score."""
    result = await HealthService.get_readiness(settings)
    status_code = status.HTTP_200_OK if result["ready"] else status.HTTP_503_SERVICE_UNAVAILABLE
    return JSONResponse(content=result, status_code=status_code)
