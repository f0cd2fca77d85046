"""API v1 routes."""

from fastapi import APIRouter

from skillbench.api.v1.health import router as health_router
from skillbench.api.v1.scoring import router as scoring_router
from skillbench.api.v1.templates import router as templates_router

router = APIRouter()

router.include_router(health_router, tags=["Health"])
router.include_router(templates_router, prefix="/templates", tags=["Templates"])
router.include_router(scoring_router, tags=["Scoring"])
