"""Template library endpoints."""

from typing import Annotated

from fastapi import APIRouter, Depends, Path

from skillbench.core.exceptions import NotFoundError
from skillbench.core.logging import get_logger
from skillbench.dependencies import BackendDep, LibraryDep
from skillbench.models.api import RankRequest, RankResponse, TemplateOut
from skillbench.models.skills import SkillLabel, Template
from skillbench.services.lang_score import rank_templates_llm, top_k

logger = get_logger(__name__)

router = APIRouter()


def get_template_or_404(
    template_id: Annotated[int, Path(description="Template id")],
    library: LibraryDep,
) -> Template:
    for template in library:
        if template.id == template_id:
            return template
    raise NotFoundError(f"Template with id {template_id} not found")


@router.get("", response_model=list[TemplateOut], summary="List Templates")
async def list_templates(library: LibraryDep) -> list[TemplateOut]:
    """All templates in id order."""
    return [TemplateOut.model_validate(t.model_dump()) for t in library]


@router.get("/{template_id}", response_model=TemplateOut, summary="Get Template")
async def get_template(template: Annotated[Template, Depends(get_template_or_404)]) -> TemplateOut:
    return TemplateOut.model_validate(template.model_dump())


@router.post("/rank", response_model=RankResponse, summary="Rank Templates")
async def rank_templates(
    body: RankRequest, backend: BackendDep, library: LibraryDep
) -> RankResponse:
    """Score every template for a skill with the reference model."""
    skill = SkillLabel(verb=body.verb, tool=body.tool, recipient=body.recipient)
    scores = rank_templates_llm(backend, skill, library)
    best = top_k(scores, body.k)
    logger.info("templates_ranked", skill=skill.key, top_k=best)
    return RankResponse(scores=list(scores.scores), top_k=best)
