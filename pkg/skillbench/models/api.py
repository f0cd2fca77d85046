"""Request and response bodies of the scoring service.

``ScoreRequest``/``ScoreResponse`` are also the wire schema of the remote
language-model backend, so a remote server only has to speak this pair.
"""

from pydantic import BaseModel, Field

from skillbench.models.skills import TOKEN_PATTERN, ForceLevel, TrajectoryKind


class ScoreRequest(BaseModel):
    """Score ``continuation`` given ``prompt``."""

    prompt: str
    continuation: str


class ScoreResponse(BaseModel):
    """Natural-log probability of each continuation token, in order."""

    token_logprobs: list[float]


class TemplateOut(BaseModel):
    id: int
    trajectory: TrajectoryKind
    force: ForceLevel
    descriptor_template: str


class RankRequest(BaseModel):
    """Rank the library for one skill."""

    verb: str = Field(..., pattern=TOKEN_PATTERN)
    tool: str = Field(..., pattern=TOKEN_PATTERN)
    recipient: str = Field(..., pattern=TOKEN_PATTERN)
    k: int = Field(default=5, ge=1, le=33)


class RankResponse(BaseModel):
    scores: list[float] = Field(..., description="Mean token log-probability per template id")
    top_k: list[int]
