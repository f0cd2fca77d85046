"""Continuation scoring, the server side of the remote backend."""

from fastapi import APIRouter

from skillbench.core.exceptions import EmptyDescriptorError
from skillbench.dependencies import BackendDep
from skillbench.models.api import ScoreRequest, ScoreResponse
from skillbench.services.backends import tokenize

router = APIRouter()


@router.post("/score", response_model=ScoreResponse, summary="Score Continuation")
async def score(body: ScoreRequest, backend: BackendDep) -> ScoreResponse:
    """Per-token natural-log probabilities of ``continuation`` after ``prompt``."""
    continuation = tokenize(body.continuation)
    if not continuation:
        raise EmptyDescriptorError("continuation has no tokens")
    logprobs = backend.continuation_logprobs(tokenize(body.prompt), continuation)
    return ScoreResponse(token_logprobs=logprobs)
