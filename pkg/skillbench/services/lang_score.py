"""Template ranking by language-model likelihood of the filled descriptor."""

import math
import time
from collections.abc import Sequence

from skillbench.core.exceptions import (
    EmptyDescriptorError,
    EmptyInputError,
    KTooLargeError,
)
from skillbench.core.logging import get_logger
from skillbench.core.metrics import SCORING_LATENCY
from skillbench.models.scores import ScoreVector
from skillbench.models.skills import SkillLabel, Template
from skillbench.services.backends import ContinuationScorer, tokenize
from skillbench.services.library import fill_descriptor

logger = get_logger(__name__)

PROMPT_PATTERN = "To successfully {caption} you should "
DEFAULT_K = 5


def build_prompt(skill: SkillLabel) -> list[str]:
    """Prompt tokens: ``to successfully <verb> the <recipient> with the <tool> you should``."""
    return tokenize(PROMPT_PATTERN.format(caption=skill.caption))


def sequence_loglik(
    model: ContinuationScorer, prompt_tokens: Sequence[str], descriptor_tokens: Sequence[str]
) -> float:
    """Natural-log probability of the descriptor given the prompt."""
    if not descriptor_tokens:
        raise EmptyDescriptorError("descriptor has no tokens")
    return float(sum(model.continuation_logprobs(prompt_tokens, descriptor_tokens)))


def normalized_score(
    model: ContinuationScorer, prompt_tokens: Sequence[str], descriptor_tokens: Sequence[str]
) -> float:
    """Mean log-probability per descriptor token.

    Summed as offsets from the first token's log-probability, so equal
    per-token values average to exactly that value.
    """
    if not descriptor_tokens:
        raise EmptyDescriptorError("descriptor has no tokens")
    logprobs = model.continuation_logprobs(prompt_tokens, descriptor_tokens)
    shift = logprobs[0]
    return shift + math.fsum(v - shift for v in logprobs) / len(logprobs)


def rank_templates_llm(
    model: ContinuationScorer, skill: SkillLabel, library: Sequence[Template]
) -> ScoreVector:
    """Normalized score of every template's filled descriptor, in library order."""
    if not library:
        raise EmptyInputError("template library is empty")
    start = time.perf_counter()
    prompt = build_prompt(skill)
    scores = tuple(
        normalized_score(model, prompt, tokenize(fill_descriptor(template, skill)))
        for template in library
    )
    SCORING_LATENCY.labels(scorer="llm").observe(time.perf_counter() - start)
    return ScoreVector(ids=tuple(t.id for t in library), scores=scores, higher_is_better=True)


def top_k(scores: ScoreVector, k: int = DEFAULT_K) -> list[int]:
    """Ids of the ``k`` best scores; ties go to the lowest id."""
    if k < 1:
        raise KTooLargeError("k must be at least 1", details={"k": k})
    if k > len(scores):
        raise KTooLargeError(
            f"k={k} exceeds the {len(scores)} scored templates",
            details={"k": k, "available": len(scores)},
        )
    sign = -1.0 if scores.higher_is_better else 1.0
    ranked = sorted(zip(scores.ids, scores.scores, strict=True), key=lambda p: (sign * p[1], p[0]))
    return [template_id for template_id, _ in ranked[:k]]
