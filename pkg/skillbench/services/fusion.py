"""Score normalization, fusion and the end-to-end selection pipeline."""

from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import NamedTuple, ParamSpec, TypeVar

from skillbench.core.exceptions import (
    EmptyScoresError,
    IdMismatchError,
    InvalidInputError,
    PipelineError,
    SkillbenchError,
    TooFewEntriesError,
)
from skillbench.core.logging import get_logger, stage
from skillbench.core.seeding import derive_seed
from skillbench.models.reports import SelectionReport
from skillbench.models.scores import ScoreVector
from skillbench.models.skills import SkillLabel, Template
from skillbench.services.appearance import AppearanceEncoder, score_candidates_appearance
from skillbench.services.backends import ContinuationScorer
from skillbench.services.codec import CodecParams
from skillbench.services.corpus import DEFAULT_STEPS, DemoRecord
from skillbench.services.flow_score import score_candidates_flow
from skillbench.services.lang_score import rank_templates_llm, top_k
from skillbench.services.retrieval import DualEncoder, Retrieved, retrieve_scored
from skillbench.services.simulator import Episode, Scene, run_template

logger = get_logger(__name__)

DEFAULT_LAMBDA = 0.1

T = TypeVar("T")
P = ParamSpec("P")


def minmax_normalize(scores: ScoreVector) -> ScoreVector:
    """Map scores onto [0, 1]; a constant vector maps to 0.5 everywhere."""
    if len(scores) < 2:
        raise TooFewEntriesError(
            "min-max normalization needs at least two scores", details={"count": len(scores)}
        )
    low, high = min(scores.scores), max(scores.scores)
    if high == low:
        normalized = tuple(0.5 for _ in scores.scores)
    else:
        normalized = tuple((s - low) / (high - low) for s in scores.scores)
    return scores.model_copy(update={"scores": normalized, "normalization": (low, high)})


def combine(s_llm: ScoreVector, s_flow: ScoreVector, lam: float = DEFAULT_LAMBDA) -> ScoreVector:
    """``lam * s_llm + (1 - s_flow)`` per template id, higher is better."""
    if lam < 0:
        raise InvalidInputError("lambda must be non-negative", details={"lambda": lam})
    if set(s_llm.ids) != set(s_flow.ids):
        raise IdMismatchError(
            "LLM and flow scores cover different templates",
            details={"llm": sorted(s_llm.ids), "flow": sorted(s_flow.ids)},
        )
    llm, flow = s_llm.as_dict(), s_flow.as_dict()
    ids = tuple(sorted(llm))
    return ScoreVector(
        ids=ids,
        scores=tuple(lam * llm[i] + (1.0 - flow[i]) for i in ids),
        higher_is_better=True,
    )


def select(combined: ScoreVector) -> int:
    """Best-scoring id; ties go to the lowest id."""
    if len(combined) == 0:
        raise EmptyScoresError("nothing to select from")
    sign = -1.0 if combined.higher_is_better else 1.0
    pairs = zip(combined.ids, combined.scores, strict=True)
    return min(pairs, key=lambda p: (sign * p[1], p[0]))[0]


def normalize_candidates(scores: ScoreVector) -> ScoreVector:
    if len(scores) == 1:
        return scores.model_copy(update={"scores": (0.5,)})
    return minmax_normalize(scores)


def fuse(
    llm_candidates: ScoreVector, flow_candidates: ScoreVector, lam: float
) -> tuple[ScoreVector, ScoreVector, ScoreVector]:
    """Normalized LLM, normalized flow and fused vectors over the candidate set.

    Flow distances are normalized as given (lower is better), which is what
    the ``1 - s_flow`` term of the fused score expects. A single candidate is
    not normalized; both of its entries read 0.5.
    """
    llm_n = normalize_candidates(llm_candidates)
    flow_n = normalize_candidates(flow_candidates)
    return llm_n, flow_n, combine(llm_n, flow_n, lam)


class PipelineRun(NamedTuple):
    report: SelectionReport
    episodes: dict[int, Episode]
    retrieved: list[Retrieved]


def staged(name: str, fn: Callable[P, T], *args: P.args, **kwargs: P.kwargs) -> T:
    """Run ``fn`` with log events and domain errors tagged with ``name``."""
    with stage(name):
        try:
            return fn(*args, **kwargs)
        except PipelineError:
            raise
        except SkillbenchError as e:
            raise PipelineError.wrap(name, e) from e


def execution_seed(seed: int, skill: SkillLabel, variation: int, template_id: int) -> int:
    return derive_seed(seed, "execute", skill.key, variation, template_id)


def execute_candidates(
    scene: Scene,
    templates: Sequence[Template],
    *,
    steps: int,
    seed_for: Callable[[int], int],
    max_workers: int = 1,
) -> dict[int, Episode]:
    """Run every template on its own copy of ``scene``; results keyed by id."""

    def run(template: Template) -> Episode:
        return run_template(scene, template, steps, seed_for(template.id))

    if max_workers > 1 and len(templates) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            episodes = list(pool.map(run, templates))
    else:
        episodes = [run(t) for t in templates]
    return {t.id: ep for t, ep in zip(templates, episodes, strict=True)}


def run_pipeline_detailed(
    skill: SkillLabel,
    library: Sequence[Template],
    corpus: Sequence[DemoRecord],
    codec: CodecParams | None,
    llm_backend: ContinuationScorer,
    encoder: DualEncoder,
    scene: Scene,
    *,
    lam: float = DEFAULT_LAMBDA,
    k: int = 5,
    m: int = 5,
    seed: int = 0,
    variation: int = 0,
    steps: int = DEFAULT_STEPS,
    appearance_encoder: AppearanceEncoder | None = None,
    oracle_ranking: Sequence[int] | None = None,
    max_workers: int = 1,
) -> PipelineRun:
    """Rank, shortlist, execute, retrieve, score, fuse and select.

    ``codec=None`` skips the flow and fused scores; ``appearance_encoder=None``
    skips the appearance baseline.
    """
    by_id = {t.id: t for t in library}
    llm_all = staged("llm", lambda: rank_templates_llm(llm_backend, skill, library))
    candidates = staged("llm", lambda: top_k(llm_all, k))

    episodes = staged(
        "execute",
        lambda: execute_candidates(
            scene,
            [by_id[c] for c in candidates],
            steps=steps,
            seed_for=lambda tid: execution_seed(seed, skill, variation, tid),
            max_workers=max_workers,
        ),
    )
    hits = staged("retrieve", lambda: retrieve_scored(skill, corpus, encoder, m))
    demos = [hit.record for hit in hits]

    llm_candidates = llm_all.subset(sorted(candidates))
    flow_scores: ScoreVector | None = None
    flow_n: ScoreVector | None = None
    combined: ScoreVector | None = None
    selected_id: int | None = None
    if codec is not None:
        flow = staged(
            "flow",
            lambda: score_candidates_flow(
                {i: ep.video for i, ep in episodes.items()}, [d.video for d in demos], codec
            ),
        )
        llm_n, flow_n, fused = staged("fuse", lambda: fuse(llm_candidates, flow, lam))
        selected_id = staged("fuse", lambda: select(fused))
        flow_scores, combined = flow, fused
    else:
        llm_n = normalize_candidates(llm_candidates)

    appearance_scores = None
    if appearance_encoder is not None:
        appearance_scores = staged(
            "appearance",
            lambda: score_candidates_appearance(
                {i: ep.appearance for i, ep in episodes.items()},
                [d.appearance for d in demos],
                appearance_encoder,
            ),
        )

    ordered = list(llm_candidates.ids)
    oracle_id = None
    if oracle_ranking is not None:
        oracle_id = next(i for i in oracle_ranking if i in ordered)

    report = SelectionReport(
        skill=skill.key,
        variation=variation,
        lam=lam,
        k=k,
        llm_scores=[llm_all.as_dict()[t.id] for t in sorted(library, key=lambda t: t.id)],
        candidates=ordered,
        llm_normalized=list(llm_n.scores),
        flow_scores=list(flow_scores.scores) if flow_scores is not None else None,
        flow_normalized=list(flow_n.scores) if flow_n is not None else None,
        appearance_scores=list(appearance_scores.scores) if appearance_scores is not None else None,
        combined=list(combined.scores) if combined is not None else None,
        selected_id=selected_id,
        oracle_id=oracle_id,
        retrieved=[d.record_id for d in demos],
        seeds={"base": seed, "variation": variation},
    )
    logger.info(
        "pipeline_selected",
        skill=skill.key,
        variation=variation,
        candidates=ordered,
        selected_id=selected_id,
        oracle_id=oracle_id,
    )
    return PipelineRun(report=report, episodes=episodes, retrieved=hits)


def run_pipeline(
    skill: SkillLabel,
    library: Sequence[Template],
    corpus: Sequence[DemoRecord],
    codec: CodecParams,
    llm_backend: ContinuationScorer,
    encoder: DualEncoder,
    scene: Scene,
    *,
    lam: float = DEFAULT_LAMBDA,
    k: int = 5,
    seed: int = 0,
    variation: int = 0,
    appearance_encoder: AppearanceEncoder | None = None,
    oracle_ranking: Sequence[int] | None = None,
) -> SelectionReport:
    """Selection report for one skill on one scene."""
    return run_pipeline_detailed(
        skill,
        library,
        corpus,
        codec,
        llm_backend,
        encoder,
        scene,
        lam=lam,
        k=k,
        seed=seed,
        variation=variation,
        appearance_encoder=appearance_encoder,
        oracle_ranking=oracle_ranking,
    ).report
