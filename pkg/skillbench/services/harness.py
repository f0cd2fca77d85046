"""Experiment harness.

Runs every enabled method on seeded variations of every configured skill,
ranks all templates with the simulator as ground truth, and writes the
report, summary table, progress traces and retrieval log to the output
directory.
"""

import csv
import io
import time
import uuid
from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from contextlib import ExitStack
from pathlib import Path
from typing import NamedTuple

import numpy as np

from skillbench.config import Settings, get_settings
from skillbench.core.exceptions import (
    InvalidInputError,
    PipelineError,
    SkillbenchError,
    UnknownTaskError,
)
from skillbench.core.logging import get_logger, run_id_ctx
from skillbench.core.metrics import write_metrics
from skillbench.core.seeding import derive_seed, make_rng
from skillbench.core.storage import atomic_write_text
from skillbench.models.experiment import ExperimentConfig
from skillbench.models.reports import (
    ExperimentReport,
    Method,
    MethodReport,
    OracleRanking,
    SelectionReport,
    TrialResult,
)
from skillbench.models.scores import ScoreVector
from skillbench.models.skills import SkillLabel, Template
from skillbench.services.appearance import AppearanceEncoder
from skillbench.services.backends import ContinuationScorer, open_backend
from skillbench.services.codec import CodecParams, CodecTrainer, TrainingResult, codebook_usage
from skillbench.services.corpus import DEFAULT_STEPS, DemoRecord, synth_demo_corpus
from skillbench.services.formats import (
    CORPUS_INDEX,
    load_corpus,
    read_codec,
    write_codec,
    write_corpus,
    write_model,
)
from skillbench.services.fusion import (
    combine,
    normalize_candidates,
    run_pipeline_detailed,
    select,
    staged,
)
from skillbench.services.lang_score import rank_templates_llm, top_k
from skillbench.services.library import build_library
from skillbench.services.retrieval import HashedDualEncoder, retrieval_jsonl
from skillbench.services.simulator import Episode, Scene, run_template, scene_for_skill

logger = get_logger(__name__)

REPORT_FILE = "report.json"
SUMMARY_FILE = "summary.csv"
RETRIEVAL_FILE = "retrieval.jsonl"
METRICS_FILE = "metrics.prom"
CODEC_FILE = "codec.vqc"
CORPUS_DIR = "corpus"
SWEEP_FILE = "lambda_sweep.csv"
DEFAULT_LAMBDA_GRID = (0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0)

_EXECUTING_METHODS = frozenset({"flow", "appearance", "combined"})
_CODEC_METHODS = frozenset({"flow", "combined"})


def oracle_seeds(config: ExperimentConfig, skill: SkillLabel, variation: int) -> list[int]:
    return [
        derive_seed(config.seed, "oracle", skill.key, variation, j)
        for j in range(config.oracle_seeds)
    ]


def oracle_best(
    skill: SkillLabel,
    library: Sequence[Template],
    scene: Scene,
    seeds: Sequence[int],
    *,
    steps: int = DEFAULT_STEPS,
    variation: int = 0,
    max_workers: int = 1,
) -> OracleRanking:
    """Rank every template by mean final task progress over ``seeds``.

    Ties go to the lower id. ``progress`` is indexed by template id.
    """
    if scene.task is None:
        raise UnknownTaskError(f"scene for {skill.key} has no progress metric")
    if not seeds:
        raise InvalidInputError("oracle needs at least one seed")

    def mean_progress(template: Template) -> float:
        finals = [
            run_template(scene, template, steps, derive_seed(s, "rollout", template.id))
            .progress.final
            for s in seeds
        ]
        return float(np.mean(finals))

    ordered = sorted(library, key=lambda t: t.id)
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            progress = list(pool.map(mean_progress, ordered))
    else:
        progress = [mean_progress(t) for t in ordered]
    ids = [t.id for t in ordered]
    ranking = [i for i, _ in sorted(zip(ids, progress, strict=True), key=lambda p: (-p[1], p[0]))]
    logger.info(
        "oracle_ranked",
        skill=skill.key,
        variation=variation,
        best_id=ranking[0],
        best_progress=round(max(progress), 6),
    )
    return OracleRanking(skill=skill.key, variation=variation, ranking=ranking, progress=progress)


def codec_dataset(
    skills: Sequence[SkillLabel],
    frames: int,
    seed: int,
    *,
    steps: int = DEFAULT_STEPS,
    library: Sequence[Template] | None = None,
) -> np.ndarray:
    """Flow frames from random templates executed on fresh skill scenes."""
    if frames < 1 or not skills:
        raise InvalidInputError("codec dataset needs skills and a positive frame count")
    library = list(library or build_library())
    rng = make_rng(seed, "codec-dataset")
    chunks: list[np.ndarray] = []
    collected = 0
    episode = 0
    while collected < frames:
        skill = skills[episode % len(skills)]
        template = library[int(rng.integers(len(library)))]
        # variations from 10_000 up stay clear of evaluation and demo scenes
        scene = scene_for_skill(skill, 10_000 + episode, seed)
        episode_seed = derive_seed(seed, "codec-episode", episode)
        video = run_template(scene, template, steps, episode_seed).video
        chunks.append(video.frames)
        collected += video.frame_count
        episode += 1
    return np.concatenate(chunks)[:frames]


def train_codec(
    config: ExperimentConfig, skills: Sequence[SkillLabel] | None = None
) -> TrainingResult:
    codec = config.codec
    skills = list(skills or config.skill_labels())
    dataset = codec_dataset(
        skills, codec.frames, derive_seed(config.seed, "codec"), steps=config.episode_frames + 1
    )
    trainer = CodecTrainer(
        epochs=codec.epochs,
        lr=codec.lr,
        beta=codec.beta,
        seed=derive_seed(config.seed, "codec-train"),
        batch_size=codec.batch_size,
        codebook_size=codec.codebook_size,
        latent_dim=codec.latent_dim,
        hidden=codec.hidden,
    )
    result = trainer.fit(dataset)
    logger.info(
        "codec_trained",
        initial_recon_mse=result.initial_recon,
        final_recon_mse=result.final_recon,
        codebook_usage=codebook_usage(dataset, result.params),
    )
    return result


def build_corpus(config: ExperimentConfig) -> list[DemoRecord]:
    return synth_demo_corpus(
        config.skill_labels(),
        config.corpus.per_skill,
        derive_seed(config.seed, "corpus"),
        steps=config.episode_frames + 1,
    )


def load_or_build_corpus(config: ExperimentConfig) -> list[DemoRecord]:
    """Corpus from ``<output_dir>/corpus`` when present, else a fresh one."""
    directory = config.output_dir / CORPUS_DIR
    if (directory / CORPUS_INDEX).exists():
        return load_corpus(directory)
    records = build_corpus(config)
    write_corpus(directory, records)
    return records


def load_or_train_codec(config: ExperimentConfig) -> CodecParams:
    path = config.output_dir / CODEC_FILE
    if path.exists():
        return read_codec(path)
    params = train_codec(config).params
    write_codec(path, params)
    return params


def emit_progress_csv(traces: Mapping[str, Sequence[float] | np.ndarray], path: Path) -> None:
    """Progress traces over normalized episode time, one column per method."""
    columns = list(traces)
    lengths = {len(traces[name]) for name in columns}
    if len(lengths) > 1:
        raise InvalidInputError(
            "progress traces must have equal length", details={"lengths": sorted(lengths)}
        )
    rows = lengths.pop() if lengths else 0
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["normalized_time", *columns])
    for i in range(rows):
        t = i / (rows - 1) if rows > 1 else 0.0
        writer.writerow([repr(t), *(repr(float(traces[name][i])) for name in columns)])
    atomic_write_text(path, buffer.getvalue())


def read_progress_csv(path: Path) -> dict[str, list[float]]:
    with Path(path).open(encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        table: dict[str, list[float]] = {name: [] for name in header}
        for row in reader:
            for name, value in zip(header, row, strict=True):
                table[name].append(float(value))
    return table


def _trial(
    selection: SelectionReport, method: Method, oracle: OracleRanking, threshold: float
) -> TrialResult:
    chosen = selection.method_selection(method)
    progress = oracle.progress[chosen]
    return TrialResult(
        skill=selection.skill,
        variation=selection.variation,
        selected_id=chosen,
        oracle_rank=oracle.ranking.index(chosen) + 1,
        final_progress=progress,
        success=progress >= threshold,
    )


def summary_csv(report: ExperimentReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["method", "trials", "successes", "success_rate", "mean_progress"])
    for method in report.methods:
        writer.writerow(
            [
                method.method,
                len(method.trials),
                sum(t.success for t in method.trials),
                repr(method.success_rate),
                repr(method.mean_progress),
            ]
        )
    return buffer.getvalue()


def format_summary(report: ExperimentReport) -> str:
    lines = [f"{'method':<12}{'trials':>8}{'success':>10}{'progress':>10}"]
    for method in report.methods:
        lines.append(
            f"{method.method:<12}{len(method.trials):>8}"
            f"{method.success_rate:>10.3f}{method.mean_progress:>10.3f}"
        )
    if not report.complete:
        lines.append(f"(incomplete: failed in stage {report.failed_stage})")
    return "\n".join(lines) + "\n"


def _llm_only_selection(
    skill: SkillLabel,
    library: Sequence[Template],
    backend: ContinuationScorer,
    config: ExperimentConfig,
    variation: int,
    oracle: OracleRanking,
) -> SelectionReport:
    scores = staged("llm", lambda: rank_templates_llm(backend, skill, library))
    candidates = staged("llm", lambda: top_k(scores, config.k))
    ordered = sorted(candidates)
    return SelectionReport(
        skill=skill.key,
        variation=variation,
        lam=config.lam,
        k=config.k,
        llm_scores=list(scores.scores),
        candidates=ordered,
        llm_normalized=list(normalize_candidates(scores.subset(ordered)).scores),
        oracle_id=next(i for i in oracle.ranking if i in ordered),
        seeds={"base": config.seed, "variation": variation},
    )


class _RunState:
    """What a run has produced so far, so a failure can still be persisted."""

    def __init__(self, methods: Sequence[Method]) -> None:
        self.stage = "config"
        self.trials: dict[Method, list[TrialResult]] = {m: [] for m in methods}
        self.selections: list[SelectionReport] = []
        self.oracles: list[OracleRanking] = []
        self.retrieval_lines: list[str] = []

    def report(self, config: ExperimentConfig, failed_stage: str | None = None) -> ExperimentReport:
        return ExperimentReport(
            config=config.model_dump(mode="json"),
            methods=[MethodReport.from_trials(m, t) for m, t in self.trials.items()],
            selections=self.selections,
            oracles=self.oracles,
            complete=failed_stage is None,
            failed_stage=failed_stage,
        )


class _Components(NamedTuple):
    llm: ContinuationScorer
    corpus: Sequence[DemoRecord] | None
    codec: CodecParams | None
    encoder: HashedDualEncoder
    appearance: AppearanceEncoder | None


def _evaluate_skill(
    skill: SkillLabel,
    config: ExperimentConfig,
    parts: _Components,
    library: Sequence[Template],
    state: _RunState,
    out: Path,
) -> None:
    methods = list(state.trials)
    steps = config.episode_frames + 1
    traces: dict[str, np.ndarray] = {}
    for variation in range(config.variations):
        state.stage = "oracle"
        scene = staged("oracle", scene_for_skill, skill, variation, config.seed)
        oracle = staged(
            "oracle",
            oracle_best,
            skill,
            library,
            scene,
            oracle_seeds(config, skill, variation),
            steps=steps,
            variation=variation,
            max_workers=config.max_workers,
        )
        state.oracles.append(oracle)

        state.stage = "select"
        episodes: dict[int, Episode] = {}
        if parts.corpus is not None:
            run = run_pipeline_detailed(
                skill,
                library,
                parts.corpus,
                parts.codec,
                parts.llm,
                parts.encoder,
                scene,
                lam=config.lam,
                k=config.k,
                m=config.retrieval_m,
                seed=config.seed,
                variation=variation,
                steps=steps,
                appearance_encoder=parts.appearance,
                oracle_ranking=oracle.ranking,
                max_workers=config.max_workers,
            )
            selection, episodes = run.report, run.episodes
            state.retrieval_lines.append(retrieval_jsonl(skill, run.retrieved))
        else:
            selection = _llm_only_selection(skill, library, parts.llm, config, variation, oracle)
        state.selections.append(selection)

        for method in methods:
            trial = _trial(selection, method, oracle, config.success_threshold)
            state.trials[method].append(trial)
            if variation == 0:
                chosen = trial.selected_id
                trace_seed = derive_seed(config.seed, "trace", skill.key, chosen)
                episode = episodes.get(chosen) or run_template(
                    scene, library[chosen], steps, trace_seed
                )
                traces[method] = episode.progress.values
        logger.info(
            "trial_scored",
            skill=skill.key,
            variation=variation,
            picks={m: state.trials[m][-1].selected_id for m in methods},
            oracle_best=oracle.ranking[0],
        )
    emit_progress_csv(traces, out / f"progress_{skill.verb}.csv")


def run_experiment(
    config: ExperimentConfig,
    *,
    settings: Settings | None = None,
    backend: ContinuationScorer | None = None,
    codec: CodecParams | None = None,
    corpus: Sequence[DemoRecord] | None = None,
) -> ExperimentReport:
    """Evaluate every enabled method and write the run's artifacts.

    ``backend``, ``codec`` and ``corpus`` override the ones the config would
    build. On a domain failure the partial report is written with
    ``complete = false`` and the error is re-raised tagged with its stage.
    """
    settings = settings or get_settings()
    methods = config.methods.enabled()
    if not methods:
        raise InvalidInputError("no method enabled", stage="config")
    enabled = set(methods)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    library = build_library()
    state = _RunState(methods)
    token = run_id_ctx.set(uuid.uuid4().hex[:12])
    started = time.perf_counter()
    logger.info("experiment_started", skills=config.skills, methods=methods, output_dir=str(out))

    resources = ExitStack()
    try:
        state.stage = "llm"
        llm = backend or resources.enter_context(open_backend(config.llm_backend, settings))
        if enabled & _EXECUTING_METHODS and corpus is None:
            state.stage = "gen-corpus"
            corpus = staged("gen-corpus", build_corpus, config)
        if enabled & _CODEC_METHODS and codec is None:
            state.stage = "train-codec"
            codec = staged("train-codec", train_codec, config).params
            write_codec(out / CODEC_FILE, codec)
        parts = _Components(
            llm=llm,
            corpus=corpus if enabled & _EXECUTING_METHODS else None,
            codec=codec if enabled & _CODEC_METHODS else None,
            encoder=HashedDualEncoder(config.seed),
            appearance=AppearanceEncoder(config.seed) if "appearance" in enabled else None,
        )
        for skill in config.skill_labels():
            _evaluate_skill(skill, config, parts, library, state, out)

        report = state.report(config)
        write_model(out / REPORT_FILE, report)
        atomic_write_text(out / SUMMARY_FILE, summary_csv(report))
        atomic_write_text(out / RETRIEVAL_FILE, "".join(state.retrieval_lines))
        if settings.metrics_enabled:
            write_metrics(out / METRICS_FILE)
    except SkillbenchError as e:
        failed = e.stage or state.stage
        write_model(out / REPORT_FILE, state.report(config, failed_stage=failed))
        logger.error("experiment_failed", stage=failed, error_code=e.error_code, message=e.message)
        if isinstance(e, PipelineError):
            raise
        raise PipelineError.wrap(failed, e) from e
    finally:
        resources.close()
        run_id_ctx.reset(token)

    logger.info(
        "experiment_finished",
        success_rates={m.method: m.success_rate for m in report.methods},
        duration_s=round(time.perf_counter() - started, 2),
    )
    return report


class SweepPoint(NamedTuple):
    lam: float
    success_rate: float
    mean_progress: float


def sweep_lambda(
    report: ExperimentReport,
    lambdas: Sequence[float] = DEFAULT_LAMBDA_GRID,
    success_threshold: float | None = None,
) -> list[SweepPoint]:
    """Re-fuse the stored candidate scores of every trial under each weight.

    Nothing is executed again; the oracle progress stored in the report
    decides success.
    """
    if success_threshold is None:
        success_threshold = ExperimentConfig.from_data(report.config).success_threshold
    oracles = {(o.skill, o.variation): o for o in report.oracles}
    usable = [s for s in report.selections if s.flow_normalized is not None]
    if not usable:
        raise InvalidInputError("report holds no flow scores to re-fuse", stage="report")
    points = []
    for lam in lambdas:
        progress = []
        for selection in usable:
            ids = tuple(selection.candidates)
            fused = combine(
                ScoreVector(ids=ids, scores=tuple(selection.llm_normalized)),
                ScoreVector(
                    ids=ids,
                    scores=tuple(selection.flow_normalized or ()),
                    higher_is_better=False,
                ),
                lam,
            )
            progress.append(oracles[(selection.skill, selection.variation)].progress[select(fused)])
        points.append(
            SweepPoint(
                lam=lam,
                success_rate=sum(p >= success_threshold for p in progress) / len(progress),
                mean_progress=float(np.mean(progress)),
            )
        )
        logger.info("lambda_swept", lam=lam, success_rate=points[-1].success_rate)
    return points


def write_sweep_csv(points: Sequence[SweepPoint], path: Path) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["lambda", "success_rate", "mean_progress"])
    for point in points:
        writer.writerow([repr(point.lam), repr(point.success_rate), repr(point.mean_progress)])
    atomic_write_text(path, buffer.getvalue())
