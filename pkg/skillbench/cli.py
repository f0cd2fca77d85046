"""Command-line entry point.

Every subcommand reads the experiment config (``--config``, defaults
otherwise), applies ``--seed`` and ``--out`` on top, and prints its result
to stdout. Logs go to stderr.
"""

import argparse
import json
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

from skillbench.config import get_settings
from skillbench.core.exceptions import InvalidInputError, SkillbenchError
from skillbench.core.logging import get_logger, setup_logging
from skillbench.core.storage import atomic_write_text
from skillbench.models.experiment import ExperimentConfig
from skillbench.models.reports import ExperimentReport
from skillbench.models.skills import SkillLabel
from skillbench.services.appearance import AppearanceEncoder
from skillbench.services.backends import open_backend
from skillbench.services.formats import read_model, write_codec, write_corpus, write_model
from skillbench.services.fusion import run_pipeline_detailed
from skillbench.services.harness import (
    CODEC_FILE,
    CORPUS_DIR,
    DEFAULT_LAMBDA_GRID,
    REPORT_FILE,
    SUMMARY_FILE,
    SWEEP_FILE,
    build_corpus,
    format_summary,
    load_or_build_corpus,
    load_or_train_codec,
    oracle_best,
    oracle_seeds,
    run_experiment,
    summary_csv,
    sweep_lambda,
    train_codec,
    write_sweep_csv,
)
from skillbench.services.lang_score import rank_templates_llm, top_k
from skillbench.services.library import build_library
from skillbench.services.retrieval import HashedDualEncoder
from skillbench.services.simulator import scene_for_skill

logger = get_logger(__name__)

Command = Callable[[argparse.Namespace, ExperimentConfig], None]


def _print_json(payload: object) -> None:
    print(json.dumps(payload, indent=2))


def _skill(args: argparse.Namespace, config: ExperimentConfig) -> SkillLabel:
    if args.skill:
        try:
            return SkillLabel.parse(args.skill)
        except ValueError as e:
            raise InvalidInputError(str(e), stage="config") from None
    return config.skill_labels()[0]


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file (or defaults) with ``--seed``/``--out`` applied."""
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides: dict[str, object] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    if not overrides:
        return config
    return ExperimentConfig.from_data({**config.model_dump(), **overrides})


def cmd_gen_corpus(args: argparse.Namespace, config: ExperimentConfig) -> None:
    records = build_corpus(config)
    directory = config.output_dir / CORPUS_DIR
    write_corpus(directory, records)
    _print_json({"records": len(records), "path": str(directory)})


def cmd_train_codec(args: argparse.Namespace, config: ExperimentConfig) -> None:
    result = train_codec(config)
    path = config.output_dir / CODEC_FILE
    write_codec(path, result.params)
    _print_json(
        {
            "path": str(path),
            "initial_recon_mse": result.initial_recon,
            "final_recon_mse": result.final_recon,
            "best_epoch": result.best_epoch,
        }
    )


def cmd_oracle(args: argparse.Namespace, config: ExperimentConfig) -> None:
    skill = _skill(args, config)
    scene = scene_for_skill(skill, args.variation, config.seed)
    ranking = oracle_best(
        skill,
        build_library(),
        scene,
        oracle_seeds(config, skill, args.variation),
        steps=config.episode_frames + 1,
        variation=args.variation,
        max_workers=config.max_workers,
    )
    print(ranking.model_dump_json(indent=2))


def cmd_score(args: argparse.Namespace, config: ExperimentConfig) -> None:
    skill = _skill(args, config)
    with open_backend(config.llm_backend) as backend:
        scores = rank_templates_llm(backend, skill, build_library())
    _print_json(
        {"skill": skill.key, "scores": list(scores.scores), "top_k": top_k(scores, config.k)}
    )


def cmd_select(args: argparse.Namespace, config: ExperimentConfig) -> None:
    skill = _skill(args, config)
    library = build_library()
    scene = scene_for_skill(skill, args.variation, config.seed)
    oracle = None
    if args.with_oracle:
        oracle = oracle_best(
            skill,
            library,
            scene,
            oracle_seeds(config, skill, args.variation),
            steps=config.episode_frames + 1,
            variation=args.variation,
        ).ranking
    with open_backend(config.llm_backend) as backend:
        run = run_pipeline_detailed(
            skill,
            library,
            load_or_build_corpus(config),
            load_or_train_codec(config),
            backend,
            HashedDualEncoder(config.seed),
            scene,
            lam=config.lam,
            k=config.k,
            m=config.retrieval_m,
            seed=config.seed,
            variation=args.variation,
            steps=config.episode_frames + 1,
            appearance_encoder=AppearanceEncoder(config.seed),
            oracle_ranking=oracle,
            max_workers=config.max_workers,
        )
    write_model(config.output_dir / f"selection_{skill.verb}_{args.variation}.json", run.report)
    print(run.report.model_dump_json(indent=2))


def cmd_evaluate(args: argparse.Namespace, config: ExperimentConfig) -> None:
    print(format_summary(run_experiment(config)), end="")


def _read_report(config: ExperimentConfig) -> ExperimentReport:
    return read_model(config.output_dir / REPORT_FILE, ExperimentReport)


def cmd_report(args: argparse.Namespace, config: ExperimentConfig) -> None:
    report = _read_report(config)
    atomic_write_text(config.output_dir / SUMMARY_FILE, summary_csv(report))
    print(format_summary(report), end="")


def _lambdas(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("lambdas must be non-negative")
    return values


def cmd_sweep(args: argparse.Namespace, config: ExperimentConfig) -> None:
    points = sweep_lambda(_read_report(config), args.lambdas)
    write_sweep_csv(points, config.output_dir / SWEEP_FILE)
    _print_json([point._asdict() for point in points])


def cmd_serve(args: argparse.Namespace, config: ExperimentConfig) -> None:
    import uvicorn

    settings = get_settings()
    uvicorn.run(
        "skillbench.main:app",
        host=settings.host,
        port=settings.port,
        reload=settings.reload,
        workers=settings.workers,
        log_level=settings.log_level.lower(),
    )


def cmd_config_schema(args: argparse.Namespace, config: ExperimentConfig) -> None:
    print(ExperimentConfig.json_schema_text(), end="")


def build_parser() -> argparse.ArgumentParser:
    # Global flags are accepted before or after the subcommand.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", type=Path, default=argparse.SUPPRESS, help="Experiment config JSON"
    )
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Base seed (u64)")
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="Output directory")

    parser = argparse.ArgumentParser(
        prog="skillbench",
        description="Behavior-template selection workbench",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func: Command, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, parents=[common])
        p.set_defaults(func=func)
        return p

    add("gen-corpus", cmd_gen_corpus, "Synthesize the demonstration corpus")
    add("train-codec", cmd_train_codec, "Train the flow codec")
    for name, func, help_text in (
        ("oracle", cmd_oracle, "Rank all templates by simulated task progress"),
        ("select", cmd_select, "Run the selection pipeline for one skill"),
    ):
        p = add(name, func, help_text)
        p.add_argument("--skill", help="verb:tool:recipient (default: first configured skill)")
        p.add_argument("--variation", type=int, default=0, help="Scene variation index")
        if name == "select":
            p.add_argument("--with-oracle", action="store_true", help="Also report the oracle pick")
    score = add("score", cmd_score, "Rank templates with the language model")
    score.add_argument("--skill", help="verb:tool:recipient (default: first configured skill)")
    add("evaluate", cmd_evaluate, "Run the full experiment and write its report")
    add("report", cmd_report, "Summarize an existing report")
    sweep = add("sweep", cmd_sweep, "Re-fuse a report's scores over fusion weights")
    sweep.add_argument(
        "--lambdas",
        type=_lambdas,
        default=list(DEFAULT_LAMBDA_GRID),
        help="Comma-separated weights",
    )
    add("serve", cmd_serve, "Start the scoring service")
    add("config-schema", cmd_config_schema, "Print the config file JSON schema")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Run one subcommand; 0 on success, 2 on a domain error, 1 otherwise."""
    args = build_parser().parse_args(argv)
    for name in ("config", "seed", "out"):
        if not hasattr(args, name):
            setattr(args, name, None)
    setup_logging()
    try:
        config = resolve_config(args)
        args.func(args, config)
    except SkillbenchError as e:
        print(f"error[{e.stage or args.command}]: {e.message}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.exception("command_failed", command=args.command)
        print(f"error[{args.command}]: {e}", file=sys.stderr)
        return 1
    return 0
