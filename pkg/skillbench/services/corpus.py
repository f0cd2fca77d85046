"""Synthetic human-demonstration corpus."""

from dataclasses import dataclass

import numpy as np

from skillbench.core.logging import get_logger
from skillbench.core.seeding import make_rng
from skillbench.models.skills import ForceLevel, SkillLabel, Template, TrajectoryKind
from skillbench.services.library import build_library, get_template, trajectory_waypoints
from skillbench.services.simulator import (
    FlowVideo,
    Task,
    generic_scene,
    run_waypoints,
    scene_for_skill,
    task_for_verb,
)

logger = get_logger(__name__)

DEMO_JITTER_PX = 1.0
JITTER_CONTROL_POINTS = 6
DEFAULT_STEPS = 61

EXPERT_TEMPLATES: dict[Task, tuple[TrajectoryKind, ForceLevel]] = {
    "wipe": (TrajectoryKind.SIDE_TO_SIDE_LONG, ForceLevel.HIGH),
    "scrape": (TrajectoryKind.PUSH_AWAY, ForceLevel.HIGH),
    "stir": (TrajectoryKind.LARGE_CIRCLE, ForceLevel.HIGH),
    "spread": (TrajectoryKind.SIDE_TO_SIDE_LONG, ForceLevel.HIGH),
}

DISTRACTOR_VERBS = ("cut", "peel", "slice", "scrub", "pour", "mash", "flip")
DISTRACTOR_TOOLS = ("knife", "peeler", "brush", "ladle", "masher", "tongs", "whisk")
DISTRACTOR_RECIPIENTS = ("potato", "carrot", "onion", "bowl", "egg", "pot", "apple")

# demo scene variations never collide with evaluation variations
_DEMO_VARIATION_OFFSET = 1_000


@dataclass(frozen=True)
class DemoRecord:
    """One demonstration clip with its caption and visible objects."""

    record_id: str
    video: FlowVideo
    appearance: np.ndarray
    text: str
    objects: frozenset[str]
    expert: bool

    def __post_init__(self) -> None:
        if not self.objects:
            raise ValueError("a demonstration must show at least one object")


def expert_template(skill: SkillLabel) -> Template:
    trajectory, force = EXPERT_TEMPLATES[task_for_verb(skill.verb)]
    return get_template(trajectory, force)


def jittered_waypoints(
    waypoints: np.ndarray, rng: np.random.Generator, sigma: float = DEMO_JITTER_PX
) -> np.ndarray:
    """Add a smooth random offset: Gaussian at a few control points, linear in between."""
    control_t = np.linspace(0.0, 1.0, JITTER_CONTROL_POINTS)
    control = rng.normal(0.0, sigma, size=(JITTER_CONTROL_POINTS, 2))
    t = np.linspace(0.0, 1.0, len(waypoints))
    offset = np.stack(
        [np.interp(t, control_t, control[:, 0]), np.interp(t, control_t, control[:, 1])],
        axis=1,
    )
    return waypoints + offset


def _pick(rng: np.random.Generator, pool: tuple[str, ...], exclude: set[str]) -> str:
    options = [token for token in pool if token not in exclude]
    return options[int(rng.integers(len(options)))]


def _expert_record(skill: SkillLabel, index: int, steps: int, seed: int) -> DemoRecord:
    rng = make_rng(seed, "demo", skill.key, index)
    scene = scene_for_skill(skill, _DEMO_VARIATION_OFFSET + index, seed)
    template = expert_template(skill)
    waypoints = jittered_waypoints(
        trajectory_waypoints(template.trajectory, scene.recipient, steps), rng
    )
    episode = run_waypoints(
        scene, waypoints, template.force.coefficient, int(rng.integers(2**63))
    )
    return DemoRecord(
        record_id=f"{skill.verb}-{skill.tool}-{skill.recipient}-expert-{index:03d}",
        video=episode.video,
        appearance=episode.appearance,
        text=skill.caption,
        objects=frozenset({skill.tool, skill.recipient}),
        expert=True,
    )


def _distractor_record(
    skill: SkillLabel, index: int, steps: int, seed: int, library: list[Template]
) -> DemoRecord:
    rng = make_rng(seed, "distractor", skill.key, index)
    exclude = {skill.verb, skill.tool, skill.recipient}
    other = SkillLabel(
        verb=_pick(rng, DISTRACTOR_VERBS, exclude),
        tool=_pick(rng, DISTRACTOR_TOOLS, exclude),
        recipient=_pick(rng, DISTRACTOR_RECIPIENTS, exclude),
    )
    template = library[int(rng.integers(len(library)))]
    scene = generic_scene(other.recipient, index, seed)
    waypoints = jittered_waypoints(
        trajectory_waypoints(template.trajectory, scene.recipient, steps), rng
    )
    episode = run_waypoints(
        scene, waypoints, template.force.coefficient, int(rng.integers(2**63))
    )
    return DemoRecord(
        record_id=f"{skill.verb}-{skill.tool}-{skill.recipient}-other-{index:03d}",
        video=episode.video,
        appearance=episode.appearance,
        text=other.caption,
        objects=frozenset({other.tool, other.recipient}),
        expert=False,
    )


def synth_demo_corpus(
    skills: list[SkillLabel], per_skill: int, seed: int, steps: int = DEFAULT_STEPS
) -> list[DemoRecord]:
    """``per_skill`` expert and ``per_skill`` off-task demos for each skill."""
    if per_skill < 1:
        raise ValueError("per_skill must be at least 1")
    library = build_library()
    records: list[DemoRecord] = []
    for skill in skills:
        records.extend(_expert_record(skill, i, steps, seed) for i in range(per_skill))
        records.extend(
            _distractor_record(skill, i, steps, seed, library) for i in range(per_skill)
        )
    logger.info("demo_corpus_generated", skills=len(skills), records=len(records))
    return records
