"""Top-down 2D kitchen simulator.

The scene is a 64x64 pixel table seen from above. Cell ``(r, c)`` covers
``[c, c+1) x [r, r+1)`` and is represented by its center ``(c+0.5, r+0.5)``;
x grows to the right, y grows toward the robot.

Each frame the tool moves toward the next waypoint (at most 4 px), pixels
under the tool report the tool velocity as optic flow, particles the tool
touches are displaced by the force coefficient times that velocity, and a
wiping tool marks recipient cells clean with probability equal to the force
coefficient. Flow is synthesized analytically and averaged 2x2 to 32x32.
"""

import time
from dataclasses import dataclass, field, replace
from typing import Literal, NamedTuple, cast

import numpy as np

from skillbench.core.exceptions import (
    DegenerateGeometryError,
    NoParticlesError,
    UnknownTaskError,
)
from skillbench.core.logging import get_logger
from skillbench.core.metrics import TEMPLATE_EXECUTIONS
from skillbench.core.seeding import make_rng
from skillbench.models.skills import ObjectGeometry, SkillLabel, Template
from skillbench.services.library import trajectory_waypoints

logger = get_logger(__name__)

Task = Literal["wipe", "scrape", "stir", "spread"]
TASKS: tuple[Task, ...] = ("wipe", "scrape", "stir", "spread")

SCENE_SIZE = 64
FLOW_SIZE = 32
APPEARANCE_SIZE = 16
MAX_TOOL_SPEED = 4.0
EDGE_BAND = 4.0

BACKGROUND_LEVEL = 0.0
RECIPIENT_LEVEL = 0.4
TOOL_LEVEL = 0.8
PARTICLE_LEVEL = 1.0

_CELL_CENTERS = np.arange(SCENE_SIZE, dtype=np.float64) + 0.5


@dataclass(frozen=True)
class FlowVideo:
    """Dense flow frames ``(F, H, W, 2)`` in px/frame, float32, (dx, dy) last."""

    frames: np.ndarray

    def __post_init__(self) -> None:
        if self.frames.ndim != 4 or self.frames.shape[-1] != 2:
            raise ValueError(f"flow frames must be (F, H, W, 2), got {self.frames.shape}")
        if self.frames.dtype != np.float32:
            object.__setattr__(self, "frames", self.frames.astype(np.float32))

    @property
    def frame_count(self) -> int:
        return int(self.frames.shape[0])

    @property
    def height(self) -> int:
        return int(self.frames.shape[1])

    @property
    def width(self) -> int:
        return int(self.frames.shape[2])


@dataclass(frozen=True)
class ProgressTrace:
    """Task progress after the initial state and after every frame."""

    values: np.ndarray

    @property
    def final(self) -> float:
        return float(self.values[-1])

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass
class Scene:
    """Mutable simulator state for one episode.

    ``particles`` is ``(N, 2)`` float64 positions; ``coverage`` marks cleaned
    (or sauced) cells and only ever holds ``True`` inside the recipient.
    """

    task: Task | None
    recipient: ObjectGeometry
    tool_half_extents: tuple[float, float]
    tool_position: tuple[float, float]
    particles: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    particle_kinds: tuple[str, ...] = ()
    coverage: np.ndarray = field(
        default_factory=lambda: np.zeros((SCENE_SIZE, SCENE_SIZE), dtype=bool)
    )
    initial_particle_count: int = 0
    initial_spread: float = 0.0

    def copy(self) -> "Scene":
        return replace(
            self, particles=self.particles.copy(), coverage=self.coverage.copy()
        )

    def recipient_mask(self) -> np.ndarray:
        return footprint_mask(self.recipient.center, self.recipient.half_extents)

    def tool_mask(self) -> np.ndarray:
        return footprint_mask(self.tool_position, self.tool_half_extents)


class Episode(NamedTuple):
    video: FlowVideo
    progress: ProgressTrace
    scene: Scene
    appearance: np.ndarray


def footprint_mask(center: tuple[float, float], half_extents: tuple[float, float]) -> np.ndarray:
    """Cells whose centers lie inside the axis-aligned box."""
    cx, cy = center
    hx, hy = half_extents
    cols = np.abs(_CELL_CENTERS - cx) <= hx
    rows = np.abs(_CELL_CENTERS - cy) <= hy
    mask: np.ndarray = rows[:, None] & cols[None, :]
    return mask


def _particles_under(scene: Scene) -> np.ndarray:
    if scene.particles.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    offset = np.abs(scene.particles - np.asarray(scene.tool_position))
    hx, hy = scene.tool_half_extents
    under: np.ndarray = (offset[:, 0] <= hx) & (offset[:, 1] <= hy)
    return under


def _particle_cells(particles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cells = np.clip(np.floor(particles).astype(np.int64), 0, SCENE_SIZE - 1)
    return cells[:, 1], cells[:, 0]


def _spread(particles: np.ndarray) -> float:
    if particles.shape[0] == 0:
        return 0.0
    centered = particles - particles.mean(axis=0)
    return float(np.mean(np.sum(centered**2, axis=1)))


def render(scene: Scene) -> np.ndarray:
    """16x16 grayscale frame: recipient silhouette, tool box, particle dots."""
    image = np.full((SCENE_SIZE, SCENE_SIZE), BACKGROUND_LEVEL, dtype=np.float64)
    image[scene.recipient_mask()] = RECIPIENT_LEVEL
    image[scene.tool_mask()] = TOOL_LEVEL
    if scene.particles.shape[0]:
        rows, cols = _particle_cells(scene.particles)
        image[rows, cols] = PARTICLE_LEVEL
    block = SCENE_SIZE // APPEARANCE_SIZE
    return image.reshape(APPEARANCE_SIZE, block, APPEARANCE_SIZE, block).mean(axis=(1, 3))


def _downsample_flow(flow: np.ndarray) -> np.ndarray:
    block = SCENE_SIZE // FLOW_SIZE
    return flow.reshape(FLOW_SIZE, block, FLOW_SIZE, block, 2).mean(axis=(1, 3))


def wipe_coverage(scene: Scene) -> float:
    """Fraction of the recipient footprint marked clean."""
    mask = scene.recipient_mask()
    total = int(mask.sum())
    if total == 0:
        raise DegenerateGeometryError(
            "recipient footprint covers no cells",
            details={"recipient": scene.recipient.label},
        )
    return int(np.count_nonzero(scene.coverage & mask)) / total


def scrape_cleared(scene: Scene) -> float:
    """Fraction of the initial particles inside (or pushed past) the edge band."""
    if scene.initial_particle_count == 0:
        raise NoParticlesError("scene started without particles")
    if scene.particles.shape[0] == 0:
        return 0.0
    hx, hy = scene.recipient.half_extents
    offset = np.abs(scene.particles - np.asarray(scene.recipient.center))
    inset = np.minimum(hx - offset[:, 0], hy - offset[:, 1])
    return int(np.count_nonzero(inset <= EDGE_BAND)) / scene.initial_particle_count


def stir_dispersion(scene: Scene) -> float:
    """Gain in particle variance, relative to half a uniform spread over the recipient."""
    if scene.initial_particle_count == 0:
        raise NoParticlesError("scene started without particles")
    hx, hy = scene.recipient.half_extents
    reference = 0.5 * (hx**2 + hy**2) / 3.0
    if reference <= 0:
        raise DegenerateGeometryError("recipient has a zero half-extent")
    gain = (_spread(scene.particles) - scene.initial_spread) / reference
    return float(np.clip(gain, 0.0, 1.0))


def task_progress(scene: Scene) -> float:
    if scene.task in ("wipe", "spread"):
        return wipe_coverage(scene)
    if scene.task == "scrape":
        return scrape_cleared(scene)
    if scene.task == "stir":
        return stir_dispersion(scene)
    raise UnknownTaskError(f"no progress metric for task {scene.task!r}")


def _has_metric(scene: Scene) -> bool:
    return scene.task is not None


def run_waypoints(
    scene: Scene, waypoints: np.ndarray, force_coefficient: float, seed: int
) -> Episode:
    """Drive the tool through ``waypoints`` on a copy of ``scene``."""
    start = time.perf_counter()
    state = scene.copy()
    rng = make_rng(seed, "episode")
    recipient = state.recipient_mask()

    state.tool_position = (float(waypoints[0, 0]), float(waypoints[0, 1]))
    progress = [task_progress(state) if _has_metric(state) else 0.0]
    appearance = [render(state)]
    frames = np.zeros((len(waypoints) - 1, FLOW_SIZE, FLOW_SIZE, 2), dtype=np.float32)

    for i in range(1, len(waypoints)):
        flow = np.zeros((SCENE_SIZE, SCENE_SIZE, 2), dtype=np.float64)
        old = np.asarray(state.tool_position)
        step = waypoints[i] - old
        norm = float(np.hypot(step[0], step[1]))
        if norm > MAX_TOOL_SPEED:
            step = step * (MAX_TOOL_SPEED / norm)
        new = np.clip(old + step, 0.0, float(SCENE_SIZE))
        velocity = new - old

        flow[state.tool_mask()] = velocity
        state.tool_position = (float(new[0]), float(new[1]))

        under = _particles_under(state)
        holding = bool(under.any())
        if holding:
            push = force_coefficient * velocity
            rows, cols = _particle_cells(state.particles[under])
            flow[rows, cols] = push
            state.particles[under] = np.clip(
                state.particles[under] + push, 0.0, SCENE_SIZE - 1e-6
            )

        if state.task == "wipe" or (state.task == "spread" and holding):
            touched = state.tool_mask() & recipient
            hits = rng.random(int(touched.sum())) < force_coefficient
            state.coverage[np.nonzero(touched)] |= hits

        frames[i - 1] = _downsample_flow(flow)
        progress.append(task_progress(state) if _has_metric(state) else 0.0)
        appearance.append(render(state))

    TEMPLATE_EXECUTIONS.labels(task=state.task or "none").inc()
    logger.debug(
        "template_executed",
        task=state.task,
        frames=frames.shape[0],
        final_progress=progress[-1],
        duration_ms=round((time.perf_counter() - start) * 1000, 2),
    )
    return Episode(
        video=FlowVideo(frames),
        progress=ProgressTrace(np.asarray(progress, dtype=np.float64)),
        scene=state,
        appearance=np.asarray(appearance, dtype=np.float32),
    )


def run_template(scene: Scene, template: Template, steps: int, seed: int) -> Episode:
    waypoints = trajectory_waypoints(template.trajectory, scene.recipient, steps)
    return run_waypoints(scene, waypoints, template.force.coefficient, seed)


def execute_template(
    scene: Scene, template: Template, steps: int, seed: int
) -> tuple[FlowVideo, ProgressTrace, Scene]:
    """Execute ``template`` for ``steps`` waypoints (``steps - 1`` flow frames)."""
    episode = run_template(scene, template, steps, seed)
    return episode.video, episode.progress, episode.scene


# Reference layouts, centered on the table; variations jitter them.
_TOOL_HALF_EXTENTS: dict[Task, tuple[float, float]] = {
    "wipe": (4.0, 8.0),
    "scrape": (12.0, 2.0),
    "stir": (3.0, 3.0),
    "spread": (4.0, 8.0),
}
_RECIPIENT_HALF_EXTENTS: dict[Task, tuple[float, float]] = {
    "wipe": (24.0, 10.0),
    "scrape": (20.0, 14.0),
    "stir": (16.0, 16.0),
    "spread": (18.0, 12.0),
}
GENERIC_RECIPIENT = (14.0, 10.0)
GENERIC_TOOL = (3.0, 5.0)


def task_for_verb(verb: str) -> Task:
    if verb not in TASKS:
        raise UnknownTaskError(
            f"no simulated scene for verb {verb!r}", details={"known": list(TASKS)}
        )
    return cast(Task, verb)


def _initial_particles(
    task: Task, center: np.ndarray, half_extents: tuple[float, float], rng: np.random.Generator
) -> np.ndarray:
    if task == "scrape":
        return center + rng.uniform(-6.0, 6.0, size=(12, 2))
    if task == "stir":
        radius = 2.5 * np.sqrt(rng.random(20))
        angle = rng.uniform(0.0, 2.0 * np.pi, size=20)
        blob = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=1)
        # heap near the rim, on the path of a large stirring circle
        return center + np.asarray([0.85 * half_extents[0], 0.0]) + blob
    if task == "spread":
        return center + rng.uniform(-2.0, 2.0, size=(16, 2))
    return np.zeros((0, 2))


def make_scene(
    task: Task | None,
    recipient: ObjectGeometry,
    tool_half_extents: tuple[float, float],
    particles: np.ndarray | None = None,
    particle_kind: str = "particle",
) -> Scene:
    """Scene with the tool parked on the recipient center."""
    points = np.zeros((0, 2)) if particles is None else np.asarray(particles, dtype=np.float64)
    points = np.clip(points, 0.0, SCENE_SIZE - 1e-6)
    return Scene(
        task=task,
        recipient=recipient,
        tool_half_extents=tool_half_extents,
        tool_position=recipient.center,
        particles=points,
        particle_kinds=(particle_kind,) * points.shape[0],
        initial_particle_count=int(points.shape[0]),
        initial_spread=_spread(points),
    )


def scene_for_skill(skill: SkillLabel, variation: int, seed: int) -> Scene:
    """Seeded variation of the reference scene for ``skill``'s verb.

    Variations shift the recipient by up to 3 px, rescale it by 0.9-1.1 and
    redraw the particle layout.
    """
    task = task_for_verb(skill.verb)
    rng = make_rng(seed, "scene", skill.key, variation)
    shift = rng.uniform(-3.0, 3.0, size=2)
    scale = float(rng.uniform(0.9, 1.1))
    hx, hy = _RECIPIENT_HALF_EXTENTS[task]
    center = np.asarray([SCENE_SIZE / 2, SCENE_SIZE / 2]) + shift
    recipient = ObjectGeometry(
        center=(float(center[0]), float(center[1])),
        half_extents=(hx * scale, hy * scale),
        label=skill.recipient,
    )
    kind = {"scrape": "pepper", "stir": "spice", "spread": "sauce"}.get(task, "particle")
    return make_scene(
        task,
        recipient,
        _TOOL_HALF_EXTENTS[task],
        particles=_initial_particles(task, center, recipient.half_extents, rng),
        particle_kind=kind,
    )


def generic_scene(label: str, variation: int, seed: int) -> Scene:
    """Scene without a progress metric, used for off-task demonstrations."""
    rng = make_rng(seed, "generic-scene", label, variation)
    center = np.asarray([SCENE_SIZE / 2, SCENE_SIZE / 2]) + rng.uniform(-6.0, 6.0, size=2)
    scale = float(rng.uniform(0.8, 1.2))
    recipient = ObjectGeometry(
        center=(float(center[0]), float(center[1])),
        half_extents=(GENERIC_RECIPIENT[0] * scale, GENERIC_RECIPIENT[1] * scale),
        label=label,
    )
    return make_scene(None, recipient, GENERIC_TOOL)
