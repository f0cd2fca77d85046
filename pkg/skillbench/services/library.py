"""Template library, descriptor filling and object-centric trajectories."""

import json
import math
from functools import lru_cache

import numpy as np
from pydantic import TypeAdapter

from skillbench.core.exceptions import (
    DegenerateGeometryError,
    FormatError,
    MalformedDescriptorError,
)
from skillbench.models.skills import (
    ForceLevel,
    ObjectGeometry,
    SkillLabel,
    Template,
    TrajectoryKind,
)

TOOL_SLOT = "[tool]"
RECIPIENT_SLOT = "[recipient]"
DESCRIPTOR_PATTERN = (
    "Move the [tool] in a {phrase} while applying {pressure} pressure to the [recipient]"
)

LIBRARY_SIZE = len(TrajectoryKind) * len(ForceLevel)
# Half-length of directional travel, as a fraction of the object half-extent.
LONG_TRAVEL = 0.9

_library_adapter = TypeAdapter(list[Template])


def template_id(trajectory: TrajectoryKind, force: ForceLevel) -> int:
    return 3 * trajectory.index + force.index


@lru_cache(maxsize=1)
def _library() -> tuple[Template, ...]:
    return tuple(
        Template(
            id=template_id(trajectory, force),
            trajectory=trajectory,
            force=force,
            descriptor_template=DESCRIPTOR_PATTERN.format(
                phrase=trajectory.phrase, pressure=force.pressure_word
            ),
        )
        for trajectory in TrajectoryKind
        for force in ForceLevel
    )


def build_library() -> list[Template]:
    """All 33 templates in id order."""
    return list(_library())


def get_template(trajectory: TrajectoryKind, force: ForceLevel) -> Template:
    return _library()[template_id(trajectory, force)]


def fill_descriptor(template: Template, skill: SkillLabel) -> str:
    """Substitute the skill's tool and recipient into a template descriptor."""
    text = template.descriptor_template
    for slot in (TOOL_SLOT, RECIPIENT_SLOT):
        count = text.count(slot)
        if count != 1:
            raise MalformedDescriptorError(
                f"descriptor must contain {slot} exactly once, found {count}",
                details={"template_id": template.id, "descriptor": text},
            )
    filled = text.replace(TOOL_SLOT, skill.tool).replace(RECIPIENT_SLOT, skill.recipient)
    if "[" in filled or "]" in filled:
        raise MalformedDescriptorError(
            "descriptor has unknown placeholders",
            details={"template_id": template.id, "descriptor": text},
        )
    return filled


def _triangle(u: np.ndarray) -> np.ndarray:
    """Unit triangle wave: 0 at u=0, peaks +1 at 1/4 and -1 at 3/4, period 1."""
    phase = np.mod(u, 1.0)
    return np.where(
        phase < 0.25, 4.0 * phase, np.where(phase < 0.75, 2.0 - 4.0 * phase, 4.0 * phase - 4.0)
    )


def unit_offsets(kind: TrajectoryKind, steps: int) -> np.ndarray:
    """Object-frame offsets in [-1, 1]^2 for ``steps`` evenly timed waypoints."""
    if steps < 2:
        raise ValueError("steps must be at least 2")
    shape = kind.shape
    t = np.linspace(0.0, 1.0, steps)
    dx, dy = shape.direction
    a = shape.amplitude
    if shape.family == "circle":
        angle = 2.0 * math.pi * shape.periods * t
        return np.stack([a * np.cos(angle), a * np.sin(angle)], axis=1)
    if shape.family == "oscillate":
        s = a * np.sin(2.0 * math.pi * shape.periods * t)
        return np.stack([s * dx, s * dy], axis=1)
    if shape.family == "push":
        s = LONG_TRAVEL * (2.0 * t - 1.0)
        return np.stack([s * dx, s * dy], axis=1)
    # zigzag: lateral triangle wave across a long sweep along ``direction``
    sweep = LONG_TRAVEL * (2.0 * t - 1.0)
    lateral = a * _triangle(shape.periods * t)
    return np.stack([lateral + sweep * dx, sweep * dy], axis=1)


def trajectory_waypoints(
    kind: TrajectoryKind, geometry: ObjectGeometry, steps: int
) -> np.ndarray:
    """Waypoints (steps, 2) in scene pixels, centered on and scaled by ``geometry``."""
    hx, hy = geometry.half_extents
    if hx <= 0 or hy <= 0:
        raise DegenerateGeometryError(
            "recipient has a zero half-extent",
            details={"label": geometry.label, "half_extents": [hx, hy]},
        )
    offsets = unit_offsets(kind, steps)
    center = np.asarray(geometry.center, dtype=np.float64)
    return center + offsets * np.asarray([hx, hy], dtype=np.float64)


def library_to_json(templates: list[Template]) -> str:
    """Serialize the library as one JSON document (list of templates)."""
    return json.dumps(
        [t.model_dump(mode="json") for t in templates], indent=2, sort_keys=True
    ) + "\n"


def library_from_json(text: str) -> list[Template]:
    try:
        return _library_adapter.validate_json(text)
    except ValueError as e:
        raise FormatError(f"invalid template library document: {e}")
