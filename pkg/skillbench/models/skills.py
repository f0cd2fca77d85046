"""Skill labels, trajectory kinds, force levels and behavior templates."""

from dataclasses import dataclass
from enum import Enum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

TOKEN_PATTERN = r"^[a-z][a-z0-9_-]*$"


class SkillLabel(BaseModel):
    """Natural-language triple naming a skill: what to do, with what, to what."""

    model_config = ConfigDict(frozen=True)

    verb: str = Field(..., pattern=TOKEN_PATTERN, description="Skill verb, e.g. 'wipe'")
    tool: str = Field(..., pattern=TOKEN_PATTERN, description="Grasped tool, e.g. 'cloth'")
    recipient: str = Field(..., pattern=TOKEN_PATTERN, description="Object acted upon")

    @property
    def caption(self) -> str:
        """Caption form shared by the prompt and the demonstration corpus."""
        return f"{self.verb} the {self.recipient} with the {self.tool}"

    @property
    def key(self) -> str:
        return f"{self.verb}:{self.tool}:{self.recipient}"

    @classmethod
    def parse(cls, text: str) -> "SkillLabel":
        """Parse ``verb:tool:recipient``."""
        parts = text.strip().lower().split(":")
        if len(parts) != 3:
            raise ValueError(f"skill must look like verb:tool:recipient, got {text!r}")
        return cls(verb=parts[0], tool=parts[1], recipient=parts[2])


class ObjectGeometry(BaseModel):
    """Axis-aligned footprint of an object in scene pixels."""

    model_config = ConfigDict(frozen=True)

    center: tuple[float, float]
    half_extents: tuple[float, float]
    label: str = Field(default="object", min_length=1)

    @field_validator("half_extents")
    @classmethod
    def _non_negative(cls, value: tuple[float, float]) -> tuple[float, float]:
        # Zero extents are representable; operations reject them as degenerate.
        if value[0] < 0 or value[1] < 0:
            raise ValueError("half_extents must be non-negative")
        return value

    def translated(self, dx: float, dy: float) -> "ObjectGeometry":
        return self.model_copy(update={"center": (self.center[0] + dx, self.center[1] + dy)})

    def scaled(self, factor: float) -> "ObjectGeometry":
        hx, hy = self.half_extents
        return self.model_copy(update={"half_extents": (hx * factor, hy * factor)})


@dataclass(frozen=True)
class TrajectoryShape:
    """Shape parameters of a trajectory kind, in object-frame units.

    ``direction`` is the oscillation axis for periodic kinds and the travel
    direction for directional kinds (image frame: +x right, +y toward the robot).
    """

    family: Literal["circle", "oscillate", "push", "zigzag"]
    amplitude: float
    periods: float
    direction: tuple[float, float]


class TrajectoryKind(str, Enum):
    """The eleven basic trajectories of the template library."""

    SMALL_CIRCLE = "small_circle"
    LARGE_CIRCLE = "large_circle"
    FORWARD_BACK_SHORT = "forward_back_short"
    FORWARD_BACK_LONG = "forward_back_long"
    SIDE_TO_SIDE_SHORT = "side_to_side_short"
    SIDE_TO_SIDE_LONG = "side_to_side_long"
    PUSH_AWAY = "push_away"
    PULL_TOWARD = "pull_toward"
    PUSH_LEFT = "push_left"
    PUSH_RIGHT = "push_right"
    ZIGZAG_SWEEP = "zigzag_sweep"

    @property
    def phrase(self) -> str:
        return _PHRASES[self]

    @property
    def shape(self) -> TrajectoryShape:
        return _SHAPES[self]

    @property
    def index(self) -> int:
        return list(TrajectoryKind).index(self)


SHORT_AMPLITUDE = 0.5
LONG_AMPLITUDE = 0.9

_PHRASES: dict[TrajectoryKind, str] = {
    TrajectoryKind.SMALL_CIRCLE: "small circle",
    TrajectoryKind.LARGE_CIRCLE: "large circle",
    TrajectoryKind.FORWARD_BACK_SHORT: "short forward and back motion",
    TrajectoryKind.FORWARD_BACK_LONG: "long forward and back motion",
    TrajectoryKind.SIDE_TO_SIDE_SHORT: "short side to side motion",
    TrajectoryKind.SIDE_TO_SIDE_LONG: "long side to side motion",
    TrajectoryKind.PUSH_AWAY: "pushing motion away from the body",
    TrajectoryKind.PULL_TOWARD: "pulling motion toward the body",
    TrajectoryKind.PUSH_LEFT: "pushing motion to the left",
    TrajectoryKind.PUSH_RIGHT: "pushing motion to the right",
    TrajectoryKind.ZIGZAG_SWEEP: "zigzag sweep",
}

_SHAPES: dict[TrajectoryKind, TrajectoryShape] = {
    TrajectoryKind.SMALL_CIRCLE: TrajectoryShape("circle", SHORT_AMPLITUDE, 1.0, (1.0, 0.0)),
    TrajectoryKind.LARGE_CIRCLE: TrajectoryShape("circle", LONG_AMPLITUDE, 1.0, (1.0, 0.0)),
    TrajectoryKind.FORWARD_BACK_SHORT: TrajectoryShape(
        "oscillate", SHORT_AMPLITUDE, 1.0, (0.0, 1.0)
    ),
    TrajectoryKind.FORWARD_BACK_LONG: TrajectoryShape(
        "oscillate", LONG_AMPLITUDE, 1.0, (0.0, 1.0)
    ),
    TrajectoryKind.SIDE_TO_SIDE_SHORT: TrajectoryShape(
        "oscillate", SHORT_AMPLITUDE, 1.0, (1.0, 0.0)
    ),
    TrajectoryKind.SIDE_TO_SIDE_LONG: TrajectoryShape(
        "oscillate", LONG_AMPLITUDE, 1.0, (1.0, 0.0)
    ),
    TrajectoryKind.PUSH_AWAY: TrajectoryShape("push", LONG_AMPLITUDE, 0.0, (0.0, -1.0)),
    TrajectoryKind.PULL_TOWARD: TrajectoryShape("push", LONG_AMPLITUDE, 0.0, (0.0, 1.0)),
    TrajectoryKind.PUSH_LEFT: TrajectoryShape("push", LONG_AMPLITUDE, 0.0, (-1.0, 0.0)),
    TrajectoryKind.PUSH_RIGHT: TrajectoryShape("push", LONG_AMPLITUDE, 0.0, (1.0, 0.0)),
    # Lateral triangle wave (short amplitude, two periods) over a long sweep away.
    TrajectoryKind.ZIGZAG_SWEEP: TrajectoryShape("zigzag", SHORT_AMPLITUDE, 2.0, (0.0, -1.0)),
}


class ForceLevel(str, Enum):
    """Applied force levels; each maps to a contact-effect coefficient."""

    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"

    @property
    def coefficient(self) -> float:
        return _FORCE_COEFFICIENTS[self]

    @property
    def pressure_word(self) -> str:
        return _PRESSURE_WORDS[self]

    @property
    def index(self) -> int:
        return list(ForceLevel).index(self)


_FORCE_COEFFICIENTS: dict[ForceLevel, float] = {
    ForceLevel.LOW: 0.25,
    ForceLevel.MEDIUM: 0.55,
    ForceLevel.HIGH: 0.9,
}

_PRESSURE_WORDS: dict[ForceLevel, str] = {
    ForceLevel.LOW: "light",
    ForceLevel.MEDIUM: "medium",
    ForceLevel.HIGH: "firm",
}


class Template(BaseModel):
    """One parameterized hybrid position-force behavior."""

    model_config = ConfigDict(frozen=True)

    id: int = Field(..., ge=0)
    trajectory: TrajectoryKind
    force: ForceLevel
    descriptor_template: str
