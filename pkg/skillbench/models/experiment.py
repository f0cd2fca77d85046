"""Harness configuration file schema."""

import json
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from skillbench.core.exceptions import ConfigError
from skillbench.models.reports import METHODS, Method
from skillbench.models.skills import SkillLabel

DEFAULT_SKILLS = (
    "wipe:cloth:plate",
    "scrape:scraper:board",
    "stir:spoon:pan",
    "spread:spatula:bread",
)


class MethodToggles(BaseModel):
    model_config = ConfigDict(extra="forbid")

    llm: bool = True
    flow: bool = True
    appearance: bool = True
    combined: bool = True

    def enabled(self) -> list[Method]:
        return [name for name in METHODS if getattr(self, name)]


class CorpusConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    per_skill: int = Field(default=6, ge=1, description="Expert and distractor demos per skill")


class CodecConfig(BaseModel):
    """Flow codec training parameters."""

    model_config = ConfigDict(extra="forbid")

    frames: int = Field(default=10_000, ge=1)
    epochs: int = Field(default=200, ge=0)
    lr: float = Field(default=0.05, gt=0)
    beta: float = Field(default=0.25, gt=0)
    batch_size: int = Field(default=32, ge=1)
    codebook_size: int = Field(default=64, ge=1)
    latent_dim: int = Field(default=8, ge=1)
    hidden: int = Field(default=16, ge=1)


class ExperimentConfig(BaseModel):
    """One evaluation run, loaded from ``--config``.

    ``seed`` is the only source of randomness; every stage derives its own
    stream from it.
    """

    model_config = ConfigDict(extra="forbid")

    skills: list[str] = Field(default_factory=lambda: list(DEFAULT_SKILLS), min_length=1)
    methods: MethodToggles = Field(default_factory=MethodToggles)
    lam: float = Field(default=0.1, ge=0.0, description="LLM weight of the fused score")
    k: int = Field(default=5, ge=1, le=33)
    retrieval_m: int = Field(default=5, ge=1)
    variations: int = Field(default=5, ge=1)
    episode_frames: int = Field(default=60, ge=1)
    oracle_seeds: int = Field(default=3, ge=1)
    success_threshold: float = Field(default=0.5, ge=0.0, le=1.0)
    llm_backend: str = Field(default="topical", pattern=r"^(ngram|topical|remote)$")
    seed: int = Field(default=0, ge=0, lt=2**64)
    corpus: CorpusConfig = Field(default_factory=CorpusConfig)
    codec: CodecConfig = Field(default_factory=CodecConfig)
    output_dir: Path = Path("runs/default")
    max_workers: int = Field(default=1, ge=1)

    @field_validator("skills")
    @classmethod
    def _parse_skills(cls, value: list[str]) -> list[str]:
        for text in value:
            try:
                SkillLabel.parse(text)
            except ValueError as e:
                raise ValueError(f"bad skill {text!r}: {e}") from None
        return value

    def skill_labels(self) -> list[SkillLabel]:
        return [SkillLabel.parse(text) for text in self.skills]

    @classmethod
    def load(cls, path: Path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}", stage="config")
        return cls.from_data(data)

    @classmethod
    def from_data(cls, data: object) -> "ExperimentConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(
                "invalid experiment config",
                details={"errors": [err["msg"] for err in e.errors()]},
                stage="config",
            )

    @classmethod
    def json_schema_text(cls) -> str:
        return json.dumps(cls.model_json_schema(), indent=2, sort_keys=True) + "\n"
