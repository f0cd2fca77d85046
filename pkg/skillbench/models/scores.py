"""Per-template score vectors shared by every scorer."""

import math

from pydantic import BaseModel, ConfigDict, model_validator


class ScoreVector(BaseModel):
    """Scores for a set of templates plus how to read them.

    ``normalization`` is the (min, max) pair used by min-max normalization, or
    ``None`` for raw scores.
    """

    model_config = ConfigDict(frozen=True)

    ids: tuple[int, ...]
    scores: tuple[float, ...]
    higher_is_better: bool = True
    normalization: tuple[float, float] | None = None

    @model_validator(mode="after")
    def _check(self) -> "ScoreVector":
        if len(self.ids) != len(self.scores):
            raise ValueError("ids and scores must have the same length")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("template ids must be unique")
        if not all(math.isfinite(s) for s in self.scores):
            raise ValueError("scores must be finite")
        return self

    def __len__(self) -> int:
        return len(self.ids)

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.ids, self.scores, strict=True))

    def subset(self, ids: tuple[int, ...] | list[int]) -> "ScoreVector":
        """Restrict to ``ids`` (in the given order)."""
        lookup = self.as_dict()
        return self.model_copy(
            update={"ids": tuple(ids), "scores": tuple(lookup[i] for i in ids)}
        )
