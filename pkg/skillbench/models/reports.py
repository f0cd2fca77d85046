"""Report documents written by the pipeline and the harness."""

from typing import Literal

from pydantic import BaseModel, Field

Method = Literal["llm", "flow", "appearance", "combined"]
METHODS: tuple[Method, ...] = ("llm", "flow", "appearance", "combined")


class SelectionReport(BaseModel):
    """Every intermediate vector of one pipeline run, for audit.

    Per-candidate lists are aligned with ``candidates``. ``llm_scores`` is
    indexed by template id.
    """

    skill: str
    variation: int = 0
    lam: float
    k: int
    llm_scores: list[float]
    candidates: list[int]
    llm_normalized: list[float]
    flow_scores: list[float] | None = None
    flow_normalized: list[float] | None = None
    appearance_scores: list[float] | None = None
    combined: list[float] | None = None
    selected_id: int | None = None
    oracle_id: int | None = None
    retrieved: list[str] = Field(default_factory=list)
    seeds: dict[str, int] = Field(default_factory=dict)

    def method_selection(self, method: Method) -> int:
        """Template a single-scorer method would pick from this run."""
        if method == "combined":
            if self.selected_id is None:
                raise ValueError("combined scores were not computed")
            return self.selected_id
        if method == "llm":
            best = max(self.llm_scores)
            return self.llm_scores.index(best)
        scores = self.flow_scores if method == "flow" else self.appearance_scores
        if scores is None:
            raise ValueError(f"{method} scores were not computed")
        # lower distance wins; ties go to the lowest id
        return min(zip(scores, self.candidates, strict=True))[1]


class TrialResult(BaseModel):
    """One method's pick on one scene variation."""

    skill: str
    variation: int
    selected_id: int
    oracle_rank: int = Field(..., ge=1, le=33)
    final_progress: float = Field(..., ge=0.0, le=1.0)
    success: bool


class MethodReport(BaseModel):
    method: Method
    trials: list[TrialResult]
    success_rate: float
    mean_progress: float

    @classmethod
    def from_trials(cls, method: Method, trials: list[TrialResult]) -> "MethodReport":
        n = len(trials)
        return cls(
            method=method,
            trials=trials,
            success_rate=sum(t.success for t in trials) / n if n else 0.0,
            mean_progress=sum(t.final_progress for t in trials) / n if n else 0.0,
        )


class OracleRanking(BaseModel):
    skill: str
    variation: int
    ranking: list[int]
    progress: list[float] = Field(..., description="Mean final progress per template id")


class ExperimentReport(BaseModel):
    """Everything ``evaluate`` produces, in one document."""

    config: dict[str, object]
    methods: list[MethodReport]
    selections: list[SelectionReport]
    oracles: list[OracleRanking]
    complete: bool = True
    failed_stage: str | None = None

    def method(self, name: Method) -> MethodReport:
        for report in self.methods:
            if report.method == name:
                return report
        raise KeyError(name)
