"""Bag-of-flow-codes histograms and template scoring against demonstrations."""

import time
from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np

from skillbench.core.exceptions import (
    EmptyDemoSetError,
    EmptyVideoError,
    UnnormalizedInputError,
)
from skillbench.core.logging import get_logger
from skillbench.core.metrics import SCORING_LATENCY
from skillbench.models.scores import ScoreVector
from skillbench.services.codec import CodecParams, code_grids
from skillbench.services.simulator import FlowVideo

logger = get_logger(__name__)

NORMALIZATION_TOLERANCE = 1e-6


@dataclass(frozen=True)
class FlowHistogram:
    """Normalized code counts; ``total_codes`` is the number of code slots counted."""

    bins: np.ndarray
    total_codes: int = 0

    def __post_init__(self) -> None:
        if np.any(self.bins < 0):
            raise ValueError("histogram bins must be non-negative")

    @classmethod
    def from_codes(cls, codes: np.ndarray, bins: int) -> "FlowHistogram":
        """Count every index in ``codes``, in any shape, into ``bins`` bins."""
        flat = np.asarray(codes).ravel()
        if flat.size == 0:
            raise EmptyVideoError("no codes to count")
        counts = np.bincount(flat, minlength=bins)
        return cls(bins=counts / flat.size, total_codes=int(flat.size))


def video_histogram(video: FlowVideo, params: CodecParams) -> FlowHistogram:
    """Histogram over every code slot of every frame (order and position free)."""
    if video.frame_count == 0:
        raise EmptyVideoError("video has no frames")
    return FlowHistogram.from_codes(code_grids(video.frames, params), params.codebook_size)


def _check_normalized(histogram: FlowHistogram, name: str) -> None:
    total = float(np.sum(histogram.bins))
    if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
        raise UnnormalizedInputError(
            f"histogram {name} sums to {total}", details={"sum": total}
        )


def histogram_distance(a: FlowHistogram, b: FlowHistogram) -> float:
    """Euclidean distance between two normalized histograms."""
    _check_normalized(a, "a")
    _check_normalized(b, "b")
    if a.bins.shape != b.bins.shape:
        raise ValueError("histograms have different bin counts")
    return float(np.sqrt(np.sum((a.bins - b.bins) ** 2)))


def _mean_distance(target: FlowHistogram, demos: Sequence[FlowHistogram]) -> float:
    if not demos:
        raise EmptyDemoSetError("no demonstrations to compare against")
    total = 0.0
    for demo in demos:
        total += histogram_distance(target, demo)
    return total / len(demos)


def score_template_flow(
    exec_video: FlowVideo, demos: Sequence[FlowVideo], params: CodecParams
) -> float:
    """Mean histogram distance from one execution to each demonstration."""
    if not demos:
        raise EmptyDemoSetError("no demonstrations to compare against")
    demo_histograms = [video_histogram(demo, params) for demo in demos]
    return _mean_distance(video_histogram(exec_video, params), demo_histograms)


def score_candidates_flow(
    executions: Mapping[int, FlowVideo], demos: Sequence[FlowVideo], params: CodecParams
) -> ScoreVector:
    """Distances for every executed template (lower is better), in id order."""
    if not demos:
        raise EmptyDemoSetError("no demonstrations to compare against")
    start = time.perf_counter()
    demo_histograms = [video_histogram(demo, params) for demo in demos]
    ids = tuple(sorted(executions))
    scores = tuple(
        _mean_distance(video_histogram(executions[i], params), demo_histograms) for i in ids
    )
    SCORING_LATENCY.labels(scorer="flow").observe(time.perf_counter() - start)
    return ScoreVector(ids=ids, scores=scores, higher_is_better=False)
