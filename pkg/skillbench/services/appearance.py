"""Appearance-only baseline scorer.

Embeds a clip from 16 evenly spaced grayscale frames and compares clips by
cosine distance. It never looks at flow, so two executions that render the
same frames score the same however differently they move.
"""

import time
from collections.abc import Mapping, Sequence

import numpy as np

from skillbench.core.exceptions import EmptyDemoSetError, EmptyVideoError
from skillbench.core.metrics import SCORING_LATENCY
from skillbench.core.seeding import make_rng
from skillbench.models.scores import ScoreVector
from skillbench.services.retrieval import EMBEDDING_DIM, unit
from skillbench.services.simulator import APPEARANCE_SIZE

SUBSAMPLED_FRAMES = 16


def subsample_indices(frame_count: int) -> list[int]:
    """``round(i * (n - 1) / 15)`` for ``i = 0..15``, halves rounded up."""
    if frame_count < 1:
        raise ValueError("frame_count must be at least 1")
    last = SUBSAMPLED_FRAMES - 1
    return [(2 * i * (frame_count - 1) + last) // (2 * last) for i in range(SUBSAMPLED_FRAMES)]


class AppearanceEncoder:
    """Fixed seeded random projection of the mean subsampled frame."""

    def __init__(self, seed: int = 0, pixels: int = APPEARANCE_SIZE * APPEARANCE_SIZE) -> None:
        rng = make_rng(seed, "appearance-projection")
        self.projection = rng.standard_normal((EMBEDDING_DIM, pixels)) / np.sqrt(pixels)

    def embed(self, frames: np.ndarray) -> np.ndarray:
        if len(frames) == 0:
            raise EmptyVideoError("clip has no appearance frames")
        stack = np.asarray(frames, dtype=np.float64)
        mean_frame = stack[subsample_indices(stack.shape[0])].mean(axis=0)
        return unit(self.projection @ mean_frame.ravel())


def video_embedding_appearance(
    frames: np.ndarray, encoder: AppearanceEncoder | None = None
) -> np.ndarray:
    return (encoder or AppearanceEncoder()).embed(frames)


def _distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.clip(1.0 - np.dot(a, b), 0.0, 2.0))


def score_template_appearance(
    exec_frames: np.ndarray,
    demos: Sequence[np.ndarray],
    encoder: AppearanceEncoder | None = None,
) -> float:
    """Mean cosine distance from the execution to each demonstration."""
    if not demos:
        raise EmptyDemoSetError("no demonstrations to compare against")
    encoder = encoder or AppearanceEncoder()
    target = encoder.embed(exec_frames)
    return sum(_distance(target, encoder.embed(d)) for d in demos) / len(demos)


def score_candidates_appearance(
    executions: Mapping[int, np.ndarray],
    demos: Sequence[np.ndarray],
    encoder: AppearanceEncoder | None = None,
) -> ScoreVector:
    if not demos:
        raise EmptyDemoSetError("no demonstrations to compare against")
    start = time.perf_counter()
    encoder = encoder or AppearanceEncoder()
    demo_embeddings = [encoder.embed(d) for d in demos]
    ids = tuple(sorted(executions))
    scores = []
    for template_id in ids:
        target = encoder.embed(executions[template_id])
        scores.append(sum(_distance(target, d) for d in demo_embeddings) / len(demo_embeddings))
    SCORING_LATENCY.labels(scorer="appearance").observe(time.perf_counter() - start)
    return ScoreVector(ids=ids, scores=tuple(scores), higher_is_better=False)
