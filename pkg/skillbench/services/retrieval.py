"""Demonstration retrieval in a shared text/video embedding space."""

import hashlib
import json
from abc import ABC, abstractmethod
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np

from skillbench.core.exceptions import EmptyInputError, NoEligibleRecordsError
from skillbench.core.logging import get_logger
from skillbench.core.seeding import make_rng
from skillbench.models.skills import SkillLabel
from skillbench.services.backends import tokenize
from skillbench.services.corpus import DemoRecord
from skillbench.services.simulator import FlowVideo

logger = get_logger(__name__)

EMBEDDING_DIM = 64
FLOW_STAT_COUNT = 8
FLOW_STAT_SCALE = 0.1
MOVING_THRESHOLD = 1e-3
DEFAULT_M = 5


def unit(vector: np.ndarray) -> np.ndarray:
    """L2-normalize; a zero vector maps to the first basis vector."""
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        fallback = np.zeros_like(vector, dtype=np.float64)
        fallback[0] = 1.0
        return fallback
    out: np.ndarray = vector / norm
    return out


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def flow_statistics(video: FlowVideo) -> np.ndarray:
    """Mean speed, direction-quadrant shares, moving share, mean dx and dy."""
    if video.frame_count == 0:
        return np.zeros(FLOW_STAT_COUNT)
    dx = video.frames[..., 0].astype(np.float64).ravel()
    dy = video.frames[..., 1].astype(np.float64).ravel()
    speed = np.hypot(dx, dy)
    moving = speed > MOVING_THRESHOLD
    n_moving = int(moving.sum())
    quadrants = np.zeros(4)
    if n_moving:
        angle = np.arctan2(dy[moving], dx[moving])
        # right, down, left, up in image coordinates
        bins = np.floor(np.mod(angle + np.pi / 4, 2 * np.pi) / (np.pi / 2)).astype(np.int64) % 4
        quadrants = np.bincount(bins, minlength=4) / n_moving
    return np.concatenate(
        [[speed.mean()], quadrants, [n_moving / speed.size, dx.mean(), dy.mean()]]
    )


class DualEncoder(ABC):
    """Maps captions and demonstration records into one unit-norm space."""

    @abstractmethod
    def embed_text(self, caption: str) -> np.ndarray: ...

    @abstractmethod
    def embed_video(self, record: DemoRecord) -> np.ndarray: ...


class HashedDualEncoder(DualEncoder):
    """Signed feature hashing of tokens, plus a seeded projection of flow statistics."""

    def __init__(self, seed: int = 0, dim: int = EMBEDDING_DIM) -> None:
        self.dim = dim
        rng = make_rng(seed, "retrieval-projection")
        self.flow_projection = rng.standard_normal((dim, FLOW_STAT_COUNT)) * FLOW_STAT_SCALE

    def _bucket(self, token: str) -> tuple[int, float]:
        raw = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        digest = int.from_bytes(raw, "little")
        return digest % self.dim, 1.0 if (digest >> 32) & 1 else -1.0

    def hash_tokens(self, tokens: Sequence[str]) -> np.ndarray:
        vector = np.zeros(self.dim)
        for token in tokens:
            index, sign = self._bucket(token)
            vector[index] += sign
        return vector

    def embed_text(self, caption: str) -> np.ndarray:
        tokens = tokenize(caption)
        if not tokens:
            raise EmptyInputError("caption has no tokens")
        return unit(self.hash_tokens(tokens))

    def embed_video(self, record: DemoRecord) -> np.ndarray:
        tokens = tokenize(record.text) + sorted(record.objects)
        if not tokens:
            raise EmptyInputError("record has neither caption nor objects")
        stats = flow_statistics(record.video)
        return unit(self.hash_tokens(tokens) + self.flow_projection @ stats)


class Retrieved(NamedTuple):
    record: DemoRecord
    similarity: float
    corpus_index: int


def retrieve_scored(
    skill: SkillLabel, corpus: Sequence[DemoRecord], encoder: DualEncoder, m: int = DEFAULT_M
) -> list[Retrieved]:
    """Records showing the skill's tool and recipient, most similar first."""
    if not corpus:
        raise EmptyInputError("demonstration corpus is empty")
    if m < 1:
        raise ValueError("m must be positive")
    required = {skill.tool, skill.recipient}
    eligible = [(i, r) for i, r in enumerate(corpus) if required <= r.objects]
    if not eligible:
        raise NoEligibleRecordsError(
            f"no demonstration shows both {skill.tool} and {skill.recipient}",
            details={"skill": skill.key, "corpus_size": len(corpus)},
        )
    query = encoder.embed_text(skill.caption)
    scored = [Retrieved(r, cosine(query, encoder.embed_video(r)), i) for i, r in eligible]
    scored.sort(key=lambda hit: (-hit.similarity, hit.corpus_index))
    hits = scored[:m]
    for hit in hits:
        logger.info(
            "demo_retrieved",
            skill=skill.key,
            record_id=hit.record.record_id,
            similarity=round(hit.similarity, 6),
        )
    return hits


def retrieve(
    skill: SkillLabel, corpus: Sequence[DemoRecord], encoder: DualEncoder, m: int = DEFAULT_M
) -> list[DemoRecord]:
    return [hit.record for hit in retrieve_scored(skill, corpus, encoder, m)]


def retrieval_jsonl(skill: SkillLabel, hits: Sequence[Retrieved]) -> str:
    """One ``{skill, record_id, similarity}`` JSON object per line."""
    return "".join(
        json.dumps(
            {"skill": skill.key, "record_id": h.record.record_id, "similarity": h.similarity}
        )
        + "\n"
        for h in hits
    )
