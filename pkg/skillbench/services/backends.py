"""Language-model backends for template scoring.

Every backend scores a continuation token by token given a prompt. The
reference backends are small count models over the shipped
cooking-instruction corpus; :class:`RemoteBackend` asks an HTTP service.
"""

import math
import re
import string
from abc import ABC, abstractmethod
from collections.abc import Iterable, Iterator, Sequence
from contextlib import contextmanager
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Protocol

import httpx
import numpy as np
from pydantic import ValidationError

from skillbench.config import Settings, get_settings
from skillbench.core.exceptions import BackendError, ConfigError
from skillbench.core.logging import get_logger
from skillbench.core.metrics import REMOTE_LLM_REQUESTS
from skillbench.models.api import ScoreRequest, ScoreResponse

logger = get_logger(__name__)

UNKNOWN = "<unk>"
START = "<s>"
MAX_REMOTE_RETRIES = 2

_STRIP_PUNCTUATION = str.maketrans({ch: " " for ch in string.punctuation})
_TRIGGER_LINE = re.compile(r"^to ([a-z]+)\b")


def tokenize(text: str) -> list[str]:
    """Lowercase, turn punctuation into spaces, split on whitespace."""
    return text.lower().translate(_STRIP_PUNCTUATION).split()


class ContinuationScorer(Protocol):
    """Anything that returns per-token log-probabilities of a continuation."""

    def continuation_logprobs(
        self, prompt_tokens: Sequence[str], continuation_tokens: Sequence[str]
    ) -> list[float]: ...


class TokenModel(ABC):
    """Next-token distribution over a fixed vocabulary."""

    def __init__(self, vocabulary: Iterable[str]) -> None:
        words = list(dict.fromkeys(vocabulary))
        if UNKNOWN not in words:
            words.append(UNKNOWN)
        self.vocabulary: tuple[str, ...] = tuple(words)
        self._index = {word: i for i, word in enumerate(self.vocabulary)}

    @property
    def vocab_size(self) -> int:
        return len(self.vocabulary)

    def token_id(self, token: str) -> int:
        return self._index.get(token, self._index[UNKNOWN])

    @abstractmethod
    def distribution(self, prefix: Sequence[str]) -> np.ndarray:
        """Probabilities of every vocabulary entry following ``prefix``."""

    def logprob(self, prefix: Sequence[str], token: str) -> float:
        return math.log(float(self.distribution(prefix)[self.token_id(token)]))

    def continuation_logprobs(
        self, prompt_tokens: Sequence[str], continuation_tokens: Sequence[str]
    ) -> list[float]:
        prefix = list(prompt_tokens)
        out = []
        for token in continuation_tokens:
            out.append(self.logprob(prefix, token))
            prefix.append(token)
        return out


class UniformModel(TokenModel):
    """Every token equally likely, whatever the prefix."""

    def distribution(self, prefix: Sequence[str]) -> np.ndarray:
        return np.full(self.vocab_size, 1.0 / self.vocab_size)

    def logprob(self, prefix: Sequence[str], token: str) -> float:
        return -math.log(self.vocab_size)


class NgramBackend(TokenModel):
    """Order-2 model with add-one smoothing.

    ``p(w | u) = (c(u, w) + 1) / (c(u) + V)`` where ``u`` is the last prefix
    token (``<s>`` for an empty prefix).
    """

    order = 2

    def __init__(self, lines: Iterable[Sequence[str]]) -> None:
        sentences = [list(line) for line in lines if line]
        super().__init__([START, *(tok for line in sentences for tok in line)])
        v = self.vocab_size
        self.counts = np.zeros((v, v), dtype=np.float64)
        for line in sentences:
            ids = [self._index[START], *(self._index[tok] for tok in line)]
            np.add.at(self.counts, (ids[:-1], ids[1:]), 1.0)
        self.context_totals = self.counts.sum(axis=1)
        self.line_count = len(sentences)

    @classmethod
    def from_text(cls, text: str) -> "NgramBackend":
        return cls(tokenize(line) for line in text.splitlines())

    def _context(self, prefix: Sequence[str]) -> int:
        return self.token_id(prefix[-1]) if prefix else self._index[START]

    def distribution(self, prefix: Sequence[str]) -> np.ndarray:
        u = self._context(prefix)
        row: np.ndarray = (self.counts[u] + 1.0) / (self.context_totals[u] + self.vocab_size)
        return row

    def logprob(self, prefix: Sequence[str], token: str) -> float:
        u = self._context(prefix)
        count = self.counts[u, self.token_id(token)]
        return math.log((count + 1.0) / (self.context_totals[u] + self.vocab_size))


class TopicalNgramBackend(NgramBackend):
    """Bigram interpolated with a skill-verb trigger distribution.

    Corpus lines that start ``to <verb>`` make ``<verb>`` a trigger; the
    trigger distribution of a verb is the add-one smoothed token frequency over
    its lines. When the prefix mentions triggers their distributions are
    averaged and mixed in with weight ``topic_weight``.
    """

    def __init__(self, lines: Iterable[Sequence[str]], topic_weight: float = 0.5) -> None:
        sentences = [list(line) for line in lines if line]
        super().__init__(sentences)
        if not 0.0 <= topic_weight <= 1.0:
            raise ConfigError("topic_weight must lie in [0, 1]")
        self.topic_weight = topic_weight
        triggers: dict[str, np.ndarray] = {}
        for line in sentences:
            match = _TRIGGER_LINE.match(" ".join(line[:2]))
            if not match:
                continue
            verb = match.group(1)
            row = triggers.setdefault(verb, np.zeros(self.vocab_size))
            np.add.at(row, [self._index[tok] for tok in line], 1.0)
        self.trigger_distributions = {
            verb: (row + 1.0) / (row.sum() + self.vocab_size) for verb, row in triggers.items()
        }

    @classmethod
    def from_text(cls, text: str, topic_weight: float = 0.5) -> "TopicalNgramBackend":
        return cls((tokenize(line) for line in text.splitlines()), topic_weight=topic_weight)

    def _topic(self, prefix: Sequence[str]) -> np.ndarray | None:
        verbs = sorted({tok for tok in prefix if tok in self.trigger_distributions})
        if not verbs:
            return None
        topic: np.ndarray = np.mean([self.trigger_distributions[v] for v in verbs], axis=0)
        return topic

    def distribution(self, prefix: Sequence[str]) -> np.ndarray:
        bigram = super().distribution(prefix)
        topic = self._topic(prefix)
        if topic is None:
            return bigram
        mixed: np.ndarray = (1.0 - self.topic_weight) * bigram + self.topic_weight * topic
        return mixed

    def logprob(self, prefix: Sequence[str], token: str) -> float:
        topic = self._topic(prefix)
        bigram = math.exp(super().logprob(prefix, token))
        if topic is None:
            return math.log(bigram)
        p = (1.0 - self.topic_weight) * bigram + self.topic_weight * float(
            topic[self.token_id(token)]
        )
        return math.log(p)


class RemoteBackend:
    """Scores continuations through ``POST {url}`` (see :class:`ScoreRequest`).

    Transport failures are retried up to ``retries`` times; any HTTP answer,
    good or bad, is final.
    """

    def __init__(
        self,
        url: str,
        *,
        timeout: float = 10.0,
        retries: int = MAX_REMOTE_RETRIES,
        client: httpx.Client | None = None,
    ) -> None:
        if not 0 <= retries <= MAX_REMOTE_RETRIES:
            raise ConfigError(f"remote retries must be between 0 and {MAX_REMOTE_RETRIES}")
        self.url = url
        self.retries = retries
        self._client = client or httpx.Client(timeout=timeout)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "RemoteBackend":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()

    def _post(self, body: ScoreRequest) -> httpx.Response:
        for attempt in range(self.retries + 1):
            try:
                return self._client.post(self.url, json=body.model_dump())
            except httpx.TransportError as e:
                REMOTE_LLM_REQUESTS.labels(outcome="transport_error").inc()
                logger.warning(
                    "remote_llm_transport_error", url=self.url, attempt=attempt + 1, error=str(e)
                )
                if attempt == self.retries:
                    raise BackendError(
                        f"remote backend unreachable after {attempt + 1} attempts: {e}",
                        details={"url": self.url},
                    ) from e
        raise AssertionError("unreachable")

    def continuation_logprobs(
        self, prompt_tokens: Sequence[str], continuation_tokens: Sequence[str]
    ) -> list[float]:
        body = ScoreRequest(
            prompt=" ".join(prompt_tokens), continuation=" ".join(continuation_tokens)
        )
        response = self._post(body)
        if response.status_code != 200:
            REMOTE_LLM_REQUESTS.labels(outcome="http_error").inc()
            raise BackendError(
                f"remote backend answered {response.status_code}",
                details={"url": self.url, "status_code": response.status_code},
            )
        try:
            parsed = ScoreResponse.model_validate_json(response.content)
        except ValidationError as e:
            REMOTE_LLM_REQUESTS.labels(outcome="malformed").inc()
            raise BackendError(f"malformed remote response: {e.error_count()} errors") from e
        logprobs = parsed.token_logprobs
        if not logprobs or not all(math.isfinite(v) and v <= 0.0 for v in logprobs):
            REMOTE_LLM_REQUESTS.labels(outcome="malformed").inc()
            raise BackendError("remote response must hold finite non-positive log-probabilities")
        if len(logprobs) != len(continuation_tokens):
            # normalization divides by the local token count, so the lengths must agree
            REMOTE_LLM_REQUESTS.labels(outcome="malformed").inc()
            raise BackendError(
                f"remote backend returned {len(logprobs)} log-probabilities for "
                f"{len(continuation_tokens)} continuation tokens",
                details={"url": self.url},
            )
        REMOTE_LLM_REQUESTS.labels(outcome="ok").inc()
        return logprobs


def read_reference_corpus(path: Path | None = None) -> str:
    """The shipped cooking-instruction corpus, or ``path`` when given."""
    if path is not None:
        return Path(path).read_text(encoding="utf-8")
    return resources.files("skillbench.data").joinpath("cooking_corpus.txt").read_text(
        encoding="utf-8"
    )


@lru_cache(maxsize=8)
def _reference_backend(kind: str, corpus_path: Path | None, topic_weight: float) -> TokenModel:
    text = read_reference_corpus(corpus_path)
    if kind == "ngram":
        return NgramBackend.from_text(text)
    return TopicalNgramBackend.from_text(text, topic_weight=topic_weight)


def build_backend(kind: str, settings: Settings | None = None) -> ContinuationScorer:
    """Backend by name: ``ngram``, ``topical`` or ``remote``."""
    settings = settings or get_settings()
    if kind in ("ngram", "topical"):
        return _reference_backend(kind, settings.llm_corpus_path, settings.topic_weight)
    if kind == "remote":
        if not settings.remote_llm_url:
            raise ConfigError("llm backend 'remote' needs REMOTE_LLM_URL", stage="config")
        return RemoteBackend(
            settings.remote_llm_url,
            timeout=settings.remote_timeout_s,
            retries=settings.remote_retries,
        )
    raise ConfigError(f"unknown llm backend {kind!r}", stage="config")


@contextmanager
def open_backend(kind: str, settings: Settings | None = None) -> Iterator[ContinuationScorer]:
    """:func:`build_backend` for the duration of a block; remote clients are closed on exit."""
    backend = build_backend(kind, settings)
    try:
        yield backend
    finally:
        if isinstance(backend, RemoteBackend):
            backend.close()
