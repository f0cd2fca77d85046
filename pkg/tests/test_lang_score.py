"""Tests for language-model template ranking."""

import math
from collections.abc import Sequence

import numpy as np
import pytest

from skillbench.core.exceptions import EmptyDescriptorError, EmptyInputError, KTooLargeError
from skillbench.models.scores import ScoreVector
from skillbench.models.skills import ForceLevel, SkillLabel, TrajectoryKind
from skillbench.services.backends import ContinuationScorer, NgramBackend, UniformModel
from skillbench.services.lang_score import (
    build_prompt,
    normalized_score,
    rank_templates_llm,
    sequence_loglik,
    top_k,
)
from skillbench.services.library import build_library, get_template


class FixedModel:
    """Every token gets a fixed probability, whatever the prompt."""

    def __init__(self, probabilities: dict[str, float]) -> None:
        self.probabilities = probabilities

    def continuation_logprobs(
        self, prompt_tokens: Sequence[str], continuation_tokens: Sequence[str]
    ) -> list[float]:
        return [math.log(self.probabilities[t]) for t in continuation_tokens]


def test_build_prompt(wipe_skill: SkillLabel) -> None:
    assert build_prompt(wipe_skill) == [
        "to", "successfully", "wipe", "the", "plate", "with", "the", "cloth", "you", "should",
    ]


def test_sequence_loglik_sums_tokens(toy_model: NgramBackend) -> None:
    prompt, tokens = ["to", "wipe"], ["the", "plate"]
    total = sequence_loglik(toy_model, prompt, tokens)
    assert total == pytest.approx(sum(toy_model.continuation_logprobs(prompt, tokens)))
    assert normalized_score(toy_model, prompt, tokens) == pytest.approx(total / 2)


def test_empty_descriptor(toy_model: NgramBackend) -> None:
    with pytest.raises(EmptyDescriptorError):
        sequence_loglik(toy_model, ["to"], [])


def test_normalization_can_change_the_ranking() -> None:
    """A short unlikely descriptor beats a long likely one only before normalization."""
    model = FixedModel({"a": 0.3, "b": 0.6})
    short, long = ["a"], ["b", "b", "b", "b"]
    assert sequence_loglik(model, [], short) > sequence_loglik(model, [], long)
    assert normalized_score(model, [], short) < normalized_score(model, [], long)


def test_rank_templates(wipe_skill: SkillLabel, toy_model: NgramBackend) -> None:
    scores = rank_templates_llm(toy_model, wipe_skill, build_library())
    assert scores.ids == tuple(range(33))
    assert scores.higher_is_better is True
    assert all(s < 0 for s in scores.scores)


def test_rank_needs_templates(wipe_skill: SkillLabel, toy_model: NgramBackend) -> None:
    with pytest.raises(EmptyInputError):
        rank_templates_llm(toy_model, wipe_skill, [])


def test_reference_model_prefers_the_wiping_motion(
    wipe_skill: SkillLabel, reference_model: ContinuationScorer
) -> None:
    scores = rank_templates_llm(reference_model, wipe_skill, build_library())
    expert = get_template(TrajectoryKind.SIDE_TO_SIDE_LONG, ForceLevel.HIGH).id
    assert expert in top_k(scores, 5)


def test_top_k_orders_and_breaks_ties() -> None:
    scores = ScoreVector(ids=(0, 1, 2, 3), scores=(-1.0, -0.5, -0.5, -2.0))
    assert top_k(scores, 3) == [1, 2, 0]
    distances = ScoreVector(ids=(0, 1, 2), scores=(0.3, 0.1, 0.2), higher_is_better=False)
    assert top_k(distances, 2) == [1, 2]


def test_top_k_bounds() -> None:
    scores = ScoreVector(ids=(0, 1), scores=(-1.0, -0.5))
    with pytest.raises(KTooLargeError):
        top_k(scores, 3)
    with pytest.raises(KTooLargeError):
        top_k(scores, 0)
    assert top_k(scores, 2) == [1, 0]


class TableModel:
    """Random bigram table over a small vocabulary."""

    def __init__(self, rng: np.random.Generator, vocabulary: list[str]) -> None:
        self.index = {token: i for i, token in enumerate(vocabulary)}
        self.table = rng.dirichlet(np.ones(len(vocabulary)), size=len(vocabulary))

    def continuation_logprobs(
        self, prompt_tokens: Sequence[str], continuation_tokens: Sequence[str]
    ) -> list[float]:
        previous = self.index[prompt_tokens[-1]]
        out = []
        for token in continuation_tokens:
            out.append(math.log(self.table[previous, self.index[token]]))
            previous = self.index[token]
        return out


def test_loglik_matches_the_chain_product() -> None:
    rng = np.random.default_rng(31)
    vocabulary = ["to", "wipe", "the", "plate", "move", "cloth"]
    for _ in range(100):
        model = TableModel(rng, vocabulary)
        prompt = list(rng.choice(vocabulary, size=int(rng.integers(1, 5))))
        descriptor = list(rng.choice(vocabulary, size=int(rng.integers(1, 13))))
        product = 1.0
        previous = prompt[-1]
        for token in descriptor:
            product *= model.table[model.index[previous], model.index[token]]
            previous = token
        assert math.exp(sequence_loglik(model, prompt, descriptor)) == pytest.approx(
            product, rel=1e-9
        )


@pytest.mark.parametrize("vocab_size", [2, 3, 7, 50])
def test_uniform_model_scores_minus_log_vocab(vocab_size: int) -> None:
    vocabulary = [f"w{i}" for i in range(vocab_size - 1)]
    model = UniformModel(vocabulary)
    assert model.vocab_size == vocab_size
    for length in range(1, 21):
        descriptor = [vocabulary[i % len(vocabulary)] for i in range(length)]
        assert normalized_score(model, ["to"], descriptor) == -math.log(vocab_size)


def test_uniform_model_ties_every_template(wipe_skill: SkillLabel) -> None:
    scores = rank_templates_llm(UniformModel(["to"]), wipe_skill, build_library())
    assert len(set(scores.scores)) == 1
    assert top_k(scores, 5) == [0, 1, 2, 3, 4]


def test_top_k_ignores_positive_affine_maps() -> None:
    rng = np.random.default_rng(32)
    for _ in range(100):
        # coarse values so ties occur
        values = rng.integers(-20, 5, size=33) / 4.0
        scores = ScoreVector(ids=tuple(range(33)), scores=tuple(float(v) for v in values))
        a, b = float(rng.uniform(0.1, 10.0)), float(rng.uniform(-50.0, 50.0))
        mapped = ScoreVector(ids=scores.ids, scores=tuple(a * s + b for s in scores.scores))
        k = int(rng.integers(1, 34))
        assert top_k(mapped, k) == top_k(scores, k)
