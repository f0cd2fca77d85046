"""Tests for flow histograms and flow scoring."""

import math

import numpy as np
import pytest

from skillbench.core.exceptions import EmptyDemoSetError, EmptyVideoError, UnnormalizedInputError
from skillbench.services.codec import CodecParams, code_grids, patchify, unpatchify
from skillbench.services.flow_score import (
    FlowHistogram,
    histogram_distance,
    score_candidates_flow,
    score_template_flow,
    video_histogram,
)
from skillbench.services.simulator import FlowVideo


def _still(frames: int = 2) -> FlowVideo:
    return FlowVideo(np.zeros((frames, 32, 32, 2), dtype=np.float32))


def _moving(frames: int = 2) -> FlowVideo:
    video = np.zeros((frames, 32, 32, 2), dtype=np.float32)
    video[..., 0] = 1.0
    return FlowVideo(video)


def test_histogram_from_codes() -> None:
    histogram = FlowHistogram.from_codes(np.asarray([[0, 1], [1, 3]]), bins=4)
    np.testing.assert_allclose(histogram.bins, [0.25, 0.5, 0.0, 0.25])
    assert histogram.total_codes == 4


def test_histogram_needs_codes() -> None:
    with pytest.raises(EmptyVideoError):
        FlowHistogram.from_codes(np.asarray([], dtype=np.int64), bins=4)


def test_distance_properties() -> None:
    rng = np.random.default_rng(0)
    hists = [FlowHistogram(bins=rng.dirichlet(np.ones(8))) for _ in range(3)]
    a, b, c = hists
    assert histogram_distance(a, a) == 0.0
    assert histogram_distance(a, b) == pytest.approx(histogram_distance(b, a))
    assert histogram_distance(a, c) <= histogram_distance(a, b) + histogram_distance(b, c) + 1e-12
    one_hot = FlowHistogram(bins=np.eye(8)[0])
    other = FlowHistogram(bins=np.eye(8)[1])
    assert histogram_distance(one_hot, other) == pytest.approx(math.sqrt(2))


def _random_histogram(rng: np.random.Generator, bins: int) -> FlowHistogram:
    # small concentrations give sparse, nearly one-hot histograms too
    return FlowHistogram(bins=rng.dirichlet(np.full(bins, rng.choice([0.05, 0.5, 5.0]))))


def test_distance_is_a_bounded_metric() -> None:
    rng = np.random.default_rng(21)
    for _ in range(1000):
        bins = int(rng.integers(2, 65))
        a, b, c = (_random_histogram(rng, bins) for _ in range(3))
        ab, bc, ac = histogram_distance(a, b), histogram_distance(b, c), histogram_distance(a, c)
        assert ab == histogram_distance(b, a)
        assert histogram_distance(a, a) <= 1e-9
        assert ac <= ab + bc + 1e-12
        for d in (ab, bc, ac):
            assert 0.0 <= d <= math.sqrt(2)


def test_histogram_ignores_cell_positions() -> None:
    rng = np.random.default_rng(22)
    for _ in range(50):
        grid = rng.integers(0, 16, size=(3, 8, 8))
        shuffled = rng.permutation(grid.ravel()).reshape(grid.shape)
        np.testing.assert_array_equal(
            FlowHistogram.from_codes(grid, 16).bins, FlowHistogram.from_codes(shuffled, 16).bins
        )


def test_video_histogram_ignores_patch_positions(tiny_codec: CodecParams) -> None:
    rng = np.random.default_rng(23)
    frames = rng.normal(size=(2, 32, 32, 2)).astype(np.float32)
    patches = patchify(frames)
    order = rng.permutation(64)
    moved = patches.reshape(2, 64, -1)[:, order].reshape(patches.shape)
    shuffled = FlowVideo(unpatchify(moved))
    np.testing.assert_array_equal(
        np.sort(code_grids(shuffled.frames, tiny_codec).ravel()),
        np.sort(code_grids(frames, tiny_codec).ravel()),
    )
    original = video_histogram(FlowVideo(frames), tiny_codec)
    np.testing.assert_array_equal(video_histogram(shuffled, tiny_codec).bins, original.bins)


def test_distance_rejects_unnormalized() -> None:
    good = FlowHistogram(bins=np.asarray([0.5, 0.5]))
    bad = FlowHistogram(bins=np.asarray([0.5, 0.6]))
    with pytest.raises(UnnormalizedInputError):
        histogram_distance(good, bad)


def test_video_histogram_ignores_frame_order(tiny_codec: CodecParams) -> None:
    rng = np.random.default_rng(1)
    frames = rng.normal(size=(4, 32, 32, 2)).astype(np.float32)
    forward = video_histogram(FlowVideo(frames), tiny_codec)
    backward = video_histogram(FlowVideo(frames[::-1].copy()), tiny_codec)
    np.testing.assert_array_equal(forward.bins, backward.bins)
    assert forward.total_codes == 4 * 64


def test_video_histogram_needs_frames(tiny_codec: CodecParams) -> None:
    with pytest.raises(EmptyVideoError):
        video_histogram(_still(0), tiny_codec)


def test_still_and_moving_use_different_codes(two_code_codec: CodecParams) -> None:
    np.testing.assert_array_equal(video_histogram(_still(), two_code_codec).bins, [1.0, 0.0])
    np.testing.assert_array_equal(video_histogram(_moving(), two_code_codec).bins, [0.0, 1.0])


def test_score_template_flow(two_code_codec: CodecParams) -> None:
    assert score_template_flow(_moving(), [_moving(3)], two_code_codec) == 0.0
    mixed = score_template_flow(_still(), [_moving(), _still()], two_code_codec)
    assert mixed == pytest.approx(math.sqrt(2) / 2)


def test_score_candidates_flow(two_code_codec: CodecParams) -> None:
    scores = score_candidates_flow({9: _still(), 4: _moving()}, [_moving()], two_code_codec)
    assert scores.ids == (4, 9)
    assert scores.higher_is_better is False
    assert scores.scores[0] == 0.0
    assert scores.scores[1] == pytest.approx(math.sqrt(2))


def test_score_needs_demos(two_code_codec: CodecParams) -> None:
    with pytest.raises(EmptyDemoSetError):
        score_template_flow(_still(), [], two_code_codec)
    with pytest.raises(EmptyDemoSetError):
        score_candidates_flow({0: _still()}, [], two_code_codec)
