"""Tests for on-disk formats."""

from pathlib import Path

import numpy as np
import pytest

from skillbench.core.exceptions import FormatError
from skillbench.models.reports import (
    ExperimentReport,
    MethodReport,
    OracleRanking,
    SelectionReport,
    TrialResult,
)
from skillbench.models.skills import SkillLabel
from skillbench.services.codec import CodecParams, init_params
from skillbench.services.corpus import synth_demo_corpus
from skillbench.services.flow_score import FlowHistogram
from skillbench.services.formats import (
    appearance_from_bytes,
    appearance_to_bytes,
    codec_from_bytes,
    codec_to_bytes,
    flow_video_from_bytes,
    flow_video_to_bytes,
    histograms_from_csv,
    histograms_to_csv,
    load_corpus,
    read_codec,
    read_flow_video,
    read_histograms,
    read_model,
    write_codec,
    write_corpus,
    write_flow_video,
    write_histograms,
    write_model,
)
from skillbench.services.simulator import FlowVideo

from tests.conftest import TEST_STEPS


@pytest.fixture
def video() -> FlowVideo:
    rng = np.random.default_rng(0)
    return FlowVideo(rng.normal(size=(3, 32, 32, 2)).astype(np.float32))


def test_flow_video_header(video: FlowVideo) -> None:
    data = flow_video_to_bytes(video)
    assert data[:4] == b"FLV1"
    # width, height, frame count as little-endian u32
    assert int.from_bytes(data[4:8], "little") == 32
    assert int.from_bytes(data[12:16], "little") == 3
    assert len(data) == 16 + 3 * 32 * 32 * 2 * 4


def test_flow_video_file(tmp_path: Path, video: FlowVideo) -> None:
    path = tmp_path / "clip.flv"
    write_flow_video(path, video)
    np.testing.assert_array_equal(read_flow_video(path).frames, video.frames)


def test_flow_video_rejects_bad_input(video: FlowVideo) -> None:
    data = flow_video_to_bytes(video)
    with pytest.raises(FormatError):
        flow_video_from_bytes(b"XXXX" + data[4:])
    with pytest.raises(FormatError):
        flow_video_from_bytes(data[:-4])
    with pytest.raises(FormatError):
        flow_video_from_bytes(data[:10])


def test_appearance_frames() -> None:
    frames = np.linspace(0.0, 1.0, 2 * 16 * 16, dtype=np.float32).reshape(2, 16, 16)
    data = appearance_to_bytes(frames)
    assert data[:4] == b"APP1"
    np.testing.assert_array_equal(appearance_from_bytes(data), frames)
    with pytest.raises(FormatError):
        flow_video_from_bytes(data)


def test_codec_file(tmp_path: Path, tiny_codec: CodecParams) -> None:
    path = tmp_path / "codec.vqc"
    write_codec(path, tiny_codec)
    restored = read_codec(path)
    assert restored.beta == tiny_codec.beta
    for name, tensor in tiny_codec.tensors().items():
        np.testing.assert_array_equal(restored.tensors()[name], tensor)


def test_codec_rejects_bad_input(tiny_codec: CodecParams) -> None:
    data = codec_to_bytes(tiny_codec)
    assert data[:4] == b"VQC1"
    with pytest.raises(FormatError):
        codec_from_bytes(b"NOPE" + data[4:])
    with pytest.raises(FormatError):
        codec_from_bytes(data[:-1])
    with pytest.raises(FormatError):
        codec_from_bytes(data + b"\x00\x00\x00\x00")


def test_histogram_csv(tmp_path: Path) -> None:
    histograms = [
        FlowHistogram(bins=np.asarray([0.25, 0.75, 0.0, 0.0])),
        FlowHistogram(bins=np.asarray([0.1, 0.2, 0.3, 0.4])),
    ]
    text = histograms_to_csv(histograms, bins=4)
    assert text.splitlines()[0] == "0,1,2,3"
    path = tmp_path / "hist.csv"
    write_histograms(path, histograms, bins=4)
    restored = read_histograms(path)
    for original, copy in zip(histograms, restored, strict=True):
        np.testing.assert_array_equal(copy.bins, original.bins)


@pytest.mark.parametrize("text", ["", "0,1\n0.5\n", "a,b\n0.5,0.5\n", "1,0\n0.5,0.5\n"])
def test_histogram_csv_rejects_bad_input(text: str) -> None:
    with pytest.raises(FormatError):
        histograms_from_csv(text)


def test_model_file(tmp_path: Path) -> None:
    ranking = OracleRanking(
        skill="wipe:cloth:plate", variation=0, ranking=[1, 0], progress=[0.2, 0.4]
    )
    path = tmp_path / "ranking.json"
    write_model(path, ranking)
    assert read_model(path, OracleRanking) == ranking


def test_model_file_rejects_other_documents(tmp_path: Path) -> None:
    path = tmp_path / "ranking.json"
    path.write_text('{"skill": 3}', encoding="utf-8")
    with pytest.raises(FormatError):
        read_model(path, OracleRanking)


def test_corpus_directory(tmp_path: Path, wipe_skill: SkillLabel) -> None:
    records = synth_demo_corpus([wipe_skill], per_skill=1, seed=0, steps=TEST_STEPS)
    write_corpus(tmp_path / "corpus", records)
    restored = load_corpus(tmp_path / "corpus")
    assert [r.record_id for r in restored] == [r.record_id for r in records]
    for original, copy in zip(records, restored, strict=True):
        assert copy.objects == original.objects
        assert copy.expert == original.expert
        assert copy.text == original.text
        np.testing.assert_array_equal(copy.video.frames, original.video.frames)
        np.testing.assert_array_equal(copy.appearance, original.appearance)


def test_missing_corpus(tmp_path: Path) -> None:
    with pytest.raises(FormatError):
        load_corpus(tmp_path / "nowhere")


ROUND_TRIPS = 50


def test_codec_beta_round_trips_exactly() -> None:
    params = init_params(0, codebook_size=8, latent_dim=4, hidden=6, beta=0.3)
    assert codec_from_bytes(codec_to_bytes(params)).beta == 0.3


def test_random_flow_videos_round_trip(tmp_path: Path) -> None:
    rng = np.random.default_rng(11)
    for i in range(ROUND_TRIPS):
        frames, side = int(rng.integers(1, 5)), 4 * int(rng.integers(1, 9))
        video = FlowVideo(rng.normal(0.0, 3.0, size=(frames, side, side, 2)).astype(np.float32))
        path = tmp_path / f"clip_{i}.flv"
        write_flow_video(path, video)
        np.testing.assert_array_equal(read_flow_video(path).frames, video.frames)


def test_random_codecs_round_trip(tmp_path: Path) -> None:
    rng = np.random.default_rng(12)
    for i in range(ROUND_TRIPS):
        params = init_params(
            int(rng.integers(0, 2**32)),
            codebook_size=int(rng.integers(2, 17)),
            latent_dim=int(rng.integers(1, 9)),
            hidden=int(rng.integers(1, 17)),
            beta=float(rng.uniform(0.01, 2.0)),
            output_init_std=0.1,
        )
        path = tmp_path / f"codec_{i}.vqc"
        write_codec(path, params)
        restored = read_codec(path)
        assert restored.beta == params.beta
        for name, tensor in params.tensors().items():
            np.testing.assert_array_equal(restored.tensors()[name], tensor)


def test_random_histograms_round_trip(tmp_path: Path) -> None:
    rng = np.random.default_rng(13)
    for i in range(ROUND_TRIPS):
        bins = int(rng.integers(1, 65))
        histograms = [
            FlowHistogram(bins=rng.dirichlet(np.ones(bins)))
            for _ in range(int(rng.integers(1, 4)))
        ]
        path = tmp_path / f"hist_{i}.csv"
        write_histograms(path, histograms, bins=bins)
        for original, copy in zip(histograms, read_histograms(path), strict=True):
            np.testing.assert_array_equal(copy.bins, original.bins)


def _random_report(rng: np.random.Generator) -> ExperimentReport:
    skill = "wipe:cloth:plate"
    scores = rng.normal(-5.0, 2.0, size=33).tolist()
    candidates = sorted(rng.choice(33, size=5, replace=False).tolist())
    selection = SelectionReport(
        skill=skill,
        variation=int(rng.integers(0, 5)),
        lam=float(rng.uniform()),
        k=5,
        llm_scores=scores,
        candidates=candidates,
        llm_normalized=rng.uniform(size=5).tolist(),
        flow_scores=rng.uniform(size=5).tolist(),
        selected_id=candidates[0],
        seeds={"scene": int(rng.integers(0, 2**63))},
    )
    trials = [
        TrialResult(
            skill=skill,
            variation=v,
            selected_id=int(rng.integers(0, 33)),
            oracle_rank=int(rng.integers(1, 34)),
            final_progress=float(rng.uniform()),
            success=bool(rng.integers(0, 2)),
        )
        for v in range(3)
    ]
    oracle = OracleRanking(
        skill=skill,
        variation=0,
        ranking=rng.permutation(33).tolist(),
        progress=rng.uniform(size=33).tolist(),
    )
    return ExperimentReport(
        config={"lam": float(rng.uniform()), "k": 5},
        methods=[MethodReport.from_trials("combined", trials)],
        selections=[selection],
        oracles=[oracle],
    )


def test_random_reports_round_trip(tmp_path: Path) -> None:
    rng = np.random.default_rng(14)
    for i in range(ROUND_TRIPS):
        report = _random_report(rng)
        path = tmp_path / f"report_{i}.json"
        write_model(path, report)
        assert read_model(path, ExperimentReport) == report
