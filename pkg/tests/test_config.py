"""Tests for experiment config, service settings and seed derivation."""

import json
from pathlib import Path

import pytest

from skillbench.config import Settings
from skillbench.core.exceptions import ConfigError, PipelineError, UnknownTaskError
from skillbench.core.seeding import derive_seed, make_rng
from skillbench.models.experiment import DEFAULT_SKILLS, ExperimentConfig, MethodToggles


def test_defaults() -> None:
    config = ExperimentConfig()
    assert config.skills == list(DEFAULT_SKILLS)
    assert config.lam == 0.1
    assert config.k == 5
    assert config.methods.enabled() == ["llm", "flow", "appearance", "combined"]
    assert [s.verb for s in config.skill_labels()] == ["wipe", "scrape", "stir", "spread"]


@pytest.mark.parametrize(
    "data",
    [
        {"k": 0},
        {"k": 34},
        {"lam": -0.5},
        {"success_threshold": 1.5},
        {"llm_backend": "gpt"},
        {"skills": []},
        {"skills": ["wipe the plate"]},
        {"codec": {"epochs": -1}},
        {"unknown_field": 1},
    ],
)
def test_invalid_configs(data: dict[str, object]) -> None:
    with pytest.raises(ConfigError) as excinfo:
        ExperimentConfig.from_data(data)
    assert excinfo.value.stage == "config"
    assert excinfo.value.details is not None
    assert excinfo.value.details["errors"]


def test_load(tmp_path: Path) -> None:
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"lam": 0.5, "methods": {"appearance": False}}), encoding="utf-8")
    config = ExperimentConfig.load(path)
    assert config.lam == 0.5
    assert config.methods.enabled() == ["llm", "flow", "combined"]


def test_load_errors(tmp_path: Path) -> None:
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "missing.json")
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        ExperimentConfig.load(path)


def test_no_methods_enabled() -> None:
    toggles = MethodToggles(llm=False, flow=False, appearance=False, combined=False)
    assert toggles.enabled() == []


def test_schema_is_stable() -> None:
    text = ExperimentConfig.json_schema_text()
    assert text == ExperimentConfig.json_schema_text()
    schema = json.loads(text)
    assert schema["properties"]["k"]["maximum"] == 33


def test_settings_from_environment(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("TOPIC_WEIGHT", "0.8")
    monkeypatch.setenv("REMOTE_LLM_URL", "http://lm.internal/score")
    settings = Settings()
    assert settings.topic_weight == 0.8
    assert settings.remote_llm_url == "http://lm.internal/score"
    assert settings.is_production is False


def test_settings_reject_bad_values(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("REMOTE_RETRIES", "5")
    with pytest.raises(ValueError):
        Settings()


def test_derive_seed() -> None:
    assert derive_seed(0, "oracle", "wipe:cloth:plate", 1) == derive_seed(
        0, "oracle", "wipe:cloth:plate", 1
    )
    assert derive_seed(0, "oracle", 1) != derive_seed(0, "oracle", 2)
    assert derive_seed(0, "oracle") != derive_seed(1, "oracle")
    assert 0 <= derive_seed(2**64 - 1, "x") < 2**64


def test_make_rng_streams() -> None:
    first = make_rng(3, "corpus").random(4)
    again = make_rng(3, "corpus").random(4)
    other = make_rng(3, "codec").random(4)
    assert first.tolist() == again.tolist()
    assert first.tolist() != other.tolist()


def test_pipeline_error_wraps_the_cause() -> None:
    cause = UnknownTaskError("no scene", details={"known": ["wipe"]})
    wrapped = PipelineError.wrap("oracle", cause)
    assert wrapped.stage == "oracle"
    assert wrapped.message == "no scene"
    assert wrapped.details == {"cause": "UNKNOWN_TASK", "known": ["wipe"]}
