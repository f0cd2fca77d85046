"""Pytest configuration and fixtures."""

from collections.abc import AsyncGenerator
from pathlib import Path

import numpy as np
import pytest
from httpx import ASGITransport, AsyncClient

from skillbench.main import app
from skillbench.models.experiment import CodecConfig, CorpusConfig, ExperimentConfig
from skillbench.models.skills import SkillLabel
from skillbench.services.backends import ContinuationScorer, NgramBackend, build_backend
from skillbench.services.codec import PATCH_DIM, CodecParams, init_params

# Short episodes keep simulator-heavy tests fast.
TEST_STEPS = 13

TOY_TEXT = """\
to wipe the plate move the cloth side to side
to wipe the plate press the cloth firmly
to stir the pan move the spoon in a circle
"""


@pytest.fixture
async def client() -> AsyncGenerator[AsyncClient, None]:
    """Create an async test client."""
    async with AsyncClient(
        transport=ASGITransport(app=app),
        base_url="http://test",
    ) as ac:
        yield ac


@pytest.fixture
def wipe_skill() -> SkillLabel:
    return SkillLabel(verb="wipe", tool="cloth", recipient="plate")


@pytest.fixture
def stir_skill() -> SkillLabel:
    return SkillLabel(verb="stir", tool="spoon", recipient="pan")


@pytest.fixture
def tiny_codec() -> CodecParams:
    return init_params(0, codebook_size=8, latent_dim=4, hidden=6)


@pytest.fixture
def two_code_codec() -> CodecParams:
    """Codec that maps still patches to code 0 and moving patches to code 1."""
    return CodecParams(
        w_enc1=np.full((1, PATCH_DIM), 0.1, dtype=np.float32),
        b_enc1=np.zeros(1, dtype=np.float32),
        w_enc2=np.ones((1, 1), dtype=np.float32),
        b_enc2=np.zeros(1, dtype=np.float32),
        codebook=np.asarray([[0.0], [1.0]], dtype=np.float32),
        w_dec1=np.ones((1, 1), dtype=np.float32),
        b_dec1=np.zeros(1, dtype=np.float32),
        w_dec2=np.zeros((PATCH_DIM, 1), dtype=np.float32),
        b_dec2=np.zeros(PATCH_DIM, dtype=np.float32),
    )


@pytest.fixture
def toy_model() -> NgramBackend:
    return NgramBackend.from_text(TOY_TEXT)


@pytest.fixture
def reference_model() -> ContinuationScorer:
    return build_backend("topical")


@pytest.fixture
def small_config(tmp_path: Path) -> ExperimentConfig:
    """Two skills, one variation, short episodes and a barely trained codec."""
    return ExperimentConfig(
        skills=["wipe:cloth:plate", "scrape:scraper:board"],
        variations=1,
        episode_frames=TEST_STEPS - 1,
        oracle_seeds=1,
        retrieval_m=2,
        corpus=CorpusConfig(per_skill=2),
        codec=CodecConfig(
            frames=48, epochs=1, batch_size=16, codebook_size=8, latent_dim=4, hidden=6
        ),
        output_dir=tmp_path / "run",
    )
