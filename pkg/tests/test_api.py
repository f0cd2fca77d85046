"""Tests for the template and scoring endpoints."""

import pytest
from httpx import AsyncClient
from prometheus_client import REGISTRY

from skillbench.services.library import LIBRARY_SIZE


@pytest.mark.asyncio
async def test_list_templates(client: AsyncClient) -> None:
    """All templates come back in id order."""
    response = await client.get("/api/v1/templates")
    assert response.status_code == 200
    data = response.json()
    assert len(data) == LIBRARY_SIZE
    assert [t["id"] for t in data] == list(range(LIBRARY_SIZE))


@pytest.mark.asyncio
async def test_get_template(client: AsyncClient) -> None:
    """Test getting a single template."""
    response = await client.get("/api/v1/templates/17")
    assert response.status_code == 200
    data = response.json()
    assert data["trajectory"] == "side_to_side_long"
    assert data["force"] == "high"
    assert "[tool]" in data["descriptor_template"]


@pytest.mark.asyncio
async def test_get_template_not_found(client: AsyncClient) -> None:
    """Test getting a non-existent template."""
    response = await client.get("/api/v1/templates/99")
    assert response.status_code == 404
    data = response.json()
    assert data["error"] == "NOT_FOUND"


@pytest.mark.asyncio
async def test_rank_templates(client: AsyncClient) -> None:
    """Ranking scores every template and returns the requested shortlist."""
    response = await client.post(
        "/api/v1/templates/rank",
        json={"verb": "wipe", "tool": "cloth", "recipient": "plate", "k": 3},
    )
    assert response.status_code == 200
    data = response.json()
    assert len(data["scores"]) == LIBRARY_SIZE
    assert all(score < 0 for score in data["scores"])
    assert len(data["top_k"]) == 3
    best = max(data["scores"])
    assert data["scores"][data["top_k"][0]] == best


@pytest.mark.asyncio
async def test_rank_templates_validation_error(client: AsyncClient) -> None:
    """Test ranking with an out-of-range shortlist size."""
    response = await client.post(
        "/api/v1/templates/rank",
        json={"verb": "wipe", "tool": "cloth", "recipient": "plate", "k": 0},
    )
    assert response.status_code == 422
    assert response.json()["error"] == "VALIDATION_ERROR"


@pytest.mark.asyncio
async def test_score_continuation(client: AsyncClient) -> None:
    """One non-positive log-probability per continuation token."""
    response = await client.post(
        "/api/v1/score",
        json={
            "prompt": "To successfully wipe the plate with the cloth you should",
            "continuation": "Move the cloth in a long side to side motion",
        },
    )
    assert response.status_code == 200
    logprobs = response.json()["token_logprobs"]
    assert len(logprobs) == 10
    assert all(value <= 0 for value in logprobs)


@pytest.mark.asyncio
async def test_score_empty_continuation(client: AsyncClient) -> None:
    """A continuation without tokens is rejected."""
    response = await client.post(
        "/api/v1/score", json={"prompt": "to wipe", "continuation": " ,. "}
    )
    assert response.status_code == 400
    assert response.json()["error"] == "EMPTY_DESCRIPTOR"


@pytest.mark.asyncio
async def test_metrics_endpoint(client: AsyncClient) -> None:
    """Prometheus exposition is mounted."""
    await client.get("/api/v1/templates")
    response = await client.get("/metrics/")
    assert response.status_code == 200
    assert "skillbench" in response.text


@pytest.mark.asyncio
async def test_in_progress_gauge_uses_the_route_template(client: AsyncClient) -> None:
    """Path parameters never become gauge labels."""
    response = await client.get("/api/v1/templates/3")
    assert response.status_code == 200
    templated = {"method": "GET", "endpoint": "/api/v1/templates/{template_id}"}
    assert REGISTRY.get_sample_value("http_requests_in_progress", templated) == 0.0
    raw = {"method": "GET", "endpoint": "/api/v1/templates/3"}
    assert REGISTRY.get_sample_value("http_requests_in_progress", raw) is None
