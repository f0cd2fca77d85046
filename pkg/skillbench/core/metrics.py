"""Prometheus metrics configuration."""

from pathlib import Path

from prometheus_client import REGISTRY, Counter, Gauge, Histogram, Info, write_to_textfile

from skillbench.config import settings

APP_INFO = Info("skillbench_info", "Workbench information")
APP_INFO.info(
    {
        "name": settings.app_name,
        "version": settings.app_version,
        "environment": settings.environment,
    }
)

# Scoring service
REQUEST_COUNT = Counter(
    "http_requests_total",
    "Total HTTP requests",
    ["method", "endpoint", "status_code"],
)

REQUEST_LATENCY = Histogram(
    "http_request_duration_seconds",
    "HTTP request latency in seconds",
    ["method", "endpoint"],
    buckets=(0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 1.0, 2.5, 5.0, 10.0),
)

REQUEST_IN_PROGRESS = Gauge(
    "http_requests_in_progress",
    "HTTP requests currently in progress",
    ["method", "endpoint"],
)

# Simulator
TEMPLATE_EXECUTIONS = Counter(
    "template_executions_total",
    "Simulated template executions",
    ["task"],
)

# Scorers
SCORING_LATENCY = Histogram(
    "scoring_duration_seconds",
    "Time spent scoring a candidate set",
    ["scorer"],
    buckets=(0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 30.0),
)

REMOTE_LLM_REQUESTS = Counter(
    "remote_llm_requests_total",
    "Requests sent to the remote scoring backend",
    ["outcome"],
)

# Codec training
CODEC_EPOCHS = Counter(
    "codec_epochs_total",
    "Completed flow codec training epochs",
)

CODEC_RECON_MSE = Gauge(
    "codec_recon_mse",
    "Reconstruction MSE after the latest codec epoch",
)


def write_metrics(path: Path) -> None:
    """Dump the default registry in the Prometheus text format."""
    write_to_textfile(str(path), REGISTRY)
