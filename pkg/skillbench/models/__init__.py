"""Pydantic models: domain values, HTTP bodies, reports and configuration."""

from skillbench.models.common import HealthCheck, HealthResponse, StatusEnum
from skillbench.models.experiment import ExperimentConfig
from skillbench.models.reports import ExperimentReport, MethodReport, SelectionReport
from skillbench.models.scores import ScoreVector
from skillbench.models.skills import (
    ForceLevel,
    ObjectGeometry,
    SkillLabel,
    Template,
    TrajectoryKind,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "ForceLevel",
    "HealthCheck",
    "HealthResponse",
    "MethodReport",
    "ObjectGeometry",
    "ScoreVector",
    "SelectionReport",
    "SkillLabel",
    "StatusEnum",
    "Template",
    "TrajectoryKind",
]
