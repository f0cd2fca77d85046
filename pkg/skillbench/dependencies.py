"""FastAPI dependency injection."""

from typing import Annotated

from fastapi import Depends

from skillbench.config import Settings, get_settings
from skillbench.models.skills import Template
from skillbench.services.backends import ContinuationScorer, build_backend
from skillbench.services.library import build_library

SettingsDep = Annotated[Settings, Depends(get_settings)]


def get_reference_backend(settings: SettingsDep) -> ContinuationScorer:
    """The topical reference model, built once per settings and cached."""
    return build_backend("topical", settings)


def get_library() -> list[Template]:
    return build_library()


BackendDep = Annotated[ContinuationScorer, Depends(get_reference_backend)]
LibraryDep = Annotated[list[Template], Depends(get_library)]
