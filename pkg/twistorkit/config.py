from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .utils import SEED_MASK, load_yaml_document

BASE_DIR = Path(__file__).resolve().parents[1]
DEFAULT_CONFIG_PATH = Path(os.getenv("TWISTORCTL_CONFIG", BASE_DIR / "configs" / "default.yaml"))

Kind = Literal["pseudo_riemannian", "symplectic"]
FixtureName = Literal[
    "flat",
    "sphere",
    "hyperbolic",
    "product_spheres",
    "fubini_study_cp2",
    "pseudo_sphere_22",
    "symplectic_point",
]
CHART_FIXTURES = ("flat", "sphere", "hyperbolic", "product_spheres", "fubini_study_cp2", "pseudo_sphere_22")
DIM4_FIXTURES = ("product_spheres", "fubini_study_cp2", "pseudo_sphere_22")


class ToleranceProfile(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    exact: float = Field(default=1e-10, gt=0)
    identity: float = Field(default=1e-9, gt=0)
    vanishing: float = Field(default=1e-8, gt=0)
    fd_vanishing: float = Field(default=1e-5, gt=0)
    rank: float = Field(default=1e-8, gt=0)
    pivot: float = Field(default=1e-8, gt=0)
    determinant: float = Field(default=1e-12, gt=0)
    plane: float = Field(default=1e-8, gt=0)
    fd_gate: float = Field(default=1e-5, gt=0)

    def zero_threshold(self, approximate: bool) -> float:
        """Relative "is zero" threshold; finite-difference inputs get the looser one."""
        return self.fd_vanishing if approximate else self.vanishing

    def for_ranks(self, approximate: bool) -> "ToleranceProfile":
        if not approximate:
            return self
        return self.model_copy(update={"rank": self.fd_vanishing})


DEFAULT_TOLERANCES = ToleranceProfile()


class StructureConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Kind = "pseudo_riemannian"
    dim: int = Field(default=4, ge=4, le=10)
    signature: Optional[Tuple[int, int]] = None
    oriented: bool = False
    flip_orientation: bool = False

    @model_validator(mode="before")
    @classmethod
    def _flip_implies_oriented(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("flip_orientation") and data.get("kind") != "symplectic":
            data = {**data, "oriented": True}
        return data

    @model_validator(mode="after")
    def _check_shape(self) -> "StructureConfig":
        if self.dim % 2:
            raise ValueError(f"dim must be even, got {self.dim}")
        if self.kind == "symplectic":
            if self.signature is not None:
                raise ValueError("signature applies to pseudo_riemannian structures only")
            if self.oriented or self.flip_orientation:
                raise ValueError("orientation flags apply to pseudo_riemannian structures only")
        elif self.signature is not None:
            pos, neg = self.signature
            if pos < 0 or neg < 0 or pos % 2 or neg % 2 or pos + neg != self.dim:
                raise ValueError(
                    f"signature must be two even counts summing to dim={self.dim}, got {self.signature}"
                )
        return self

    @property
    def n(self) -> int:
        return self.dim // 2

    @property
    def halves(self) -> Tuple[int, int]:
        pos, neg = self.signature if self.signature is not None else (self.dim, 0)
        return pos // 2, neg // 2


class SourceConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    fixture: Optional[FixtureName] = "sphere"
    radius: float = Field(default=1.0, gt=0)
    radius2: Optional[float] = Field(default=None, gt=0)
    scale: float = Field(default=1.0, gt=0)
    point: Optional[List[float]] = None
    fd_step: float = Field(default=1e-3, ge=1e-6, le=1e-1)
    richardson: bool = True
    random_seed: Optional[int] = Field(default=None, ge=0, le=SEED_MASK)
    weyl_seeds: int = Field(default=0, ge=0)
    ricci_scale: float = Field(default=1.0, ge=0)

    @model_validator(mode="after")
    def _one_source(self) -> "SourceConfig":
        if self.fixture is None and self.random_seed is None:
            raise ValueError("source needs a fixture or a random_seed")
        return self


class SamplingConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    fiber_samples: int = Field(default=64, ge=1)
    pair_samples: int = Field(default=32, ge=1)
    seed: int = Field(default=0, ge=0, le=SEED_MASK)
    workers: int = Field(default=1, ge=1)


class OutputConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    format: Literal["json", "text"] = "json"
    path: Optional[str] = None
    include_timing: bool = False
    run_log: Optional[str] = None


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    structure: StructureConfig = Field(default_factory=StructureConfig)
    source: SourceConfig = Field(default_factory=SourceConfig)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    tolerances: ToleranceProfile = Field(default_factory=ToleranceProfile)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def _check_source_fits_structure(self) -> "RunConfig":
        kind = self.structure.kind
        fixture = self.source.fixture if self.source.random_seed is None else None
        if fixture is None:
            return self
        if kind == "symplectic" and fixture != "symplectic_point":
            raise ValueError(f"Fixture {fixture} needs a pseudo_riemannian structure")
        if kind == "pseudo_riemannian" and fixture == "symplectic_point":
            raise ValueError("Fixture symplectic_point needs a symplectic structure")
        if fixture in DIM4_FIXTURES and self.structure.dim != 4:
            raise ValueError(f"Fixture {fixture} is four-dimensional, got dim={self.structure.dim}")
        halves = self.structure.halves
        if fixture == "pseudo_sphere_22" and halves != (1, 1):
            raise ValueError("Fixture pseudo_sphere_22 needs signature 2,2")
        if fixture in ("sphere", "hyperbolic", "product_spheres", "fubini_study_cp2") and halves[1] != 0:
            raise ValueError(f"Fixture {fixture} is Riemannian, signature must be {self.structure.dim},0")
        if self.source.point is not None and len(self.source.point) != self.structure.dim:
            raise ValueError(f"point must have {self.structure.dim} coordinates, got {len(self.source.point)}")
        return self

    @property
    def approximate(self) -> bool:
        """True when the curvature comes from the finite-difference engine."""
        return self.source.random_seed is None and self.source.fixture in CHART_FIXTURES



def _deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged



def build_run_config(raw: Dict[str, Any], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    payload = _deep_merge(raw, overrides or {})
    try:
        return RunConfig.model_validate(payload)
    except ValidationError as exc:
        raise ConfigError(f"Invalid run config: {exc}") from exc



def load_run_config(path: str | Path, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    raw = load_yaml_document(path, label="Run config")
    return build_run_config(raw, overrides)
