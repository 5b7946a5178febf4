"""Experiment configuration schema (JSON, strict)."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError

SCHEMA_VERSION = 1
Variant = Literal["Thm11", "Thm61", "Cor12", "Thm13", "Cor42", "Thm43", "Cor44", "Thm45", "Prop36"]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Params(_Strict):
    n: Optional[int] = Field(None, ge=1)
    k: Optional[Union[float, List[float]]] = None
    alpha: Optional[Union[float, List[float]]] = None
    p: Optional[float] = Field(None, gt=0, le=1)
    ell: Optional[float] = Field(None, gt=1)
    set: Optional[Literal["corner_simplex", "unit_cube"]] = None
    unconditional_f: Optional[bool] = None
    c: Optional[float] = None
    q: Optional[float] = Field(None, ge=0)
    phi: Optional[Literal["sqrt_sum", "sqrt_sum_squared", "zero", "const"]] = None
    potential: Optional[Literal["simplex", "exponential"]] = None

    def as_dict(self) -> dict:
        return self.model_dump(exclude_none=True)


class Suite(_Strict):
    kind: Literal["random_polynomial", "thin_shell", "coordinate"] = "random_polynomial"
    count: int = Field(200, ge=1)
    degree: int = Field(4, ge=0, le=6)
    seed: int = 0


class Estimator(_Strict):
    mode: Literal["auto", "mc", "quadrature", "exact"] = "auto"
    N: int = Field(100_000, ge=2)
    seed: int = 0
    nodes: Optional[int] = Field(None, ge=2)


class MeasureDesc(_Strict):
    family: Literal["RegularSimplex", "CornerSimplex", "LpBall", "Interval", "OrthantProduct", "WeightedSimplex"]
    n: Optional[int] = Field(None, ge=1)
    p: Optional[float] = Field(None, gt=0, le=1)
    a: Optional[float] = None
    b: Optional[float] = None
    alpha: Optional[float] = Field(None, gt=0)
    c: Optional[float] = None
    q: Optional[float] = None


class SampleSpec(_Strict):
    measure: MeasureDesc
    N: int = Field(1000, ge=1)
    seed: int = 0


class SharpnessSpec(_Strict):
    variant: Literal["Cor44"] = "Cor44"
    dims: List[int] = Field(default_factory=lambda: [2, 5, 10])

    @field_validator("dims")
    @classmethod
    def _nonempty(cls, v):
        if not v or any(d < 1 for d in v):
            raise ValueError("dims must be a non-empty list of positive integers")
        return v


class Output(_Strict):
    prefix: str = "report"


class ExperimentConfig(_Strict):
    schema_version: Literal[1]
    variant: Optional[Variant] = None
    params: Params = Field(default_factory=Params)
    suite: Suite = Field(default_factory=Suite)
    estimator: Estimator = Field(default_factory=Estimator)
    explore: bool = False
    grid: Optional[Dict[str, List[Union[int, float, str]]]] = None
    sample: Optional[SampleSpec] = None
    sharpness: Optional[SharpnessSpec] = None
    output: Output = Field(default_factory=Output)


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(data)


def parse_config(data) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
