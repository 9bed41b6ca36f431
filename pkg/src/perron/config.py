"""Experiment configuration: schema, defaults and the observable catalog."""

from __future__ import annotations

import hashlib
import json
import math
from importlib import resources
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import observables as obs
from .errors import ConfigError
from .rational_map import from_affine

Coeff = Tuple[float, float]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class MapSpec(_Strict):
    numer: List[Coeff] = Field(default=[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)])
    denom: List[Coeff] = Field(default=[(1.0, 0.0)])

    def build(self):
        return from_affine([complex(*c) for c in self.numer], [complex(*c) for c in self.denom])


OBSERVABLE_NAMES = ("re_z", "im_z", "re_rational", "smooth_bump", "coboundary_of", "constant")


class ObservableSpec(_Strict):
    name: Literal["re_z", "im_z", "re_rational", "smooth_bump", "coboundary_of", "constant"]
    p: Optional[List[Coeff]] = None
    q: Optional[List[Coeff]] = None
    center: Optional[Union[Coeff, Literal["inf"]]] = None
    width: Optional[float] = None
    psi: Optional["ObservableSpec"] = None
    value: Optional[float] = None

    @model_validator(mode="after")
    def _fields_match_name(self):
        needed = {"re_rational": {"p", "q"}, "smooth_bump": {"center", "width"},
                  "coboundary_of": {"psi"}, "constant": {"value"}}.get(self.name, set())
        given = {k for k in ("p", "q", "center", "width", "psi", "value") if getattr(self, k) is not None}
        if given != needed:
            raise ValueError(f"observable {self.name!r} takes parameters {sorted(needed)}, got {sorted(given)}")
        if self.name == "smooth_bump" and not self.width > 0:
            raise ValueError("smooth_bump width must be positive")
        return self

    def build(self, f):
        if self.name == "re_z":
            return obs.re_z()
        if self.name == "im_z":
            return obs.im_z()
        if self.name == "constant":
            return obs.constant(self.value)
        if self.name == "re_rational":
            return obs.re_rational([complex(*c) for c in self.p], [complex(*c) for c in self.q])
        if self.name == "smooth_bump":
            c = math.inf if self.center == "inf" else complex(*self.center)
            return obs.smooth_bump(c, self.width)
        return obs.coboundary_of(self.psi.build(f), f)


class DensitySpec(_Strict):
    """``g = constant + plus``; must be nonnegative on the sample."""

    constant: float = 1.0
    plus: Optional[ObservableSpec] = None

    def build(self, f):
        g = obs.constant(self.constant)
        return g if self.plus is None else g + self.plus.build(f)


class SampleParams(_Strict):
    n_points: int = Field(default=100_000, ge=100)
    burn_in: int = Field(default=50, ge=20)
    chains: int = Field(default=64, ge=1)
    stride: int = Field(default=1, ge=1)
    seed: int = Field(default=20240601, ge=0, lt=2 ** 64)


class SpectralParams(_Strict):
    max_deg: int = Field(default=6, ge=1)
    sample_points: int = Field(default=20_000, ge=100)
    t_grid: List[float] = Field(default=[-0.1, -0.05, 0.0, 0.05, 0.1])
    delta: float = Field(default=0.05, gt=0)
    scan_t: List[float] = Field(default=[0.5, 1.0, 2.0])


class TestParams(_Strict):
    variance_lags: int = Field(default=30, ge=1, le=60)
    clt_n: int = Field(default=1000, ge=1)
    trajectories: int = Field(default=10_000, ge=10)
    clt_threshold: float = Field(default=0.05, gt=0)
    be_n_values: List[int] = Field(default=[64, 256, 1024, 4096], min_length=4)
    be_cap: float = Field(default=3.0, gt=0)
    lclt_n: int = Field(default=500, ge=1)
    lclt_trajectories: int = Field(default=100_000, ge=10)
    interval: Tuple[float, float] = (-0.5, 0.5)
    x: float = 0.0
    lclt_rel_tol: float = Field(default=0.1, gt=0)
    decay_n_max: int = Field(default=20, ge=5, le=60)


class ExperimentConfig(_Strict):
    map: MapSpec = MapSpec()
    observable: ObservableSpec = ObservableSpec(name="re_z")
    densities: List[DensitySpec] = Field(
        default=[DensitySpec(), DensitySpec(plus=ObservableSpec(name="re_z"))], min_length=1)
    sample: SampleParams = SampleParams()
    spectral: SpectralParams = SpectralParams()
    tests: TestParams = TestParams()

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    def with_seed(self, seed: Optional[int]) -> "ExperimentConfig":
        if seed is None:
            return self
        return self.model_copy(update={"sample": self.sample.model_copy(update={"seed": int(seed)})})


def _format_errors(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from exc


def load_config(path=None) -> ExperimentConfig:
    """Read a JSON config; ``None`` loads the bundled ``z**2`` benchmark."""
    if path is None:
        text = resources.files("perron").joinpath("configs/z2_benchmark.json").read_text("utf-8")
    else:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
