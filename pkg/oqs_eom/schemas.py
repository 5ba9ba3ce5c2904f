"""
oqs_eom/schemas.py
Run configuration and result record models.

Complex matrices travel as row-major nested lists of [re, im] pairs.
"""

from typing import Any, Dict, List, Literal, Optional, Tuple
import json
import math

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, field_validator, model_validator

from oqs_eom import __version__
from oqs_eom.config import Config
from oqs_eom.errors import ConfigError, DimensionError, InvalidStateError
from oqs_eom.models.catalog import catalog_model, sector_weighted_initial
from oqs_eom.models.composite import (
    CompositeModel,
    FullMatrix,
    Product,
    ProductPlusCorrelation,
    bell_state,
    build_initial_total,
    gibbs_state,
    maximally_mixed,
)
from oqs_eom.ops.operator_space import check_hermitian, validate_density

ComplexPair = Tuple[float, float]
Matrix = List[List[ComplexPair]]


# ================================================================================
# MATRIX CODEC
# ================================================================================

def decode_matrix(m) -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise DimensionError(f"matrix must be a nested list of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def encode_array(a) -> list:
    """ndarray of any rank -> nested lists whose leaves are [re, im] pairs"""
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def encode_value(value: Any) -> Any:
    """JSON-safe copy: inf/nan become strings, numpy scalars become Python numbers"""
    if isinstance(value, dict):
        return {str(k): encode_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode_value(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(value, (np.complexfloating, complex)):
        return [encode_value(complex(value).real), encode_value(complex(value).imag)]
    if isinstance(value, np.ndarray):
        return encode_value(value.tolist())
    return value


# ================================================================================
# RUN CONFIGURATION
# ================================================================================

class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _hermitian_matrix(value: Matrix, name: str) -> Matrix:
    arr = decode_matrix(value)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got {arr.shape}")
    try:
        check_hermitian(arr, name)
    except InvalidStateError as e:
        raise ValueError(str(e)) from e
    return value


class CouplingSpec(StrictModel):
    s: Matrix
    e: Matrix

    @field_validator("s", "e")
    @classmethod
    def _hermitian(cls, v, info):
        return _hermitian_matrix(v, info.field_name)


class InlineModel(StrictModel):
    d_s: int = Field(gt=0)
    d_e: int = Field(gt=0)
    h_s: Matrix
    h_e: Matrix
    couplings: List[CouplingSpec] = Field(default_factory=list)
    rho_e: Optional[Matrix] = None
    beta: float = Field(default=1.0, gt=0)
    name: str = "inline"

    @field_validator("h_s", "h_e")
    @classmethod
    def _hermitian(cls, v, info):
        return _hermitian_matrix(v, info.field_name)

    @field_validator("rho_e")
    @classmethod
    def _density(cls, v):
        if v is None:
            return v
        try:
            validate_density(decode_matrix(v))
        except InvalidStateError as e:
            raise ValueError(str(e)) from e
        return v


class ModelSection(StrictModel):
    catalog: Optional[str] = None
    seed: int = 0
    env_dim: Optional[int] = Field(default=None, ge=2)
    inline: Optional[InlineModel] = None
    environment: Literal["default", "gibbs", "maximally_mixed"] = "default"
    coupling_scale: float = 1.0

    @model_validator(mode="after")
    def _one_source(self):
        if (self.catalog is None) == (self.inline is None):
            raise ValueError("exactly one of 'catalog' and 'inline' must be given")
        return self


class InitialSection(StrictModel):
    kind: Literal["default", "product", "full", "correlated", "bell", "sector"] = "default"
    rho_0: Optional[Matrix] = None
    rho_tot0: Optional[Matrix] = None
    delta: Optional[Matrix] = None
    weights: Optional[List[float]] = None


class FrequencySection(StrictModel):
    re_min: Optional[float] = None
    re_max: Optional[float] = None
    count: int = Field(default=20, ge=1)
    imag: float = Field(default=0.05, gt=0)
    points: Optional[List[ComplexPair]] = None

    def values(self, scale: float) -> np.ndarray:
        if self.points is not None:
            return np.array([complex(re, im) for re, im in self.points])
        lo = -scale if self.re_min is None else self.re_min
        hi = scale if self.re_max is None else self.re_max
        return np.linspace(lo, hi, self.count) + 1j * self.imag


class ContourSection(StrictModel):
    epsilon: float = Field(gt=0)
    omega_max: float = Field(gt=0)
    n_points: int = Field(ge=2)
    tail_order: int = Field(default=Config.TAIL_ORDER, ge=0)
    tail_damping: Optional[float] = Field(default=None, gt=0)


class TimeSection(StrictModel):
    t_max: float = Field(default=10.0, gt=0)
    count: int = Field(default=101, ge=2)


class Tolerances(StrictModel):
    acceptance: float = Field(default=Config.ACCEPTANCE_TOL, gt=0)
    trace: float = Field(default=1e-9, gt=0)
    zero_mode: float = Field(default=1e-10, gt=0)
    longtime: float = Field(default=Config.LONGTIME_TOL, gt=0)
    cluster: float = Field(default=Config.ZERO_CLUSTER_TOL, gt=0)


class RunConfig(StrictModel):
    model: ModelSection
    initial: InitialSection = Field(default_factory=InitialSection)
    frequencies: FrequencySection = Field(default_factory=FrequencySection)
    contour: Optional[ContourSection] = None
    times: TimeSection = Field(default_factory=TimeSection)
    eps_seq: List[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05])
    eps_ref: Optional[float] = Field(default=None, gt=0)
    spectrum_z: Optional[ComplexPair] = None
    weights_list: Optional[List[List[float]]] = None
    refinement_steps: int = Field(default=0, ge=0)
    q_seed: int = 0
    tolerances: Tolerances = Field(default_factory=Tolerances)

    _model: Optional[CompositeModel] = PrivateAttr(default=None)

    @field_validator("eps_seq")
    @classmethod
    def _decreasing(cls, v):
        if not v or any(e <= 0 for e in v):
            raise ValueError("eps_seq must hold positive values")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("eps_seq must be strictly decreasing")
        return v

    def build_model(self) -> CompositeModel:
        if self._model is None:
            self._model = resolve_model(self)
        return self._model


# ================================================================================
# MODEL RESOLUTION
# ================================================================================

def _inline_model(spec: InlineModel) -> CompositeModel:
    h_e = decode_matrix(spec.h_e)
    rho_e = decode_matrix(spec.rho_e) if spec.rho_e is not None else gibbs_state(h_e, spec.beta)
    return CompositeModel(
        d_s=spec.d_s,
        d_e=spec.d_e,
        h_s=decode_matrix(spec.h_s),
        h_e=h_e,
        couplings=tuple((decode_matrix(c.s), decode_matrix(c.e)) for c in spec.couplings),
        rho_e=rho_e,
        initial=Product(maximally_mixed(spec.d_s)),
        name=spec.name,
    )


def _initial_state(m: CompositeModel, spec: InitialSection):
    if spec.kind == "default":
        return m.initial
    if spec.kind == "product":
        if spec.rho_0 is None:
            raise ConfigError("product initial state needs rho_0", field="initial.rho_0")
        return Product(decode_matrix(spec.rho_0))
    if spec.kind == "full":
        if spec.rho_tot0 is None:
            raise ConfigError("full initial state needs rho_tot0", field="initial.rho_tot0")
        return FullMatrix(decode_matrix(spec.rho_tot0))
    if spec.kind == "correlated":
        if spec.rho_0 is None or spec.delta is None:
            raise ConfigError("correlated initial state needs rho_0 and delta", field="initial.delta")
        return ProductPlusCorrelation(decode_matrix(spec.rho_0), decode_matrix(spec.delta))
    if spec.kind == "bell":
        return FullMatrix(bell_state(m.d_s, m.d_e))
    if spec.weights is None:
        raise ConfigError("sector initial state needs weights", field="initial.weights")
    return sector_weighted_initial(m, spec.weights)


def resolve_model(cfg: RunConfig) -> CompositeModel:
    """Build and validate the CompositeModel described by the config"""
    section = cfg.model
    try:
        if section.catalog is not None:
            m = catalog_model(section.catalog, seed=section.seed, env_dim=section.env_dim)
        else:
            m = _inline_model(section.inline)
    except (InvalidStateError, DimensionError) as e:
        raise ConfigError(str(e), field="model") from e

    if section.environment == "maximally_mixed":
        m = m.with_environment_state(maximally_mixed(m.d_e))
    elif section.environment == "gibbs":
        m = m.with_environment_state(gibbs_state(m.h_e))
    if section.coupling_scale != 1.0:
        m = m.with_coupling_scale(section.coupling_scale)

    try:
        m = m.with_initial(_initial_state(m, cfg.initial))
        build_initial_total(m)
    except (InvalidStateError, DimensionError) as e:
        raise ConfigError(str(e), field=f"initial.{cfg.initial.kind}") from e
    return m


# ================================================================================
# PARSING
# ================================================================================

def parse_config(text: str, seed: Optional[int] = None) -> RunConfig:
    """
    Parse a YAML run configuration.

    Raises:
        ConfigError: syntax errors (with line/column), unknown keys, out-of-range
            values or invalid matrices (with the offending field path)
    """
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        column = mark.column + 1 if mark is not None else None
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigError(f"YAML syntax error: {problem}", line=line, column=column) from e
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping at the top level")
    if seed is not None:
        raw.setdefault("model", {})
        if isinstance(raw["model"], dict):
            raw["model"]["seed"] = seed

    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        path = ".".join(str(p) for p in first["loc"])
        raise ConfigError(first["msg"], field=path) from e
    cfg.build_model()
    return cfg


# ================================================================================
# RESULT RECORD
# ================================================================================

class ResultRecord(BaseModel):
    command: str
    model_name: str
    model_fingerprint: str
    parameters: Dict[str, Any] = Field(default_factory=dict)
    payload: Dict[str, Any] = Field(default_factory=dict)
    diagnostics: Dict[str, Any] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)
    version: str = __version__

    def to_json(self) -> str:
        # sorted keys and no timestamps: identical inputs give identical bytes
        return json.dumps(encode_value(self.model_dump()), sort_keys=True, indent=2, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "ResultRecord":
        return cls.model_validate(json.loads(text))
