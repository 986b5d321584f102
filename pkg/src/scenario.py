"""Scenario configuration: flat ``dotted.key = value`` text parsed into nested pydantic models.

Every field has a default, so a summary rendered with ``render_config`` can be
parsed back into the identical scenario.
"""

from __future__ import annotations

import logging
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.errors import ConfigurationError
from src.galerkin.models import ForcingKind, InitialKind, OdeOptions
from src.geometry.models import MotionFamily, MotionKind

logger = logging.getLogger(__name__)


class CheckName(str, Enum):
    MASS = "mass"
    ENERGY = "energy"
    ENERGY_BOUND = "energy_bound"
    MATERIAL = "material"
    GRADIENT_RATE = "gradient_rate"
    WEAK_FORM = "weak_form"
    BOUNDARY = "boundary"
    COERCIVITY = "coercivity"


class ProbeName(str, Enum):
    MONOTONICITY = "monotonicity"
    PLIP = "plip"
    LP_L2 = "lp_l2"
    POINCARE = "poincare"
    FRIEDRICHS = "friedrichs"


class OdeMethod(str, Enum):
    ERK45 = "erk45"
    IMPLICIT_MIDPOINT = "implicit_midpoint"


def _split(value: Any) -> Any:
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=False)


class MotionConfig(_Block):
    kind: MotionKind = MotionKind.STATIC
    a: float = 0.3
    omega: float = 1.0
    center: Optional[list[float]] = None
    c: Optional[list[float]] = None

    split_lists = field_validator("center", "c", mode="before")(_split)


class BasisConfig(_Block):
    N: int = Field(default=8, ge=1)


class QuadConfig(_Block):
    order: Optional[int] = Field(default=None, ge=1)


class OdeConfig(_Block):
    method: OdeMethod = OdeMethod.ERK45
    rtol: float = Field(default=1e-8, gt=0)
    atol: float = Field(default=1e-10, gt=0)
    stride: Optional[float] = Field(default=None, gt=0)
    substeps: int = Field(default=4, ge=1)
    max_steps: int = Field(default=1_000_000, ge=1)


class InitialConfig(_Block):
    kind: InitialKind = InitialKind.COSINE
    amplitude: float = 1.0
    mode: int = Field(default=1, ge=1)
    center: Optional[list[float]] = None
    width: float = Field(default=0.2, gt=0)

    split_lists = field_validator("center", mode="before")(_split)


class ForcingConfig(_Block):
    kind: ForcingKind = ForcingKind.ZERO
    amplitude: float = 1.0
    rate: float = 1.0
    omega: float = 1.0


class ProblemConfig(_Block):
    u0: InitialConfig = Field(default_factory=InitialConfig)
    f: ForcingConfig = Field(default_factory=ForcingConfig)


class DiagnosticsConfig(_Block):
    checks: list[CheckName] = Field(default_factory=lambda: list(CheckName))
    probes: list[ProbeName] = Field(default_factory=lambda: list(ProbeName))
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)
    mass_tol: float = Field(default=1e-7, gt=0)
    energy_tol: float = Field(default=1e-6, gt=0)
    weak_tol: float = Field(default=1e-6, gt=0)
    rate_tol: float = Field(default=1e-5, gt=0)
    material_rtol: float = Field(default=1e-3, gt=0)
    probe_tol: float = Field(default=1e-10, gt=0)
    probe_samples: int = Field(default=10_000, ge=1)
    lp_samples: int = Field(default=1_000, ge=1)
    probe_exponents: list[float] = Field(default_factory=lambda: [2.5, 3.0, 4.0])
    probe_k: int = Field(default=12, ge=1)
    fine_N: int = Field(default=16, ge=2)
    delta: float = Field(default=1.0, gt=0)
    epsilon: float = Field(default=0.05, gt=0)
    poincare_q: float = Field(default=2.0, ge=1)
    t_points: int = Field(default=16, ge=1)
    friedrichs_c: Optional[float] = Field(default=None, gt=0)
    friedrichs_samples: int = Field(default=200, ge=1)
    friedrichs_ratio: float = Field(default=0.1, gt=0, lt=1)

    split_lists = field_validator("checks", "probes", "probe_exponents", mode="before")(_split)

    @field_validator("probe_exponents")
    @classmethod
    def _exponents(cls, value: list[float]) -> list[float]:
        if not value or any(not p >= 2 for p in value):
            raise ValueError("p must be ≥ 2 for every probe exponent")
        return value


class GeometryConfig(_Block):
    samples: int = Field(default=32, ge=2)
    h: float = Field(default=1e-5, gt=0)
    tol: float = Field(default=1e-6, gt=0)


class RefineConfig(_Block):
    N: list[int] = Field(default_factory=lambda: [4, 8, 16, 24])
    quadrature_check: bool = True

    split_lists = field_validator("N", mode="before")(_split)

    @field_validator("N")
    @classmethod
    def _levels(cls, value: list[int]) -> list[int]:
        if len(value) < 2 or any(n < 1 for n in value):
            raise ValueError("needs at least two levels, each ≥ 1")
        if any(b < a for a, b in zip(value, value[1:])):
            raise ValueError("levels must be nondecreasing")
        return value


class StabilityConfig(_Block):
    deltas: list[float] = Field(default_factory=lambda: [1e-2, 1e-3, 1e-4])

    split_lists = field_validator("deltas", mode="before")(_split)

    @field_validator("deltas")
    @classmethod
    def _deltas(cls, value: list[float]) -> list[float]:
        if not value or any(not d > 0 for d in value):
            raise ValueError("deltas must be > 0")
        if any(b >= a for a, b in zip(value, value[1:])):
            raise ValueError("deltas must be decreasing")
        return value


class MmsConfig(_Block):
    amplitude: float = 1.0
    rate: float = 1.0
    levels: list[int] = Field(default_factory=lambda: [4, 8, 16])
    max_ratio: float = Field(default=0.5, gt=0)
    tolerance: float = Field(default=1e-4, gt=0)

    split_lists = field_validator("levels", mode="before")(_split)


class OutputConfig(_Block):
    dir: str = "out"


class ScenarioConfig(_Block):
    dim: int = Field(default=1, ge=1, le=2)
    T: float = Field(default=1.0, gt=0)
    p: float = 3.0
    motion: MotionConfig = Field(default_factory=MotionConfig)
    basis: BasisConfig = Field(default_factory=BasisConfig)
    quad: QuadConfig = Field(default_factory=QuadConfig)
    ode: OdeConfig = Field(default_factory=OdeConfig)
    problem: ProblemConfig = Field(default_factory=ProblemConfig)
    diagnostics: DiagnosticsConfig = Field(default_factory=DiagnosticsConfig)
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    refine: RefineConfig = Field(default_factory=RefineConfig)
    stability: StabilityConfig = Field(default_factory=StabilityConfig)
    mms: MmsConfig = Field(default_factory=MmsConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @field_validator("p")
    @classmethod
    def _exponent(cls, value: float) -> float:
        if not value >= 2:
            raise ValueError("p must be ≥ 2")
        return value

    @model_validator(mode="after")
    def _lengths(self) -> "ScenarioConfig":
        for name, values in (("motion.center", self.motion.center), ("motion.c", self.motion.c),
                             ("problem.u0.center", self.problem.u0.center)):
            if values is not None and len(values) != self.dim:
                raise ValueError(f"{name} must have dim = {self.dim} entries (got {len(values)})")
        return self

    # -- Derived --

    @property
    def dual_exponent(self) -> float:
        """p' = p / (p - 1)."""
        return self.p / (self.p - 1)

    @property
    def quad_order(self) -> int:
        return self.quad.order if self.quad.order is not None else max(2 * self.basis.N, 8)

    def motion_family(self) -> MotionFamily:
        m = self.motion
        return MotionFamily(
            kind=m.kind,
            dim=self.dim,
            horizon=self.T,
            a=m.a,
            omega=m.omega,
            center=tuple(m.center or ()),
            c=tuple(m.c or ()),
        )

    def ode_options(self) -> OdeOptions:
        o = self.ode
        return OdeOptions(
            rtol=o.rtol, atol=o.atol, stride=o.stride, method=o.method.value,
            substeps=o.substeps, max_steps=o.max_steps,
        )


# -- Parsing --

def _known_path(model: type[BaseModel], parts: list[str]) -> bool:
    field = model.model_fields.get(parts[0])
    if field is None:
        return False
    annotation = field.annotation
    nested = isinstance(annotation, type) and issubclass(annotation, BaseModel)
    if len(parts) == 1:
        return not nested
    return nested and _known_path(annotation, parts[1:])


def parse_text(text: str, source: str = "<config>") -> ScenarioConfig:
    tree: dict[str, Any] = {}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value' (got {raw.strip()!r})")
        key, value = (part.strip() for part in line.split("=", 1))
        parts = key.split(".")
        if not key or not all(parts) or not _known_path(ScenarioConfig, parts):
            raise ConfigurationError(f"unknown configuration key '{key}' ({source}:{lineno})")
        if key in seen:
            raise ConfigurationError(f"duplicate configuration key '{key}' ({source}:{lineno})")
        seen.add(key)
        node = tree
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value

    try:
        return ScenarioConfig.model_validate(tree)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = ".".join(str(loc) for loc in first["loc"]) or "scenario"
        message = first["msg"].removeprefix("Value error, ")
        raise ConfigurationError(f"invalid {field}: {message}") from None


def parse_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    config = parse_text(path.read_text(encoding="utf-8"), source=str(path))
    logger.info("Loaded scenario %s (dim=%d, p=%g, motion=%s, N=%d)",
                path, config.dim, config.p, config.motion.kind.value, config.basis.N)
    return config


# -- Rendering --

def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_format(v) for v in value)
    return str(value)


def _walk(model: BaseModel, prefix: str = ""):
    for name in type(model).model_fields:
        value = getattr(model, name)
        key = f"{prefix}{name}"
        if isinstance(value, BaseModel):
            yield from _walk(value, key + ".")
        elif value is not None:
            yield key, value


def render_config(config: ScenarioConfig) -> str:
    """Every field, defaults included, in the syntax ``parse_text`` reads."""
    lines = [f"{key} = {_format(value)}" for key, value in _walk(config)]
    lines.append(f"# effective quad.order = {config.quad_order}")
    return "\n".join(lines) + "\n"
