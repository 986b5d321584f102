from __future__ import annotations

from dataclasses import dataclass, field, asdict
from enum import Enum


class MotionKind(str, Enum):
    STATIC = "static"
    TRANSLATION = "translation"
    DILATION = "dilation"
    SHEAR2D = "shear2d"


@dataclass(frozen=True)
class MotionFamily:
    kind: MotionKind
    dim: int = 1
    horizon: float = 1.0
    a: float = 0.0
    omega: float = 1.0
    center: tuple[float, ...] = ()
    c: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        data = asdict(self)
        data["kind"] = self.kind.value
        return data


@dataclass(frozen=True)
class MotionBounds:
    """Sampled constants of the motion over the reference box and [0, T]."""

    c0: float
    c1: float
    c2: float
    g1: float = 0.0
    velocity: float = 0.0
    velocity_gradient: float = 0.0
    divergence: float = 0.0

    @property
    def gronwall_rate(self) -> float:
        return self.velocity_gradient + self.divergence

    @property
    def friedrichs_constant(self) -> float:
        """c = max(1, C_H) / c0 for the pullback Z = (psi o Phi_t) J_t."""
        c_h = max(self.c1**2 + 2.0 * self.g1**2, 2.0 * self.c1**2 * self.c2**2) / self.c0
        return max(1.0, c_h) / self.c0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MotionValidationReport:
    family: MotionFamily
    h: float
    tol: float
    samples: int
    velocity_error: float = 0.0
    gradient_error: float = 0.0
    jacobian_error: float = 0.0
    determinant_error: float = 0.0
    velocity_gradient_error: float = 0.0
    jacobian_gradient_error: float = 0.0
    jacobi_residual: float = 0.0
    bounds: MotionBounds | None = None
    notes: list[str] = field(default_factory=list)

    def discrepancies(self) -> dict[str, float]:
        return {
            "velocity": self.velocity_error,
            "map_gradient": self.gradient_error,
            "jacobian_rate": self.jacobian_error,
            "determinant": self.determinant_error,
            "velocity_gradient": self.velocity_gradient_error,
            "jacobian_gradient": self.jacobian_gradient_error,
            "jacobi_identity": self.jacobi_residual,
        }

    @property
    def passed(self) -> bool:
        return all(value <= self.tol for value in self.discrepancies().values())

    def to_dict(self) -> dict:
        return {
            "family": self.family.to_dict(),
            "h": self.h,
            "tol": self.tol,
            "samples": self.samples,
            "discrepancies": self.discrepancies(),
            "bounds": self.bounds.to_dict() if self.bounds else None,
            "passed": self.passed,
            "notes": list(self.notes),
        }
