from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from src.errors import ConfigurationError, RangeError

# f(X, x, t): reference points X, their images x = Phi_t(X), time t
Forcing = Callable[[np.ndarray, np.ndarray, float], np.ndarray]
InitialDatum = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ProblemData:
    p: float
    forcing: Forcing
    u0: InitialDatum
    forcing_kind: str = "custom"
    initial_kind: str = "custom"

    def __post_init__(self) -> None:
        if not self.p >= 2:
            raise ConfigurationError(f"p must be ≥ 2 (got {self.p})")

    @property
    def unforced(self) -> bool:
        return self.forcing_kind == "zero"


@dataclass(frozen=True)
class SystemSnapshot:
    t: float
    M: np.ndarray
    B: np.ndarray
    load: np.ndarray


@dataclass
class GalerkinTrajectory:
    """Coefficient vectors alpha_N(t) on a uniform grid, with g_N stored at every grid time."""

    times: np.ndarray
    states: np.ndarray
    derivatives: np.ndarray
    method: str = "erk45"
    rtol: float = 0.0
    atol: float = 0.0
    accepted: int = 0
    rejected: int = 0
    evaluations: int = 0
    newton_iterations: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def initial_state(self) -> np.ndarray:
        return self.states[0]

    def state_at(self, t: float) -> np.ndarray:
        """Cubic Hermite interpolation of alpha between grid times."""
        if not (0.0 <= t <= self.horizon):
            raise RangeError(f"t={t} outside trajectory span [0, {self.horizon}]")
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        i = min(max(i, 0), len(self.times) - 2)
        t0, t1 = self.times[i], self.times[i + 1]
        if t == t0:
            return self.states[i].copy()
        if t == t1:
            return self.states[i + 1].copy()
        h = t1 - t0
        s = (t - t0) / h
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return (
            h00 * self.states[i]
            + h10 * h * self.derivatives[i]
            + h01 * self.states[i + 1]
            + h11 * h * self.derivatives[i + 1]
        )


class InitialKind(str, Enum):
    ZERO = "zero"
    CONSTANT = "constant"
    COSINE = "cosine"
    BUMP = "bump"
    BASIS_MODE = "basis_mode"
    MMS = "mms"


class ForcingKind(str, Enum):
    ZERO = "zero"
    CONSTANT = "constant"
    COSINE = "cosine"
    MMS = "mms"


@dataclass(frozen=True)
class OdeOptions:
    rtol: float = 1e-8
    atol: float = 1e-10
    stride: float | None = None
    method: str = "erk45"
    substeps: int = 4
    max_steps: int = 1_000_000

    def halved(self) -> "OdeOptions":
        return OdeOptions(
            rtol=self.rtol / 2, atol=self.atol / 2, stride=self.stride,
            method=self.method, substeps=2 * self.substeps, max_steps=self.max_steps,
        )

    def as_kwargs(self) -> dict:
        return {
            "rtol": self.rtol,
            "atol": self.atol,
            "stride": self.stride,
            "method": self.method,
            "substeps": self.substeps,
            "max_steps": self.max_steps,
        }
