"""Initial-data and forcing families, including the manufactured solution u* = g(t) cos(pi x_1)."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from src.errors import ConfigurationError
from src.galerkin.models import Forcing, ForcingKind, InitialDatum, InitialKind, ProblemData
from src.spectral.basis import BasisSet


# -- Manufactured solution --

def mms_profile(amplitude: float, rate: float) -> tuple[Callable[[float], float], Callable[[float], float]]:
    """g(t) = A exp(-rate t) and its derivative."""

    def g(t: float) -> float:
        return amplitude * np.exp(-rate * t)

    def dg(t: float) -> float:
        return -rate * amplitude * np.exp(-rate * t)

    return g, dg


def mms_exact(amplitude: float, rate: float) -> Callable[[np.ndarray, float], np.ndarray]:
    g, _ = mms_profile(amplitude, rate)

    def u_star(x: np.ndarray, t: float) -> np.ndarray:
        return g(t) * np.cos(np.pi * x[:, 0])

    return u_star


def mms_forcing(p: float, amplitude: float, rate: float) -> Forcing:
    """f = g' cos(pi x) + (p-1) pi^p |g|^(p-2) g |sin(pi x)|^(p-2) cos(pi x)."""
    g, dg = mms_profile(amplitude, rate)

    def forcing(X: np.ndarray, x: np.ndarray, t: float) -> np.ndarray:
        gt = g(t)
        s = np.abs(np.sin(np.pi * x[:, 0]))
        c = np.cos(np.pi * x[:, 0])
        gp = np.abs(gt) ** (p - 2) * gt
        sp = np.power(s, p - 2)
        return dg(t) * c + (p - 1) * np.pi**p * gp * sp * c

    return forcing


# -- Families --

def initial_datum(
    kind: InitialKind | str,
    *,
    dim: int,
    amplitude: float = 1.0,
    mode: int = 1,
    center: Sequence[float] | None = None,
    width: float = 0.2,
    basis: BasisSet | None = None,
) -> InitialDatum:
    kind = InitialKind(kind)
    if kind == InitialKind.ZERO:
        return lambda X: np.zeros(X.shape[0])
    if kind == InitialKind.CONSTANT:
        return lambda X: np.full(X.shape[0], amplitude)
    if kind == InitialKind.COSINE:
        return lambda X: amplitude * np.prod(np.cos(mode * np.pi * X), axis=1)
    if kind == InitialKind.MMS:
        return lambda X: amplitude * np.cos(np.pi * X[:, 0])
    if kind == InitialKind.BUMP:
        if not width > 0:
            raise ConfigurationError(f"problem.u0.width must be > 0 (got {width})")
        x0 = np.asarray(center if center else (0.5,) * dim, dtype=float)
        if x0.shape != (dim,):
            raise ConfigurationError(f"problem.u0.center must have {dim} entries")
        return lambda X: amplitude * np.exp(-np.sum((X - x0) ** 2, axis=1) / width**2)

    # BASIS_MODE: amplitude * w_mode^0
    if basis is None:
        raise ConfigurationError("problem.u0.kind = basis_mode needs a basis")
    if not 1 <= mode <= basis.N:
        raise ConfigurationError(f"problem.u0.mode must be in [1, {basis.N}] (got {mode})")
    return lambda X: amplitude * basis.evaluate(X)[:, mode - 1]


def forcing_term(
    kind: ForcingKind | str,
    *,
    p: float,
    amplitude: float = 1.0,
    rate: float = 1.0,
    omega: float = 1.0,
) -> Forcing:
    kind = ForcingKind(kind)
    if kind == ForcingKind.ZERO:
        return lambda X, x, t: np.zeros(X.shape[0])
    if kind == ForcingKind.CONSTANT:
        return lambda X, x, t: np.full(X.shape[0], amplitude)
    if kind == ForcingKind.COSINE:
        return lambda X, x, t: amplitude * np.cos(omega * t) * np.cos(np.pi * x[:, 0])
    return mms_forcing(p, amplitude, rate)


def mms_problem(p: float, amplitude: float, rate: float) -> ProblemData:
    return ProblemData(
        p=p,
        forcing=mms_forcing(p, amplitude, rate),
        u0=initial_datum(InitialKind.MMS, dim=1, amplitude=amplitude),
        forcing_kind=ForcingKind.MMS.value,
        initial_kind=InitialKind.MMS.value,
    )
