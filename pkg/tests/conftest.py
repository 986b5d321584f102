from __future__ import annotations

import textwrap
from pathlib import Path

import numpy as np
import pytest

from src.galerkin.models import OdeOptions, ProblemData
from src.galerkin.problem import forcing_term, initial_datum
from src.geometry.models import MotionFamily, MotionKind
from src.geometry.motion import motion_from_config
from src.spectral.basis import build_basis
from src.spectral.quadrature import gauss_legendre_rule


@pytest.fixture
def make_motion():
    def _make(kind: str = "static", dim: int = 1, T: float = 1.0, **params):
        return motion_from_config(MotionFamily(kind=MotionKind(kind), dim=dim, horizon=T, **params))
    return _make


@pytest.fixture
def dilation(make_motion):
    return make_motion("dilation", a=0.3, omega=1.0)


@pytest.fixture
def rule_1d():
    return gauss_legendre_rule(16, 1)


@pytest.fixture
def basis_1d(rule_1d):
    return build_basis(1, 8, rule_1d)


@pytest.fixture
def make_problem():
    def _make(p: float = 3.0, u0: str = "cosine", f: str = "zero", dim: int = 1, **kw):
        return ProblemData(
            p=p,
            forcing=forcing_term(f, p=p, amplitude=kw.get("f_amplitude", 1.0)),
            u0=initial_datum(u0, dim=dim, amplitude=kw.get("amplitude", 1.0), basis=kw.get("basis")),
            forcing_kind=f,
            initial_kind=u0,
        )
    return _make


@pytest.fixture
def tight():
    return OdeOptions(rtol=1e-10, atol=1e-10)


@pytest.fixture
def write_config(tmp_path: Path):
    def _write(body: str, name: str = "scenario.cfg") -> Path:
        path = tmp_path / name
        path.write_text(textwrap.dedent(body).lstrip(), encoding="utf-8")
        return path
    return _write


@pytest.fixture
def random_smooth():
    """Factory of random trigonometric polynomials on [0, 1]."""

    def _draw(rng: np.random.Generator, terms: int = 4):
        a = rng.standard_normal(terms)
        b = rng.standard_normal(terms)

        def u(X: np.ndarray) -> np.ndarray:
            x = X[:, 0]
            return sum(a[k] * np.cos(np.pi * k * x) + b[k] * np.sin(np.pi * k * x) for k in range(terms))

        return u

    return _draw
