from __future__ import annotations

import numpy as np
import pytest

from config import settings
from src.errors import InputError, SingularMassError
from src.galerkin.assembly import (
    GalerkinSystem,
    assemble_load,
    assemble_mass,
    assemble_plaplacian,
    assemble_stiffness,
    assemble_transport,
    factor_mass,
    plaplacian_jacobian,
    pullback_frame,
)
from src.spectral.basis import build_basis
from src.spectral.quadrature import gauss_legendre_rule

ONE = lambda X, x, t: np.ones(X.shape[0])  # noqa: E731


@pytest.fixture
def basis_2d():
    rule = gauss_legendre_rule(10, 2)
    return build_basis(2, 10, rule), rule


def test_mass_is_identity_at_time_zero(make_motion, basis_1d, rule_1d):
    for motion in (make_motion("static"), make_motion("translation", c=(0.2,)), make_motion("dilation", a=0.3)):
        np.testing.assert_allclose(assemble_mass(basis_1d, rule_1d, motion, 0.0), np.eye(8), atol=1e-10)
    static = make_motion("static")
    np.testing.assert_allclose(assemble_mass(basis_1d, rule_1d, static, 0.7), np.eye(8), atol=1e-10)


def test_mass_scales_with_volume(dilation, rule_1d):
    basis = build_basis(1, 1, rule_1d)
    M = assemble_mass(basis, rule_1d, dilation, np.pi / 2)
    assert M[0, 0] == pytest.approx(1.3)


def test_mass_is_symmetric_under_shear(make_motion, basis_2d):
    basis, rule = basis_2d
    M = assemble_mass(basis, rule, make_motion("shear2d", dim=2, a=0.2), 0.4)
    np.testing.assert_array_equal(M, M.T)
    assert np.linalg.eigvalsh(M)[0] > 0


def test_transport(make_motion, dilation, basis_1d, rule_1d):
    np.testing.assert_array_equal(assemble_transport(basis_1d, rule_1d, make_motion("static"), 0.3), 0.0)
    basis = build_basis(1, 1, rule_1d)
    assert assemble_transport(basis, rule_1d, dilation, 0.0)[0, 0] == pytest.approx(0.3)


def test_transport_first_row_is_volume_rate(dilation, basis_1d, rule_1d):
    # (v . grad w_1 + w_1 div v, w_l) with w_1 = 1 is (div v, w_l)
    t = 0.8
    B = assemble_transport(basis_1d, rule_1d, dilation, t)
    fr = pullback_frame(basis_1d, rule_1d, dilation, t)
    np.testing.assert_allclose(B[0], fr.values.T @ (fr.weights * fr.divergence), atol=1e-12)


def test_plaplacian_trivial_cases(dilation, basis_1d, rule_1d):
    assert np.all(assemble_plaplacian(basis_1d, rule_1d, dilation, np.zeros(8), 0.2, 3.0) == 0.0)
    basis = build_basis(1, 1, rule_1d)
    assert np.all(assemble_plaplacian(basis, rule_1d, dilation, np.array([2.5]), 0.2, 3.0) == 0.0)


def test_quadratic_case_matches_stiffness(make_motion, basis_1d, rule_1d, basis_2d):
    alpha = np.random.default_rng(3).standard_normal(8)
    static = make_motion("static")
    K = assemble_stiffness(basis_1d, rule_1d, static, 0.0)
    np.testing.assert_allclose(assemble_plaplacian(basis_1d, rule_1d, static, alpha, 0.0, 2.0), K @ alpha, atol=1e-10)

    basis, rule = basis_2d
    shear = make_motion("shear2d", dim=2, a=0.2)
    alpha = np.random.default_rng(4).standard_normal(basis.N)
    K = assemble_stiffness(basis, rule, shear, 0.6)
    gamma = assemble_plaplacian(basis, rule, shear, alpha, 0.6, 2.0)
    np.testing.assert_allclose(gamma, K @ alpha, atol=1e-10)


def test_jacobian_matches_finite_differences(dilation, basis_1d, rule_1d):
    alpha = np.random.default_rng(5).standard_normal(8)
    t, p, h = 0.5, 3.0, 1e-7
    fr = pullback_frame(basis_1d, rule_1d, dilation, t)
    Jac = plaplacian_jacobian(fr, alpha, p)
    fd = np.column_stack([
        (assemble_plaplacian(basis_1d, rule_1d, dilation, alpha + h * e, t, p)
         - assemble_plaplacian(basis_1d, rule_1d, dilation, alpha - h * e, t, p)) / (2 * h)
        for e in np.eye(8)
    ])
    np.testing.assert_allclose(Jac, fd, rtol=1e-5, atol=1e-6)


def test_load(make_motion, dilation, basis_1d, rule_1d):
    zero = lambda X, x, t: np.zeros(X.shape[0])  # noqa: E731
    np.testing.assert_array_equal(assemble_load(basis_1d, rule_1d, dilation, zero, 0.3), 0.0)
    load = assemble_load(basis_1d, rule_1d, make_motion("static"), ONE, 0.3)
    assert load[0] == pytest.approx(1.0)
    np.testing.assert_allclose(load[1:], 0.0, atol=1e-12)
    basis = build_basis(1, 1, rule_1d)
    assert assemble_load(basis, rule_1d, dilation, ONE, np.pi / 2)[0] == pytest.approx(1.3)


def test_load_rejects_non_finite_forcing(dilation, basis_1d, rule_1d):
    bad = lambda X, x, t: np.full(X.shape[0], np.inf)  # noqa: E731
    with pytest.raises(InputError, match="non-finite forcing"):
        assemble_load(basis_1d, rule_1d, dilation, bad, 0.1)


def test_singular_mass_reports_eigenvalue():
    M = np.diag([1.0, 0.0, -1e-3])
    with pytest.raises(SingularMassError) as excinfo:
        factor_mass(M, 0.25)
    assert excinfo.value.smallest_eigenvalue == pytest.approx(-1e-3)
    assert "E:Uni_PD" in str(excinfo.value)


def test_rhs_for_a_single_mode(dilation, rule_1d, make_problem):
    basis = build_basis(1, 1, rule_1d)
    system = GalerkinSystem(make_problem(u0="constant"), basis, rule_1d, dilation)
    for t in (0.0, 0.7):
        rate = 0.3 * np.cos(t) / (1 + 0.3 * np.sin(t))
        np.testing.assert_allclose(system(t, np.array([2.0])), [-rate * 2.0], rtol=1e-12)
    assert system.evaluations == 2


def test_rhs_heat_equation(make_motion, basis_1d, rule_1d, make_problem):
    static = make_motion("static")
    system = GalerkinSystem(make_problem(p=2.0), basis_1d, rule_1d, static)
    alpha = np.random.default_rng(6).standard_normal(8)
    K = assemble_stiffness(basis_1d, rule_1d, static, 0.0)
    np.testing.assert_allclose(system(0.1, alpha), -K @ alpha, atol=1e-10)
    np.testing.assert_array_equal(system(0.1, np.zeros(8)), 0.0)


def test_midpoint_residual_jacobian(dilation, basis_1d, rule_1d, make_problem):
    system = GalerkinSystem(make_problem(p=3.0), basis_1d, rule_1d, dilation)
    rng = np.random.default_rng(8)
    y0, y = rng.standard_normal(8), rng.standard_normal(8)
    R, dR = system.midpoint_residual(0.3, 0.01, y0, y)
    h = 1e-7
    fd = np.column_stack([
        (system.midpoint_residual(0.3, 0.01, y0, y + h * e)[0]
         - system.midpoint_residual(0.3, 0.01, y0, y - h * e)[0]) / (2 * h)
        for e in np.eye(8)
    ])
    np.testing.assert_allclose(dR, fd, rtol=1e-5, atol=1e-6)


def test_blocked_assembly_is_reproducible(monkeypatch, dilation, basis_1d, rule_1d):
    alpha = np.random.default_rng(9).standard_normal(8)
    serial = assemble_plaplacian(basis_1d, rule_1d, dilation, alpha, 0.4, 3.0)
    monkeypatch.setattr(settings, "threads", 3)
    first = assemble_plaplacian(basis_1d, rule_1d, dilation, alpha, 0.4, 3.0)
    second = assemble_plaplacian(basis_1d, rule_1d, dilation, alpha, 0.4, 3.0)
    np.testing.assert_array_equal(first, second)
    np.testing.assert_allclose(first, serial, atol=1e-13)
