from __future__ import annotations

import numpy as np
import pytest

from src.diagnostics import identities
from src.diagnostics.models import Formula
from src.errors import InputError, UnsupportedDimensionError
from src.galerkin.integrator import integrate
from src.galerkin.models import OdeOptions
from src.spectral.basis import build_basis
from src.spectral.quadrature import gauss_legendre_rule


def solve(problem, basis, rule, motion, **options):
    return integrate(problem, basis, rule, motion, **OdeOptions(**options).as_kwargs())


@pytest.fixture
def moving_run(make_motion, make_problem, basis_1d, rule_1d):
    motion = make_motion("dilation", T=0.2, a=0.3, omega=2.0)
    problem = make_problem(p=3.0)
    traj = solve(problem, basis_1d, rule_1d, motion, rtol=1e-10, atol=1e-12)
    return traj, problem, motion, basis_1d, rule_1d


def test_zero_run_has_zero_residuals(make_motion, make_problem, basis_1d, rule_1d):
    motion = make_motion("dilation", T=0.1, a=0.3)
    problem = make_problem(u0="zero")
    traj = solve(problem, basis_1d, rule_1d, motion, stride=0.01)
    args = (traj, problem, motion, basis_1d, rule_1d)
    assert np.all(identities.mass_identity(*args).series["residual"] == 0.0)
    assert identities.energy_identity(*args).check.value == 0.0
    assert identities.energy_bound(*args).check.value == 0.0
    assert identities.material_derivative_energy(*args).check.value == 0.0
    assert identities.weak_form_residual(*args, np.eye(8)[0]) == 0.0


def test_mass_is_conserved_without_forcing(moving_run):
    result = identities.mass_identity(*moving_run, tol=1e-8)
    assert result.check.formula == Formula.MASS
    assert result.check.passed, result.check.note
    assert list(result.series.columns) == ["t", "mass", "forcing_integral", "residual"]


def test_constant_forcing_adds_mass(make_motion, make_problem, basis_1d, rule_1d):
    motion = make_motion("static", T=0.5)
    problem = make_problem(f="constant")
    traj = solve(problem, basis_1d, rule_1d, motion, rtol=1e-10, atol=1e-12, stride=0.05)
    series = identities.mass_identity(traj, problem, motion, basis_1d, rule_1d).series
    np.testing.assert_allclose(series["mass"] - series["mass"].iloc[0], series["t"], atol=1e-8)


def test_energy_identity_on_a_moving_domain(moving_run):
    result = identities.energy_identity(*moving_run, tol=1e-5)
    assert result.check.passed, result.check.note
    assert "time-quadrature budget" in result.check.note


def test_static_dissipation_identity(make_motion, make_problem, basis_1d, rule_1d):
    motion = make_motion("static", T=0.1)
    problem = make_problem(p=3.0)
    traj = solve(problem, basis_1d, rule_1d, motion, rtol=1e-10, atol=1e-12)
    args = (traj, problem, motion, basis_1d, rule_1d)
    energy = identities.energy_identity(*args, tol=1e-6)
    assert energy.check.passed
    np.testing.assert_array_equal(energy.series["transport_work"], 0.0)
    np.testing.assert_array_equal(energy.series["dilation_work"], 0.0)
    bound = identities.energy_bound(*args)
    assert bound.check.passed
    assert "nonincreasing" in bound.check.note


def test_material_energy_for_a_single_mode(make_motion, make_problem, rule_1d):
    # alpha(t) = 1 / s(t), so d/dt. u = alpha' and ||d/dt. u||^2 = alpha'^2 s
    motion = make_motion("dilation", T=1.0, a=0.3)
    basis = build_basis(1, 1, rule_1d)
    problem = make_problem(u0="constant")
    traj = solve(problem, basis, rule_1d, motion, rtol=1e-10, atol=1e-12)
    result = identities.material_derivative_energy(traj, problem, motion, basis, rule_1d)
    t = traj.times
    s = 1 + 0.3 * np.sin(t)
    ds = 0.3 * np.cos(t)
    expected = (ds / s**2) ** 2 * s
    np.testing.assert_allclose(result.series["material_l2_squared"], expected, atol=1e-6)


def test_material_energy_with_reference(moving_run):
    traj, problem, motion, basis, rule = moving_run
    reference = solve(problem, basis, rule, motion, rtol=5e-11, atol=5e-13)
    result = identities.material_derivative_energy(*moving_run, reference=reference, rtol=1e-3)
    assert result.check.passed
    assert "drift" in result.check.note


def test_gradient_energy_rate(moving_run):
    result = identities.gradient_energy_rate(*moving_run, tol=1e-5)
    assert result.check.formula == Formula.GRADIENT_RATE
    assert result.check.passed, result.check.value


def test_sine_window():
    theta, dtheta = identities.sine_window(2.0)
    assert theta(np.array([0.0, 2.0])) == pytest.approx([0.0, 0.0], abs=1e-30)
    assert theta(1.0) == pytest.approx(1.0)
    assert dtheta(0.5) == pytest.approx(np.pi / 2)


def test_weak_form_residual(moving_run):
    checks = identities.weak_form_check(*moving_run, tol=1e-6)
    assert checks[0].passed, checks[0].value


def test_weak_form_outside_span_is_informational(moving_run):
    traj, problem, motion, basis, rule = moving_run
    extended = build_basis(1, basis.N + 1, rule)
    checks = identities.weak_form_check(*moving_run, extended_basis=extended)
    assert len(checks) == 2
    assert checks[1].informational and checks[1].status == "INFO"


def test_weak_form_window_must_vanish(moving_run):
    window = (lambda t: np.ones_like(t), lambda t: np.zeros_like(t))
    with pytest.raises(InputError, match="E:pLap_WF"):
        identities.weak_form_residual(*moving_run, np.eye(8)[0], theta=window)


def test_boundary_residual_columns(moving_run):
    traj, problem, motion, basis, _ = moving_run
    series = identities.boundary_residual_1d(traj, motion, basis, problem.p, times=[0.0, 0.1])
    assert list(series.columns) == [
        "t", "u_left", "u_right", "flux_left", "flux_right", "residual_left", "residual_right",
    ]
    assert len(series) == 2
    check = identities.boundary_check(series)
    assert check.informational and check.formula == Formula.BOUNDARY


def test_boundary_residual_static_has_no_velocity_term(make_motion, make_problem, basis_1d, rule_1d):
    motion = make_motion("static", T=0.05)
    problem = make_problem(p=3.0)
    traj = solve(problem, basis_1d, rule_1d, motion, stride=0.01)
    series = identities.boundary_residual_1d(traj, motion, basis_1d, 3.0)
    np.testing.assert_allclose(series["residual_left"], series["flux_left"])
    np.testing.assert_allclose(series["residual_right"], series["flux_right"])


def test_boundary_residual_is_one_dimensional(make_motion, make_problem):
    rule = gauss_legendre_rule(6, 2)
    basis = build_basis(2, 3, rule)
    motion = make_motion("static", dim=2, T=0.05)
    traj = solve(make_problem(dim=2), basis, rule, motion, stride=0.025)
    with pytest.raises(UnsupportedDimensionError):
        identities.boundary_residual_1d(traj, motion, basis, 3.0)


def test_mass_coercivity_for_dilation(make_motion):
    rule = gauss_legendre_rule(24, 1)
    basis = build_basis(1, 16, rule)
    motion = make_motion("dilation", T=2 * np.pi, a=0.3)
    result = identities.mass_coercivity(motion, basis, rule, np.linspace(0, 2 * np.pi, 64))
    assert result.check.formula == Formula.COERCIVITY
    assert result.check.passed
    assert result.series["min_eigenvalue"].min() >= 0.65


@pytest.mark.slow
@pytest.mark.parametrize("p", [2.5, 3.0, 4.0])
@pytest.mark.parametrize("kind, params", [
    ("static", {}), ("translation", {"c": (0.2,)}), ("dilation", {"a": 0.3}),
])
def test_conservation_matrix(make_motion, make_problem, basis_1d, rule_1d, p, kind, params):
    motion = make_motion(kind, T=1.0, **params)
    problem = make_problem(p=p)
    traj = solve(problem, basis_1d, rule_1d, motion)
    args = (traj, problem, motion, basis_1d, rule_1d)
    sweep = identities.sweep_trajectory(*args)
    assert identities.mass_identity(*args, tol=1e-7, sweep=sweep).check.passed
    assert identities.energy_identity(*args, tol=1e-5, sweep=sweep).check.passed
    assert identities.energy_bound(*args, sweep=sweep).check.passed


@pytest.mark.slow
def test_mass_residual_tracks_the_integrator_tolerance(dilation, make_problem, rule_1d):
    # one mode on a dilating interval: the residual is pure time-integration error
    basis = build_basis(1, 1, rule_1d)
    problem = make_problem(u0="constant")
    residuals = []
    for rtol in (1e-6, 1e-8, 1e-10):
        traj = solve(problem, basis, rule_1d, dilation, rtol=rtol, atol=rtol * 1e-2)
        value = identities.mass_identity(traj, problem, dilation, basis, rule_1d).check.value
        assert value <= 100 * rtol
        residuals.append(value)
    assert residuals[0] > residuals[1] > residuals[2]
    assert residuals[0] >= 100 * residuals[2]
