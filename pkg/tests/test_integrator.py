from __future__ import annotations

import numpy as np
import pytest

from src.errors import ConfigurationError, DivergenceError, RangeError, StiffnessError
from src.galerkin.assembly import assemble_stiffness
from src.galerkin.integrator import evaluate_solution, integrate, output_grid
from src.galerkin.models import OdeOptions
from src.spectral.basis import build_basis
from src.spectral.quadrature import gauss_legendre_rule


@pytest.mark.parametrize("T, stride, intervals", [
    (1.0, None, 512),
    (1.0, 0.25, 4),
    (1.0, 0.4, 4),
    (1.0, 0.3, 4),
    (2.0, 1.0, 2),
])
def test_output_grid(T, stride, intervals):
    grid = output_grid(T, stride)
    assert len(grid) == intervals + 1
    assert grid[0] == 0.0 and grid[-1] == T


def test_output_grid_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        output_grid(0.0)
    with pytest.raises(ConfigurationError):
        output_grid(1.0, -0.1)


@pytest.fixture
def single_mode(make_motion, make_problem):
    rule = gauss_legendre_rule(8, 1)
    basis = build_basis(1, 1, rule)
    motion = make_motion("dilation", T=np.pi, a=0.3, omega=1.0)
    return make_problem(u0="constant"), basis, rule, motion


def test_single_mode_follows_the_volume(single_mode):
    problem, basis, rule, motion = single_mode
    traj = integrate(problem, basis, rule, motion, rtol=1e-10, atol=1e-10)
    assert traj.final_state[0] == pytest.approx(1.0 / (1.0 + 0.3 * np.sin(np.pi)), abs=1e-8)
    assert traj.state_at(np.pi / 2)[0] == pytest.approx(1 / 1.3, abs=1e-8)
    values, points = evaluate_solution(traj, basis, motion, np.pi / 2, np.array([0.0, 0.3, 1.0]))
    np.testing.assert_allclose(values, 1 / 1.3, atol=1e-8)
    np.testing.assert_allclose(points[:, 0], 0.5 + 1.3 * (np.array([0.0, 0.3, 1.0]) - 0.5))


def test_single_mode_implicit_midpoint(single_mode):
    problem, basis, rule, motion = single_mode
    traj = integrate(problem, basis, rule, motion, method="implicit_midpoint", substeps=4)
    assert traj.state_at(np.pi / 2)[0] == pytest.approx(1 / 1.3, abs=1e-6)
    assert traj.newton_iterations >= traj.accepted


def test_heat_equation_eigenmode(make_motion, make_problem):
    rule = gauss_legendre_rule(12, 1)
    basis = build_basis(1, 6, rule)
    motion = make_motion("static", T=0.05)
    K = assemble_stiffness(basis, rule, motion, 0.0)
    lam, vecs = np.linalg.eigh(K)
    alpha0 = vecs[:, 2]
    traj = integrate(make_problem(p=2.0), basis, rule, motion, rtol=1e-10, atol=1e-12, alpha0=alpha0)
    expected = np.exp(-lam[2] * traj.times)[:, None] * alpha0
    np.testing.assert_allclose(traj.states, expected, atol=1e-6)


def test_zero_is_a_fixed_point(make_motion, make_problem, basis_1d, rule_1d):
    traj = integrate(make_problem(u0="zero"), basis_1d, rule_1d, make_motion("dilation", a=0.3), stride=0.1)
    np.testing.assert_array_equal(traj.states, 0.0)


def test_trajectory_layout_and_interpolation(make_motion, make_problem, basis_1d, rule_1d):
    motion = make_motion("translation", T=0.2, c=(0.2,))
    traj = integrate(make_problem(), basis_1d, rule_1d, motion, stride=0.01)
    assert traj.states.shape == (21, 8) == traj.derivatives.shape
    np.testing.assert_array_equal(traj.state_at(traj.times[7]), traj.states[7])
    with pytest.raises(RangeError):
        traj.state_at(0.3)
    with pytest.raises(RangeError):
        evaluate_solution(traj, basis_1d, motion, -0.1, [0.5])
    values, _ = evaluate_solution(traj, basis_1d, motion, 0.0, rule_1d.nodes)
    np.testing.assert_allclose(values, basis_1d.values @ traj.initial_state, atol=1e-10)


def test_runs_are_bitwise_reproducible(dilation, make_problem, basis_1d, rule_1d):
    options = OdeOptions(stride=0.05)
    first = integrate(make_problem(), basis_1d, rule_1d, dilation, **options.as_kwargs())
    second = integrate(make_problem(), basis_1d, rule_1d, dilation, **options.as_kwargs())
    np.testing.assert_array_equal(first.states, second.states)
    assert first.accepted == second.accepted


def test_rejects_bad_options(dilation, make_problem, basis_1d, rule_1d):
    with pytest.raises(ConfigurationError, match="ode.method"):
        integrate(make_problem(), basis_1d, rule_1d, dilation, method="euler")
    with pytest.raises(ConfigurationError, match="rtol"):
        integrate(make_problem(), basis_1d, rule_1d, dilation, rtol=0.0)


def test_step_budget(dilation, make_problem, basis_1d, rule_1d):
    with pytest.raises(StiffnessError, match="step budget"):
        integrate(make_problem(), basis_1d, rule_1d, dilation, max_steps=3)


def test_non_finite_state_diverges(dilation, make_problem, basis_1d, rule_1d):
    alpha0 = np.full(8, np.nan)
    with pytest.raises(DivergenceError) as excinfo:
        integrate(make_problem(), basis_1d, rule_1d, dilation, alpha0=alpha0)
    assert excinfo.value.last_good_time == 0.0


def test_halved_options():
    options = OdeOptions(rtol=1e-8, atol=1e-10, substeps=4).halved()
    assert (options.rtol, options.atol, options.substeps) == (5e-9, 5e-11, 8)
