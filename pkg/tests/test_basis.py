from __future__ import annotations

import numpy as np
import pytest

from src.errors import ConfigurationError, InputError, RankDeficiencyError
from src.spectral.basis import LegendreMode, build_basis, orthonormalize, project_initial, raw_basis
from src.spectral.quadrature import gauss_legendre_rule


# -- Quadrature --

def test_midpoint_rule():
    rule = gauss_legendre_rule(1, 1)
    np.testing.assert_allclose(rule.nodes, [[0.5]])
    np.testing.assert_allclose(rule.weights, [1.0])
    assert rule.integrate(3.0 * rule.nodes[:, 0] + 1.0) == pytest.approx(2.5)


def test_two_point_rule_is_exact_to_degree_three():
    rule = gauss_legendre_rule(2, 1)
    assert rule.integrate(rule.nodes[:, 0] ** 3) == pytest.approx(0.25, abs=1e-15)


def test_tensor_rule_exactness():
    rule = gauss_legendre_rule(2, 2)
    assert rule.size == 4
    x, y = rule.nodes[:, 0], rule.nodes[:, 1]
    assert rule.integrate(x**3 * y**3) == pytest.approx(1 / 16, abs=1e-15)


@pytest.mark.parametrize("order", [3, 8, 20])
def test_weights_sum_to_volume(order):
    assert gauss_legendre_rule(order, 2).weights.sum() == pytest.approx(1.0, abs=1e-14)


def test_rule_is_read_only():
    rule = gauss_legendre_rule(4, 1)
    with pytest.raises(ValueError):
        rule.weights[0] = 0.0


def test_invalid_rule():
    with pytest.raises(ConfigurationError):
        gauss_legendre_rule(0, 1)
    with pytest.raises(ConfigurationError):
        gauss_legendre_rule(4, 3)


# -- Raw family --

def test_raw_basis_ordering():
    assert [m.degrees for m in raw_basis(1, 3)] == [(0,), (1,), (2,)]
    assert [m.degrees for m in raw_basis(2, 3)] == [(0, 0), (1, 0), (0, 1)]
    assert [m.degrees for m in raw_basis(2, 6)][3:] == [(2, 0), (1, 1), (0, 2)]
    assert [m.degrees for m in raw_basis(1, 1)] == [(0,)]


def test_shifted_legendre_values():
    X = np.array([[0.0], [0.5], [1.0]])
    np.testing.assert_allclose(LegendreMode((1,)).value(X), [-1.0, 0.0, 1.0])
    np.testing.assert_allclose(LegendreMode((2,)).value(X), [1.0, -0.5, 1.0])
    np.testing.assert_allclose(LegendreMode((2,)).gradient(X)[:, 0], [-6.0, 0.0, 6.0])


# -- Orthonormalization --

def test_legendre_family_is_only_rescaled():
    rule = gauss_legendre_rule(12, 1)
    basis = build_basis(1, 6, rule)
    X = np.linspace(0.0, 1.0, 11)[:, None]
    W = basis.evaluate(X)
    for k in range(6):
        expected = np.sqrt(2 * k + 1) * LegendreMode((k,)).value(X)
        np.testing.assert_allclose(W[:, k], expected, atol=1e-10)


def test_basis_records_its_raw_family_and_transformation():
    rule = gauss_legendre_rule(8, 2)
    basis = build_basis(2, 6, rule)
    assert basis.modes == tuple(raw_basis(2, 6))
    C = basis.coefficients
    np.testing.assert_array_equal(C, np.triu(C))
    raw = np.column_stack([m.value(rule.nodes) for m in basis.modes])
    np.testing.assert_allclose(raw @ C, basis.values, atol=1e-10)


@pytest.mark.parametrize("dim, N, order", [(1, 16, 24), (2, 10, 12)])
def test_gram_identity(dim, N, order):
    basis = build_basis(dim, N, gauss_legendre_rule(order, dim))
    np.testing.assert_allclose(basis.gram(), np.eye(N), atol=1e-10)


def test_gram_identity_on_an_independent_rule():
    basis = build_basis(1, 10, gauss_legendre_rule(12, 1))
    fine = gauss_legendre_rule(30, 1)
    values, _ = basis.tabulate(fine)
    np.testing.assert_allclose(values.T @ (fine.weights[:, None] * values), np.eye(10), atol=1e-10)


def test_duplicate_function_is_rank_deficient():
    raw = [LegendreMode((0,)), LegendreMode((1,)), LegendreMode((1,))]
    with pytest.raises(RankDeficiencyError) as excinfo:
        orthonormalize(raw, gauss_legendre_rule(8, 1))
    assert excinfo.value.index == 3


def test_under_resolved_rule_is_rank_deficient():
    with pytest.raises(RankDeficiencyError):
        build_basis(1, 16, gauss_legendre_rule(2, 1))


def test_gradients_match_finite_differences():
    basis = build_basis(2, 6, gauss_legendre_rule(8, 2))
    X = np.random.default_rng(1).uniform(0.1, 0.9, size=(5, 2))
    h = 1e-6
    G = basis.evaluate_gradient(X)
    for axis in range(2):
        step = np.zeros(2)
        step[axis] = h
        fd = (basis.evaluate(X + step) - basis.evaluate(X - step)) / (2 * h)
        np.testing.assert_allclose(G[:, :, axis], fd, atol=1e-6)


# -- Projection --

def test_projection_of_a_basis_function(basis_1d):
    alpha = project_initial(lambda X: basis_1d.evaluate(X)[:, 2], basis_1d)
    np.testing.assert_allclose(alpha, np.eye(8)[2], atol=1e-12)


def test_projection_of_a_constant(basis_1d):
    alpha = project_initial(lambda X: np.full(X.shape[0], 2.0), basis_1d)
    np.testing.assert_allclose(alpha, [2.0] + [0.0] * 7, atol=1e-12)


def test_projection_of_identity_map():
    basis = build_basis(1, 2, gauss_legendre_rule(4, 1))
    alpha = project_initial(lambda X: X[:, 0], basis)
    np.testing.assert_allclose(alpha, [0.5, 1 / (2 * np.sqrt(3))], atol=1e-12)


def test_bessel_inequality(basis_1d, random_smooth):
    rng = np.random.default_rng(7)
    fine = gauss_legendre_rule(40, 1)
    for _ in range(100):
        u0 = random_smooth(rng)
        alpha = project_initial(u0, basis_1d)
        norm2 = fine.integrate(u0(fine.nodes) ** 2)
        assert alpha @ alpha <= norm2 * (1 + 1e-12)


def test_projection_rejects_non_finite_data(basis_1d):
    with pytest.raises(InputError, match="non-finite"):
        project_initial(lambda X: np.where(np.arange(X.shape[0]) == 3, np.nan, 1.0), basis_1d)


def test_reconstruct_reproduces_nodal_values(basis_1d):
    alpha = np.arange(1.0, 9.0)
    np.testing.assert_allclose(basis_1d.reconstruct(alpha), basis_1d.values @ alpha)
    X = basis_1d.rule.nodes
    np.testing.assert_allclose(basis_1d.reconstruct(alpha, X), basis_1d.values @ alpha, atol=1e-12)
