"""Tensor shifted-Legendre reference basis, orthonormalized in L2(Omega_0) by quadrature."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import Legendre

from src.errors import ConfigurationError, InputError, RankDeficiencyError
from src.spectral.quadrature import QuadratureRule

logger = logging.getLogger(__name__)

PIVOT_FLOOR = 1e-12


@lru_cache(maxsize=None)
def _shifted_legendre(degree: int) -> tuple[Legendre, Legendre]:
    # domain=[0, 1] evaluates P_d(2x - 1); deriv() includes the factor 2
    poly = Legendre.basis(degree, domain=[0.0, 1.0])
    return poly, poly.deriv()


@dataclass(frozen=True)
class LegendreMode:
    """prod_i P_{d_i}(2 X_i - 1)."""

    degrees: tuple[int, ...]

    def value(self, X: np.ndarray) -> np.ndarray:
        out = np.ones(X.shape[0])
        for axis, d in enumerate(self.degrees):
            out = out * _shifted_legendre(d)[0](X[:, axis])
        return out

    def gradient(self, X: np.ndarray) -> np.ndarray:
        factors = [_shifted_legendre(d)[0](X[:, axis]) for axis, d in enumerate(self.degrees)]
        grad = np.empty((X.shape[0], len(self.degrees)))
        for axis, d in enumerate(self.degrees):
            g = _shifted_legendre(d)[1](X[:, axis])
            for other, f in enumerate(factors):
                if other != axis:
                    g = g * f
            grad[:, axis] = g
        return grad

    __call__ = value


def raw_basis(dim: int, N: int) -> list[LegendreMode]:
    """First N tensor Legendre modes in graded order: (g, 0), (g-1, 1), ..., (0, g) per degree g."""
    if N < 1:
        raise ConfigurationError(f"basis.N must be >= 1 (got {N})")
    if dim not in (1, 2):
        raise ConfigurationError(f"dim must be 1 or 2 (got {dim})")

    if dim == 1:
        return [LegendreMode((d,)) for d in range(N)]

    modes: list[LegendreMode] = []
    g = 0
    while len(modes) < N:
        for i in range(g, -1, -1):
            modes.append(LegendreMode((i, g - i)))
            if len(modes) == N:
                break
        g += 1
    return modes


@dataclass(frozen=True)
class BasisSet:
    N: int
    dim: int
    modes: tuple[LegendreMode, ...]
    coefficients: np.ndarray  # raw -> orthonormal, w_k = sum_j C[j, k] raw_j
    rule: QuadratureRule
    values: np.ndarray        # (q, N)
    gradients: np.ndarray     # (q, N, dim)

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        raw = np.column_stack([m.value(X) for m in self.modes])
        return raw @ self.coefficients

    def evaluate_gradient(self, X: np.ndarray) -> np.ndarray:
        raw = np.stack([m.gradient(X) for m in self.modes], axis=1)
        return np.einsum("qjd,jk->qkd", raw, self.coefficients)

    def tabulate(self, rule: QuadratureRule) -> tuple[np.ndarray, np.ndarray]:
        if rule is self.rule:
            return self.values, self.gradients
        return self.evaluate(rule.nodes), self.evaluate_gradient(rule.nodes)

    def gram(self) -> np.ndarray:
        return self.values.T @ (self.rule.weights[:, None] * self.values)

    def reconstruct(self, coeffs: np.ndarray, X: np.ndarray | None = None) -> np.ndarray:
        table = self.values if X is None else self.evaluate(X)
        return table @ np.asarray(coeffs, dtype=float)


def orthonormalize(raw: list[LegendreMode], rule: QuadratureRule) -> BasisSet:
    """Modified Gram-Schmidt with one reorthogonalization pass in the quadrature L2 product."""
    if not raw:
        raise ConfigurationError("cannot orthonormalize an empty family")
    w = rule.weights
    V = np.column_stack([m.value(rule.nodes) for m in raw])
    N = V.shape[1]

    W = np.zeros_like(V)
    C = np.zeros((N, N))
    pivots = np.zeros(N)
    for k in range(N):
        v = V[:, k].copy()
        c = np.zeros(N)
        c[k] = 1.0
        norm0 = np.sqrt(w @ (v * v))
        for _ in range(2):
            for j in range(k):
                r = w @ (W[:, j] * v)
                v -= r * W[:, j]
                c -= r * C[:, j]
        pivot = np.sqrt(w @ (v * v))
        if not (norm0 > 0 and pivot > PIVOT_FLOOR * norm0):
            raise RankDeficiencyError(index=k + 1, pivot=float(pivot / norm0) if norm0 > 0 else 0.0)
        W[:, k] = v / pivot
        C[:, k] = c / pivot
        pivots[k] = pivot

    grads = np.stack([m.gradient(rule.nodes) for m in raw], axis=1)
    G = np.einsum("qjd,jk->qkd", grads, C)
    for arr in (W, C, G):
        arr.setflags(write=False)

    logger.debug("Orthonormalized %d modes on a %d-point rule (min pivot %.3e)", N, rule.size, pivots.min())
    return BasisSet(
        N=N,
        dim=rule.dim,
        modes=tuple(raw),
        coefficients=C,
        rule=rule,
        values=W,
        gradients=G,
    )


def build_basis(dim: int, N: int, rule: QuadratureRule) -> BasisSet:
    return orthonormalize(raw_basis(dim, N), rule)


def project_initial(
    u0: Callable[[np.ndarray], np.ndarray],
    basis: BasisSet,
    rule: QuadratureRule | None = None,
) -> np.ndarray:
    """Coefficients ((u0, w_k^0))_k of the L2(Omega_0) projection."""
    rule = rule or basis.rule
    values = np.asarray(u0(rule.nodes), dtype=float).reshape(-1)
    bad = ~np.isfinite(values)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise InputError(f"non-finite initial value at node X={tuple(rule.nodes[i])}")
    table, _ = basis.tabulate(rule)
    return table.T @ (rule.weights * values)
