from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from src.errors import ConfigurationError


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor Gauss-Legendre rule on [0, 1]^dim; exact for per-axis degree <= 2*order - 1."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int
    dim: int

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weights @ values)


def gauss_legendre_rule(order: int, dim: int = 1) -> QuadratureRule:
    if order < 1:
        raise ConfigurationError(f"quad.order must be >= 1 (got {order})")
    if dim not in (1, 2):
        raise ConfigurationError(f"dim must be 1 or 2 (got {dim})")

    # Nodes and weights on [-1, 1], mapped to [0, 1]
    xg, wg = np.polynomial.legendre.leggauss(order)
    xg = 0.5 * (xg + 1.0)
    wg = 0.5 * wg

    if dim == 1:
        nodes = xg[:, None]
        weights = wg
    else:
        xx, yy = np.meshgrid(xg, xg, indexing="ij")
        nodes = np.column_stack([xx.ravel(), yy.ravel()])
        weights = (wg[:, None] * wg[None, :]).ravel()

    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes=nodes, weights=weights, order=order, dim=dim)
