"""Closed-form moving-domain maps on the reference box [0, 1]^n.

Evaluators are vectorized over points: ``X`` has shape (m, n) and ``t`` is a scalar.
Gradients follow the convention that row ``i`` of ``map_gradient`` is the
derivative of the map with respect to ``X_i``, so that
grad(u o Phi) = (grad Phi) [(grad u) o Phi].
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from enum import Enum
from functools import cached_property

import numpy as np

from src.errors import ConfigurationError, GeometryDegeneracyError, UnsupportedDimensionError
from src.geometry.models import MotionBounds, MotionFamily, MotionKind

logger = logging.getLogger(__name__)

BOUNDS_SAMPLES = 64


class Endpoint(str, Enum):
    LEFT = "left"
    RIGHT = "right"


def as_points(X, dim: int) -> np.ndarray:
    """Coerce ``X`` to an (m, dim) float array."""
    pts = np.asarray(X, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts.reshape(-1, 1) if dim == 1 else pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[1] != dim:
        raise UnsupportedDimensionError(f"expected points of dimension {dim}, got shape {np.shape(X)}")
    return pts


class DomainMotion(ABC):
    """Closed-form bundle (Phi_t, grad Phi_t, J_t, d/dt Phi_t) of one motion family."""

    def __init__(self, family: MotionFamily) -> None:
        self.family = family

    @property
    def dim(self) -> int:
        return self.family.dim

    @property
    def horizon(self) -> float:
        return self.family.horizon

    @property
    def is_static(self) -> bool:
        return self.family.kind == MotionKind.STATIC

    # -- Closed-form evaluators --

    @abstractmethod
    def map_point(self, X: np.ndarray, t: float) -> np.ndarray: ...

    @abstractmethod
    def map_gradient(self, X: np.ndarray, t: float) -> np.ndarray: ...

    @abstractmethod
    def jacobian_det(self, X: np.ndarray, t: float) -> np.ndarray: ...

    @abstractmethod
    def reference_velocity(self, X: np.ndarray, t: float) -> np.ndarray: ...

    @abstractmethod
    def reference_velocity_gradient(self, X: np.ndarray, t: float) -> np.ndarray: ...

    @abstractmethod
    def jacobian_rate(self, X: np.ndarray, t: float) -> np.ndarray:
        """d/dt J_t(X)."""

    def jacobian_gradient(self, X: np.ndarray, t: float) -> np.ndarray:
        """grad_X J_t(X); zero for every family whose Jacobian is spatially constant."""
        return np.zeros((X.shape[0], self.dim))

    # -- Derived quantities --

    def inverse_gradient(self, X: np.ndarray, t: float) -> np.ndarray:
        G = self.map_gradient(X, t)
        det = np.linalg.det(G)
        bad = ~(np.abs(det) > 1e-14)
        if np.any(bad):
            raise GeometryDegeneracyError(
                "singular map gradient",
                [(tuple(X[i]), t) for i in np.flatnonzero(bad)],
            )
        return np.linalg.inv(G)

    def velocity_gradient(self, X: np.ndarray, t: float) -> np.ndarray:
        """(grad v) o Phi_t = (grad Phi_t)^{-1} grad_X d/dt Phi_t."""
        return self.inverse_gradient(X, t) @ self.reference_velocity_gradient(X, t)

    def divergence(self, X: np.ndarray, t: float) -> np.ndarray:
        return np.trace(self.velocity_gradient(X, t), axis1=1, axis2=2)

    @cached_property
    def bounds(self) -> MotionBounds:
        return estimate_bounds(self, BOUNDS_SAMPLES)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.family})"


class StaticMotion(DomainMotion):
    def map_point(self, X, t):
        return np.array(X, dtype=float, copy=True)

    def map_gradient(self, X, t):
        return np.broadcast_to(np.eye(self.dim), (X.shape[0], self.dim, self.dim)).copy()

    def jacobian_det(self, X, t):
        return np.ones(X.shape[0])

    def reference_velocity(self, X, t):
        return np.zeros_like(X, dtype=float)

    def reference_velocity_gradient(self, X, t):
        return np.zeros((X.shape[0], self.dim, self.dim))

    def jacobian_rate(self, X, t):
        return np.zeros(X.shape[0])


class TranslationMotion(StaticMotion):
    """Phi_t(X) = X + c t."""

    def __init__(self, family: MotionFamily) -> None:
        super().__init__(family)
        self.c = np.asarray(family.c, dtype=float)

    def map_point(self, X, t):
        return X + self.c * t

    def reference_velocity(self, X, t):
        return np.broadcast_to(self.c, X.shape).copy()


class DilationMotion(DomainMotion):
    """Phi_t(X) = x_c + s(t) (X - x_c) with s(t) = 1 + a sin(omega t)."""

    def __init__(self, family: MotionFamily) -> None:
        super().__init__(family)
        self.a = family.a
        self.omega = family.omega
        self.center = np.asarray(family.center, dtype=float)

    def scale(self, t: float) -> float:
        return 1.0 + self.a * np.sin(self.omega * t)

    def scale_rate(self, t: float) -> float:
        return self.a * self.omega * np.cos(self.omega * t)

    def map_point(self, X, t):
        return self.center + self.scale(t) * (X - self.center)

    def map_gradient(self, X, t):
        return self.scale(t) * np.broadcast_to(np.eye(self.dim), (X.shape[0], self.dim, self.dim))

    def jacobian_det(self, X, t):
        return np.full(X.shape[0], self.scale(t) ** self.dim)

    def reference_velocity(self, X, t):
        return self.scale_rate(t) * (X - self.center)

    def reference_velocity_gradient(self, X, t):
        return self.scale_rate(t) * np.broadcast_to(np.eye(self.dim), (X.shape[0], self.dim, self.dim))

    def jacobian_rate(self, X, t):
        n = self.dim
        return np.full(X.shape[0], n * self.scale(t) ** (n - 1) * self.scale_rate(t))


class ShearMotion(DomainMotion):
    """Phi_t(X) = (X_1 + a sin(omega t) sin(pi X_2), X_2); volume preserving."""

    def __init__(self, family: MotionFamily) -> None:
        super().__init__(family)
        self.a = family.a
        self.omega = family.omega

    def map_point(self, X, t):
        out = np.array(X, dtype=float, copy=True)
        out[:, 0] += self.a * np.sin(self.omega * t) * np.sin(np.pi * X[:, 1])
        return out

    def map_gradient(self, X, t):
        G = np.broadcast_to(np.eye(2), (X.shape[0], 2, 2)).copy()
        G[:, 1, 0] = self.a * np.sin(self.omega * t) * np.pi * np.cos(np.pi * X[:, 1])
        return G

    def jacobian_det(self, X, t):
        return np.ones(X.shape[0])

    def reference_velocity(self, X, t):
        out = np.zeros_like(X, dtype=float)
        out[:, 0] = self.a * self.omega * np.cos(self.omega * t) * np.sin(np.pi * X[:, 1])
        return out

    def reference_velocity_gradient(self, X, t):
        dV = np.zeros((X.shape[0], 2, 2))
        dV[:, 1, 0] = self.a * self.omega * np.cos(self.omega * t) * np.pi * np.cos(np.pi * X[:, 1])
        return dV

    def jacobian_rate(self, X, t):
        return np.zeros(X.shape[0])


_FAMILIES: dict[MotionKind, type[DomainMotion]] = {
    MotionKind.STATIC: StaticMotion,
    MotionKind.TRANSLATION: TranslationMotion,
    MotionKind.DILATION: DilationMotion,
    MotionKind.SHEAR2D: ShearMotion,
}


def _check_family(family: MotionFamily) -> MotionFamily:
    if family.dim not in (1, 2):
        raise ConfigurationError(f"dim must be 1 or 2 (got {family.dim})")
    if not family.horizon > 0:
        raise ConfigurationError(f"T must be > 0 (got {family.horizon})")
    if not (np.isfinite(family.a) and np.isfinite(family.omega)):
        raise ConfigurationError("motion.a and motion.omega must be finite")

    center = tuple(family.center) or (0.5,) * family.dim
    c = tuple(family.c) or (0.2,) + (0.0,) * (family.dim - 1)
    if len(center) != family.dim:
        raise ConfigurationError(f"motion.center must have {family.dim} entries (got {len(center)})")
    if len(c) != family.dim:
        raise ConfigurationError(f"motion.c must have {family.dim} entries (got {len(c)})")

    if family.kind == MotionKind.DILATION and not abs(family.a) < 1.0:
        raise ConfigurationError(f"dilation requires |motion.a| < 1 (got a={family.a})")
    if family.kind == MotionKind.SHEAR2D and family.dim != 2:
        raise ConfigurationError(f"shear2d requires dim = 2 (got dim={family.dim})")

    return MotionFamily(
        kind=MotionKind(family.kind),
        dim=family.dim,
        horizon=float(family.horizon),
        a=float(family.a),
        omega=float(family.omega),
        center=tuple(float(v) for v in center),
        c=tuple(float(v) for v in c),
    )


def motion_from_config(family: MotionFamily) -> DomainMotion:
    family = _check_family(family)
    motion = _FAMILIES[family.kind](family)
    logger.debug("Built %s (dim=%d, T=%g)", family.kind.value, family.dim, family.horizon)
    return motion


# -- Point-wise operations --

def reference_velocity(motion: DomainMotion, X, t: float) -> np.ndarray:
    """v(Phi_t(X), t) = d/dt Phi_t(X); returns shape (n,) for a single point."""
    pts = as_points(X, motion.dim)
    out = motion.reference_velocity(pts, t)
    return out[0] if np.ndim(X) <= (1 if motion.dim > 1 else 0) else out


def reference_divergence(motion: DomainMotion, X, t: float) -> np.ndarray | float:
    """(div v) o Phi_t = tr((grad Phi_t)^{-1} grad_X d/dt Phi_t)."""
    pts = as_points(X, motion.dim)
    out = motion.divergence(pts, t)
    return float(out[0]) if np.ndim(X) <= (1 if motion.dim > 1 else 0) else out


def boundary_normal_velocity(motion: DomainMotion, side: Endpoint | str, t: float) -> float:
    """V = v . nu at a moving endpoint of a one-dimensional domain."""
    if motion.dim != 1:
        raise UnsupportedDimensionError(
            f"boundary normal velocity is defined for dim = 1 only (got dim={motion.dim})"
        )
    side = Endpoint(side)
    X, normal = (0.0, -1.0) if side == Endpoint.LEFT else (1.0, 1.0)
    return float(motion.reference_velocity(np.array([[X]]), t)[0, 0] * normal)


# -- Sampling --

def reference_grid(dim: int, samples: int) -> np.ndarray:
    axis = np.linspace(0.0, 1.0, samples)
    if dim == 1:
        return axis[:, None]
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def check_positive_jacobian(motion: DomainMotion, X: np.ndarray, times: np.ndarray) -> None:
    offending: list[tuple] = []
    for t in times:
        J = motion.jacobian_det(X, t)
        for i in np.flatnonzero(~(J > 0)):
            offending.append((tuple(float(v) for v in X[i]), float(t)))
    if offending:
        raise GeometryDegeneracyError("J_t(X) <= 0", offending)


def estimate_bounds(motion: DomainMotion, samples: int) -> MotionBounds:
    """Estimate c0, c1, c2 and velocity bounds on a samples^n x samples space-time grid."""
    X = reference_grid(motion.dim, samples)
    times = np.linspace(0.0, motion.horizon, samples)
    check_positive_jacobian(motion, X, times)

    c0, c1, c2 = np.inf, 0.0, 0.0
    g1 = vmax = dvmax = divmax = 0.0
    for t in times:
        J = motion.jacobian_det(X, t)
        G = motion.map_gradient(X, t)
        Ginv = motion.inverse_gradient(X, t)
        grad_v = Ginv @ motion.reference_velocity_gradient(X, t)
        c0 = min(c0, float(J.min()))
        c1 = max(c1, float(J.max()))
        c2 = max(
            c2,
            float(np.linalg.norm(G, ord=2, axis=(1, 2)).max()),
            float(np.linalg.norm(Ginv, ord=2, axis=(1, 2)).max()),
        )
        g1 = max(g1, float(np.linalg.norm(motion.jacobian_gradient(X, t), axis=1).max()))
        vmax = max(vmax, float(np.linalg.norm(motion.reference_velocity(X, t), axis=1).max()))
        dvmax = max(dvmax, float(np.linalg.norm(grad_v, ord=2, axis=(1, 2)).max()))
        divmax = max(divmax, float(np.abs(np.trace(grad_v, axis1=1, axis2=2)).max()))

    return MotionBounds(
        c0=c0, c1=c1, c2=c2, g1=g1,
        velocity=vmax, velocity_gradient=dvmax, divergence=divmax,
    )
