"""Pullback assembly of the moving-domain Galerkin system on the reference box.

Every integral over Omega_t is evaluated on Omega_0 with weight J_t; physical
gradients of the pushforward basis are (grad Phi_t)^{-1} grad_X w_k^0.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigvalsh

from config import settings
from src.errors import InputError, SingularMassError
from src.galerkin.models import Forcing, ProblemData, SystemSnapshot
from src.geometry.motion import DomainMotion
from src.spectral.basis import BasisSet
from src.spectral.quadrature import QuadratureRule

logger = logging.getLogger(__name__)


# -- Deterministic blocked reductions --

@lru_cache(maxsize=None)
def _executor(workers: int) -> ThreadPoolExecutor:
    return ThreadPoolExecutor(max_workers=workers, thread_name_prefix="mopla-assembly")


def _blocks(size: int, threads: int) -> list[slice]:
    count = max(1, min(threads, size))
    edges = np.linspace(0, size, count + 1).astype(int)
    return [slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def blocked_sum(partial: Callable[[slice], np.ndarray], size: int) -> np.ndarray:
    """Sum ``partial`` over contiguous node blocks, adding the block results in order."""
    blocks = _blocks(size, settings.threads)
    if len(blocks) == 1:
        return partial(blocks[0])
    results = list(_executor(len(blocks)).map(partial, blocks))
    total = np.array(results[0], dtype=float, copy=True)
    for part in results[1:]:
        total += part
    return total


# -- Geometry at one time --

@dataclass(frozen=True)
class PullbackFrame:
    t: float
    X: np.ndarray               # (q, n) reference nodes
    x: np.ndarray               # (q, n) Phi_t(X)
    J: np.ndarray               # (q,)
    weights: np.ndarray         # (q,) quadrature weight * J
    values: np.ndarray          # (q, N) w_k^0(X)
    grads: np.ndarray           # (q, N, n) (grad w_k^t) o Phi_t
    ref_grads: np.ndarray       # (q, N, n) grad_X w_k^0
    inverse_gradient: np.ndarray   # (q, n, n) (grad Phi_t)^{-1}
    velocity: np.ndarray        # (q, n) v o Phi_t
    velocity_gradient: np.ndarray  # (q, n, n) (grad v) o Phi_t
    divergence: np.ndarray      # (q,)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    @property
    def volume(self) -> float:
        return float(self.weights.sum())

    def solution(self, alpha: np.ndarray) -> np.ndarray:
        return self.values @ alpha

    def solution_gradient(self, alpha: np.ndarray) -> np.ndarray:
        return np.einsum("qkd,k->qd", self.grads, alpha)


def pullback_frame(basis: BasisSet, rule: QuadratureRule, motion: DomainMotion, t: float) -> PullbackFrame:
    X = rule.nodes
    values, ref_grads = basis.tabulate(rule)
    J = motion.jacobian_det(X, t)
    Ginv = motion.inverse_gradient(X, t)
    grad_v = Ginv @ motion.reference_velocity_gradient(X, t)
    return PullbackFrame(
        t=t,
        X=X,
        x=motion.map_point(X, t),
        J=J,
        weights=rule.weights * J,
        values=values,
        grads=np.einsum("qij,qkj->qki", Ginv, ref_grads),
        ref_grads=ref_grads,
        inverse_gradient=Ginv,
        velocity=motion.reference_velocity(X, t),
        velocity_gradient=grad_v,
        divergence=np.trace(grad_v, axis1=1, axis2=2),
    )


def p_flux(g: np.ndarray, p: float) -> np.ndarray:
    """|g|^(p-2) g row-wise, with |0|^(p-2) = 0 for p > 2."""
    norm = np.linalg.norm(g, axis=-1)
    return np.power(norm, p - 2)[..., None] * g


# -- Matrices and vectors --

def assemble_mass(
    basis: BasisSet, rule: QuadratureRule, motion: DomainMotion, t: float,
    frame: PullbackFrame | None = None,
) -> np.ndarray:
    fr = frame or pullback_frame(basis, rule, motion, t)
    W, wJ = fr.values, fr.weights
    M = blocked_sum(lambda s: (W[s] * wJ[s, None]).T @ W[s], fr.size)
    return 0.5 * (M + M.T)


def assemble_transport(
    basis: BasisSet, rule: QuadratureRule, motion: DomainMotion, t: float,
    frame: PullbackFrame | None = None,
) -> np.ndarray:
    """B_kl = (v . grad w_k + w_k div v, w_l) on Omega_t."""
    fr = frame or pullback_frame(basis, rule, motion, t)
    A = np.einsum("qd,qkd->qk", fr.velocity, fr.grads) + fr.values * fr.divergence[:, None]
    W, wJ = fr.values, fr.weights
    return blocked_sum(lambda s: (A[s] * wJ[s, None]).T @ W[s], fr.size)


def assemble_plaplacian(
    basis: BasisSet, rule: QuadratureRule, motion: DomainMotion, alpha: np.ndarray, t: float, p: float,
    frame: PullbackFrame | None = None,
) -> np.ndarray:
    """gamma_k = (|grad u|^(p-2) grad u, grad w_k) on Omega_t with u = sum alpha_l w_l."""
    fr = frame or pullback_frame(basis, rule, motion, t)
    flux = p_flux(fr.solution_gradient(np.asarray(alpha, dtype=float)), p) * fr.weights[:, None]
    return blocked_sum(lambda s: np.einsum("qd,qkd->k", flux[s], fr.grads[s]), fr.size)


def plaplacian_jacobian(frame: PullbackFrame, alpha: np.ndarray, p: float) -> np.ndarray:
    """d gamma_k / d alpha_l = sum w J [|g|^(p-2) grad w_k . grad w_l + (p-2)|g|^(p-4)(g . grad w_k)(g . grad w_l)]."""
    g = frame.solution_gradient(alpha)
    norm = np.linalg.norm(g, axis=1)
    scale = np.power(norm, p - 2) * frame.weights
    direction = np.divide(g, norm[:, None], out=np.zeros_like(g), where=norm[:, None] > 0)
    proj = np.einsum("qd,qkd->qk", direction, frame.grads)

    def partial(s: slice) -> np.ndarray:
        iso = np.einsum("q,qkd,qld->kl", scale[s], frame.grads[s], frame.grads[s])
        aniso = (proj[s] * scale[s, None]).T @ proj[s]
        return iso + (p - 2) * aniso

    return blocked_sum(partial, frame.size)


def assemble_stiffness(
    basis: BasisSet, rule: QuadratureRule, motion: DomainMotion, t: float,
) -> np.ndarray:
    """K_kl = (grad w_k, grad w_l) on Omega_t through the metric (grad Phi grad Phi^T)^{-1}."""
    X = rule.nodes
    _, ref_grads = basis.tabulate(rule)
    G = motion.map_gradient(X, t)
    metric = G @ np.swapaxes(G, 1, 2)
    mapped = np.linalg.solve(metric, np.swapaxes(ref_grads, 1, 2))  # (q, n, N)
    wJ = rule.weights * motion.jacobian_det(X, t)
    return blocked_sum(
        lambda s: np.einsum("q,qkd,qdl->kl", wJ[s], ref_grads[s], mapped[s]), rule.size
    )


def assemble_load(
    basis: BasisSet, rule: QuadratureRule, motion: DomainMotion, f: Forcing, t: float,
    frame: PullbackFrame | None = None,
) -> np.ndarray:
    """f_k = int_Omega_0 f(Phi_t(X), t) w_k^0(X) J_t(X) dX."""
    fr = frame or pullback_frame(basis, rule, motion, t)
    fv = np.asarray(f(fr.X, fr.x, t), dtype=float).reshape(-1)
    bad = ~np.isfinite(fv)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise InputError(f"non-finite forcing at X={tuple(fr.X[i])}, t={t:.6g}")
    weighted = fv * fr.weights
    return blocked_sum(lambda s: fr.values[s].T @ weighted[s], fr.size)


def assemble_snapshot(
    basis: BasisSet, rule: QuadratureRule, motion: DomainMotion, problem: ProblemData, t: float,
    frame: PullbackFrame | None = None,
) -> SystemSnapshot:
    fr = frame or pullback_frame(basis, rule, motion, t)
    return SystemSnapshot(
        t=t,
        M=assemble_mass(basis, rule, motion, t, frame=fr),
        B=assemble_transport(basis, rule, motion, t, frame=fr),
        load=assemble_load(basis, rule, motion, problem.forcing, t, frame=fr),
    )


def factor_mass(M: np.ndarray, t: float):
    try:
        return cho_factor(M, lower=True, check_finite=False)
    except LinAlgError:
        smallest = float(eigvalsh(M)[0]) if np.all(np.isfinite(M)) else float("nan")
        raise SingularMassError(t, smallest) from None


def rhs(
    snapshot: SystemSnapshot,
    gamma: Callable[[np.ndarray], np.ndarray],
    alpha: np.ndarray,
    t: float,
) -> np.ndarray:
    """g_N(alpha, t) = M^{-1} [f_N - gamma_N(alpha) - B alpha]."""
    residual = snapshot.load - gamma(alpha) - snapshot.B @ alpha
    return cho_solve(factor_mass(snapshot.M, t), residual, check_finite=False)


class GalerkinSystem:
    """Evaluates the reduced ODE alpha' = g_N(alpha, t) for one problem on one moving domain."""

    def __init__(
        self, problem: ProblemData, basis: BasisSet, rule: QuadratureRule, motion: DomainMotion,
    ) -> None:
        self.problem = problem
        self.basis = basis
        self.rule = rule
        self.motion = motion
        self.evaluations = 0
        self._cached: tuple[float, PullbackFrame, SystemSnapshot, tuple] | None = None

    def _at(self, t: float) -> tuple[PullbackFrame, SystemSnapshot, tuple]:
        if self._cached is None or self._cached[0] != t:
            frame = pullback_frame(self.basis, self.rule, self.motion, t)
            snap = assemble_snapshot(self.basis, self.rule, self.motion, self.problem, t, frame=frame)
            self._cached = (t, frame, snap, factor_mass(snap.M, t))
        return self._cached[1], self._cached[2], self._cached[3]

    def frame(self, t: float) -> PullbackFrame:
        return self._at(t)[0]

    def snapshot(self, t: float) -> SystemSnapshot:
        return self._at(t)[1]

    def gamma(self, t: float, alpha: np.ndarray) -> np.ndarray:
        frame = self._at(t)[0]
        return assemble_plaplacian(
            self.basis, self.rule, self.motion, alpha, t, self.problem.p, frame=frame
        )

    def __call__(self, t: float, alpha: np.ndarray) -> np.ndarray:
        self.evaluations += 1
        frame, snap, factor = self._at(t)
        residual = snap.load - self.gamma(t, alpha) - snap.B @ alpha
        return cho_solve(factor, residual, check_finite=False)

    def midpoint_residual(self, t: float, h: float, y0: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """R(y) = 2 M (y - y0) - h (f - gamma(y) - B y) and dR/dy at the midpoint time."""
        frame, snap, _ = self._at(t)
        self.evaluations += 1
        R = 2.0 * snap.M @ (y - y0) - h * (snap.load - self.gamma(t, y) - snap.B @ y)
        dR = 2.0 * snap.M + h * (plaplacian_jacobian(frame, y, self.problem.p) + snap.B)
        return R, dR
