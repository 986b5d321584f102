"""Time integration of the reduced Galerkin ODE on a uniform output grid."""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.linalg import LinAlgError, solve

from src.errors import ConfigurationError, DivergenceError, RangeError, StiffnessError
from src.galerkin.assembly import GalerkinSystem
from src.galerkin.models import GalerkinTrajectory, ProblemData
from src.geometry.motion import DomainMotion, as_points
from src.spectral.basis import BasisSet, project_initial
from src.spectral.quadrature import QuadratureRule

logger = logging.getLogger(__name__)

METHODS = ("erk45", "implicit_midpoint")
DEFAULT_GRID_INTERVALS = 512

# Dormand-Prince 5(4), first-same-as-last
DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
DP_A = {
    1: [1 / 5],
    2: [3 / 40, 9 / 40],
    3: [44 / 45, -56 / 15, 32 / 9],
    4: [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    5: [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    6: [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
}
DP_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

# PI controller
BETA = 0.04
ALPHA = 0.2 - 0.75 * BETA
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 30


def output_grid(horizon: float, stride: float | None = None) -> np.ndarray:
    """Uniform grid with an even number of intervals, spacing at most ``stride``."""
    if not horizon > 0:
        raise ConfigurationError(f"T must be > 0 (got {horizon})")
    if stride is None:
        intervals = DEFAULT_GRID_INTERVALS
    else:
        if not stride > 0:
            raise ConfigurationError(f"ode.stride must be > 0 (got {stride})")
        intervals = max(2, math.ceil(horizon / stride - 1e-9))
    intervals += intervals % 2
    return np.linspace(0.0, horizon, intervals + 1)


def _error_norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray, rtol: float, atol: float) -> float:
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _initial_step(system, t0: float, y0: np.ndarray, f0: np.ndarray, rtol: float, atol: float) -> float:
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = system(t0 + h0, y0 + h0 * f0)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def _dopri_step(system, t: float, y: np.ndarray, f0: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    k = [f0]
    for stage in range(1, 7):
        increment = sum(a * ki for a, ki in zip(DP_A[stage], k) if a != 0.0)
        k.append(system(t + DP_C[stage] * h, y + h * increment))
    y_new = y + h * sum(b * ki for b, ki in zip(DP_A[6], k[:6]) if b != 0.0)
    err = h * sum(e * ki for e, ki in zip(DP_E, k) if e != 0.0)
    return y_new, k[6], err


def _integrate_erk45(
    system: GalerkinSystem, grid: np.ndarray, y0: np.ndarray, rtol: float, atol: float, max_steps: int,
    traj: GalerkinTrajectory,
) -> None:
    T = grid[-1]
    h_min = 1e-12 * T
    t, y = 0.0, y0
    f = system(t, y)
    if not np.all(np.isfinite(f)):
        raise DivergenceError(0.0)
    traj.derivatives[0] = f

    h = _initial_step(system, t, y, f, rtol, atol)
    err_prev = 1.0
    steps = 0
    next_out = 1
    while next_out < len(grid):
        if steps >= max_steps:
            raise StiffnessError(f"step budget of {max_steps} exhausted", t)
        steps += 1

        target = grid[next_out]
        landing = t + h >= target - 1e-12 * T
        h_try = target - t if landing else h

        y_new, f_new, err = _dopri_step(system, t, y, f, h_try)
        err_norm = _error_norm(err, y, y_new, rtol, atol)

        if not np.isfinite(err_norm):
            traj.rejected += 1
            h = h_try * MIN_FACTOR
            logger.debug("Non-finite error estimate at t=%.6g, h=%.3e; shrinking", t, h_try)
            if h < h_min:
                raise DivergenceError(t)
            continue

        if err_norm <= 1.0:
            if err_norm == 0.0:
                factor = MAX_FACTOR
            else:
                factor = SAFETY * err_norm ** (-ALPHA) * err_prev ** BETA
                factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            err_prev = max(err_norm, 1e-4)
            t = target if landing else t + h_try
            y, f = y_new, f_new
            if not (np.all(np.isfinite(y)) and np.all(np.isfinite(f))):
                raise DivergenceError(t - h_try)
            traj.accepted += 1
            if landing:
                traj.states[next_out] = y
                traj.derivatives[next_out] = f
                next_out += 1
            # a step clipped to the grid keeps the unclipped proposal
            h = max(h, h_try * factor) if landing and factor >= 1.0 else h_try * factor
        else:
            traj.rejected += 1
            factor = max(MIN_FACTOR, SAFETY * err_norm ** (-ALPHA))
            h = h_try * factor
            logger.debug("Rejected step at t=%.6g (h=%.3e, err=%.3e)", t, h_try, err_norm)

        if h < h_min:
            raise StiffnessError(f"step size {h:.3e} below 1e-12*T", t)


def _integrate_midpoint(
    system: GalerkinSystem, grid: np.ndarray, y0: np.ndarray, substeps: int, traj: GalerkinTrajectory,
) -> None:
    if substeps < 1:
        raise ConfigurationError(f"ode.substeps must be >= 1 (got {substeps})")
    traj.derivatives[0] = system(0.0, y0)
    y = y0
    for i in range(1, len(grid)):
        t0 = grid[i - 1]
        h = (grid[i] - t0) / substeps
        for j in range(substeps):
            t_mid = t0 + (j + 0.5) * h
            ym = y.copy()
            for iteration in range(1, NEWTON_MAX_ITER + 1):
                R, dR = system.midpoint_residual(t_mid, h, y, ym)
                try:
                    delta = solve(dR, R, check_finite=False)
                except LinAlgError:
                    raise StiffnessError("singular Newton matrix in implicit midpoint", t_mid) from None
                ym = ym - delta
                traj.newton_iterations += 1
                if not np.all(np.isfinite(ym)):
                    raise DivergenceError(t0)
                if np.linalg.norm(delta) <= NEWTON_TOL * (1.0 + np.linalg.norm(ym)):
                    break
            else:
                raise StiffnessError(f"Newton did not converge in {NEWTON_MAX_ITER} iterations", t_mid)
            y = 2.0 * ym - y
            traj.accepted += 1
        traj.states[i] = y
        traj.derivatives[i] = system(grid[i], y)


def integrate(
    problem: ProblemData,
    basis: BasisSet,
    rule: QuadratureRule,
    motion: DomainMotion,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    stride: float | None = None,
    method: str = "erk45",
    substeps: int = 4,
    max_steps: int = 1_000_000,
    alpha0: np.ndarray | None = None,
) -> GalerkinTrajectory:
    """Integrate alpha' = g_N(alpha, t) from the projected initial datum over [0, T]."""
    if method not in METHODS:
        raise ConfigurationError(f"ode.method must be one of {METHODS} (got {method!r})")
    if not (rtol > 0 and atol > 0):
        raise ConfigurationError(f"ode.rtol and ode.atol must be > 0 (got {rtol}, {atol})")
    if basis.dim != motion.dim:
        raise ConfigurationError(f"basis dim {basis.dim} does not match motion dim {motion.dim}")

    grid = output_grid(motion.horizon, stride)
    y0 = project_initial(problem.u0, basis, rule) if alpha0 is None else np.array(alpha0, dtype=float)
    system = GalerkinSystem(problem, basis, rule, motion)

    traj = GalerkinTrajectory(
        times=grid,
        states=np.zeros((len(grid), basis.N)),
        derivatives=np.zeros((len(grid), basis.N)),
        method=method,
        rtol=rtol,
        atol=atol,
    )
    traj.states[0] = y0

    if method == "erk45":
        _integrate_erk45(system, grid, y0, rtol, atol, max_steps, traj)
    else:
        _integrate_midpoint(system, grid, y0, substeps, traj)
    traj.evaluations = system.evaluations

    logger.info(
        "Integrated N=%d p=%g over [0, %g] with %s: %d accepted, %d rejected, %d evaluations",
        basis.N, problem.p, motion.horizon, method, traj.accepted, traj.rejected, traj.evaluations,
    )
    return traj


def evaluate_solution(
    traj: GalerkinTrajectory, basis: BasisSet, motion: DomainMotion, t: float, X,
) -> tuple[np.ndarray, np.ndarray]:
    """u_N(Phi_t(X), t) = sum_k alpha_k(t) w_k^0(X), returned with the mapped points Phi_t(X)."""
    if not (0.0 <= t <= traj.horizon):
        raise RangeError(f"t={t} outside [0, {traj.horizon}]")
    pts = as_points(X, motion.dim)
    alpha = traj.state_at(t)
    return basis.evaluate(pts) @ alpha, motion.map_point(pts, t)
