from __future__ import annotations

import logging

import numpy as np

from src.errors import ConfigurationError
from src.geometry.models import MotionValidationReport
from src.geometry.motion import DomainMotion, check_positive_jacobian, estimate_bounds, reference_grid

logger = logging.getLogger(__name__)


def _max_abs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def validate_motion(
    motion: DomainMotion,
    samples: int = 32,
    h: float = 1e-5,
    tol: float = 1e-6,
) -> MotionValidationReport:
    """Compare the closed-form derivatives of ``motion`` with centered finite differences.

    Runs on a samples^n x samples space-time grid. Raises GeometryDegeneracyError
    if any sampled J_t(X) <= 0.
    """
    if not h > 0:
        raise ConfigurationError(f"geometry.h must be > 0 (got {h})")
    if not tol > 0:
        raise ConfigurationError(f"geometry.tol must be > 0 (got {tol})")
    if samples < 2:
        raise ConfigurationError(f"geometry.samples must be >= 2 (got {samples})")

    X = reference_grid(motion.dim, samples)
    times = np.linspace(0.0, motion.horizon, samples)
    check_positive_jacobian(motion, X, times)

    n = motion.dim
    report = MotionValidationReport(family=motion.family, h=h, tol=tol, samples=samples)
    for t in times:
        V = motion.reference_velocity(X, t)
        G = motion.map_gradient(X, t)
        J = motion.jacobian_det(X, t)
        dV = motion.reference_velocity_gradient(X, t)

        V_fd = (motion.map_point(X, t + h) - motion.map_point(X, t - h)) / (2 * h)
        J_fd = (motion.jacobian_det(X, t + h) - motion.jacobian_det(X, t - h)) / (2 * h)

        G_fd = np.empty_like(G)
        dV_fd = np.empty_like(dV)
        gradJ_fd = np.empty((X.shape[0], n))
        for i in range(n):
            step = np.zeros(n)
            step[i] = h
            G_fd[:, i, :] = (motion.map_point(X + step, t) - motion.map_point(X - step, t)) / (2 * h)
            dV_fd[:, i, :] = (
                motion.reference_velocity(X + step, t) - motion.reference_velocity(X - step, t)
            ) / (2 * h)
            gradJ_fd[:, i] = (motion.jacobian_det(X + step, t) - motion.jacobian_det(X - step, t)) / (2 * h)

        div = motion.divergence(X, t)

        report.velocity_error = max(report.velocity_error, _max_abs(V - V_fd))
        report.gradient_error = max(report.gradient_error, _max_abs(G - G_fd))
        report.jacobian_error = max(report.jacobian_error, _max_abs(motion.jacobian_rate(X, t) - J_fd))
        report.determinant_error = max(report.determinant_error, _max_abs(np.linalg.det(G) - J))
        report.velocity_gradient_error = max(report.velocity_gradient_error, _max_abs(dV - dV_fd))
        report.jacobian_gradient_error = max(
            report.jacobian_gradient_error, _max_abs(motion.jacobian_gradient(X, t) - gradJ_fd)
        )
        report.jacobi_residual = max(report.jacobi_residual, _max_abs(div * J - J_fd))

    report.bounds = estimate_bounds(motion, samples)
    if not report.passed:
        worst = max(report.discrepancies().items(), key=lambda kv: kv[1])
        report.notes.append(f"largest discrepancy: {worst[0]} = {worst[1]:.3e}")

    logger.info(
        "Motion %s validated: jacobi=%.2e velocity=%.2e gradient=%.2e c0=%.4g c1=%.4g c2=%.4g (%s)",
        motion.family.kind.value,
        report.jacobi_residual,
        report.velocity_error,
        report.gradient_error,
        report.bounds.c0,
        report.bounds.c1,
        report.bounds.c2,
        "pass" if report.passed else "FAIL",
    )
    return report
