"""Conservation and energy identities of the semidiscrete system, evaluated along a trajectory.

Time integrals use composite Simpson on the uniform output grid. Each check also
reports |Simpson - trapezoid| for its time integrals as an estimate of the
time-quadrature share of the residual.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_simpson, cumulative_trapezoid, simpson
from scipy.linalg import eigvalsh

from src.diagnostics.models import CheckResult, Formula, IdentityResult
from src.errors import InputError, UnsupportedDimensionError
from src.galerkin.assembly import assemble_mass, p_flux, pullback_frame
from src.galerkin.models import GalerkinTrajectory, ProblemData
from src.geometry.motion import DomainMotion, Endpoint, boundary_normal_velocity
from src.spectral.basis import BasisSet
from src.spectral.quadrature import QuadratureRule

logger = logging.getLogger(__name__)

Window = tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]


@dataclass
class TrajectorySweep:
    """Spatial integrals over Omega_t at every grid time of a trajectory."""

    times: np.ndarray
    volume: np.ndarray
    mass: np.ndarray            # (u, 1)
    l2_squared: np.ndarray      # ||u||^2
    gradient_p: np.ndarray      # ||grad u||_p^p
    forcing_mass: np.ndarray    # (f, 1)
    forcing_work: np.ndarray    # (f, u)
    transport: np.ndarray       # (u, v . grad u)
    dilation: np.ndarray        # (u^2, div v)
    material: np.ndarray        # ||d/dt. u||^2
    flux_rate: np.ndarray       # (|grad u|^(p-2) grad u, grad d/dt. u)
    remainder: np.ndarray       # R1(u)


def sweep_trajectory(
    traj: GalerkinTrajectory,
    problem: ProblemData,
    motion: DomainMotion,
    basis: BasisSet,
    rule: QuadratureRule,
) -> TrajectorySweep:
    n = len(traj.times)
    out = {name: np.zeros(n) for name in (
        "volume", "mass", "l2_squared", "gradient_p", "forcing_mass", "forcing_work",
        "transport", "dilation", "material", "flux_rate", "remainder",
    )}
    p = problem.p
    for i, t in enumerate(traj.times):
        fr = pullback_frame(basis, rule, motion, float(t))
        alpha, rate = traj.states[i], traj.derivatives[i]
        wJ = fr.weights
        u = fr.solution(alpha)
        grad_u = fr.solution_gradient(alpha)
        du = fr.solution(rate)
        grad_du = fr.solution_gradient(rate)
        norm = np.linalg.norm(grad_u, axis=1)
        flux = p_flux(grad_u, p)
        f = np.asarray(problem.forcing(fr.X, fr.x, float(t)), dtype=float).reshape(-1)
        strain = np.einsum("qij,qj->qi", fr.velocity_gradient, grad_u)

        out["volume"][i] = wJ.sum()
        out["mass"][i] = wJ @ u
        out["l2_squared"][i] = wJ @ (u * u)
        out["gradient_p"][i] = wJ @ norm**p
        out["forcing_mass"][i] = wJ @ f
        out["forcing_work"][i] = wJ @ (f * u)
        out["transport"][i] = wJ @ (u * np.einsum("qd,qd->q", fr.velocity, grad_u))
        out["dilation"][i] = wJ @ (u * u * fr.divergence)
        out["material"][i] = wJ @ (du * du)
        out["flux_rate"][i] = wJ @ np.einsum("qd,qd->q", flux, grad_du)
        out["remainder"][i] = wJ @ (-np.einsum("qd,qd->q", flux, strain) + norm**p * fr.divergence / p)

    return TrajectorySweep(times=traj.times, **out)


def _cumulative(y: np.ndarray, times: np.ndarray) -> np.ndarray:
    return cumulative_simpson(y, x=times, initial=0.0)


def _time_budget(*integrands: np.ndarray, times: np.ndarray) -> float:
    budget = 0.0
    for y in integrands:
        diff = _cumulative(y, times) - cumulative_trapezoid(y, x=times, initial=0.0)
        budget += float(np.max(np.abs(diff)))
    return budget


def _sweep(sweep, traj, problem, motion, basis, rule) -> TrajectorySweep:
    return sweep if sweep is not None else sweep_trajectory(traj, problem, motion, basis, rule)


# -- Identities --

def mass_identity(
    traj: GalerkinTrajectory,
    problem: ProblemData,
    motion: DomainMotion,
    basis: BasisSet,
    rule: QuadratureRule,
    tol: float = 1e-7,
    sweep: TrajectorySweep | None = None,
) -> IdentityResult:
    """r(t) = (u_N(t), 1) - (u_N(0), 1) - int_0^t (f, 1) ds."""
    sw = _sweep(sweep, traj, problem, motion, basis, rule)
    supplied = _cumulative(sw.forcing_mass, sw.times)
    residual = sw.mass - sw.mass[0] - supplied
    value = float(np.max(np.abs(residual)))
    series = pd.DataFrame({
        "t": sw.times,
        "mass": sw.mass,
        "forcing_integral": supplied,
        "residual": residual,
    })
    check = CheckResult(
        name="mass",
        formula=Formula.MASS,
        value=value,
        tolerance=tol,
        passed=bool(np.isfinite(value) and value <= tol),
        note=f"time-quadrature budget {_time_budget(sw.forcing_mass, times=sw.times):.2e}",
    )
    return IdentityResult(series=series, check=check)


def energy_identity(
    traj: GalerkinTrajectory,
    problem: ProblemData,
    motion: DomainMotion,
    basis: BasisSet,
    rule: QuadratureRule,
    tol: float = 1e-6,
    sweep: TrajectorySweep | None = None,
) -> IdentityResult:
    """1/2 ||u(t)||^2 + int ||grad u||_p^p = 1/2 ||u_0N||^2 + I1 + I2 + I3.

    I1 = int (f, u), I2 = -int (u, v . grad u), I3 = -1/2 int (u, u div v).
    """
    sw = _sweep(sweep, traj, problem, motion, basis, rule)
    kinetic = 0.5 * sw.l2_squared
    dissipation = _cumulative(sw.gradient_p, sw.times)
    i1 = _cumulative(sw.forcing_work, sw.times)
    i2 = -_cumulative(sw.transport, sw.times)
    i3 = -0.5 * _cumulative(sw.dilation, sw.times)
    residual = kinetic + dissipation - (kinetic[0] + i1 + i2 + i3)
    value = float(np.max(np.abs(residual)))
    series = pd.DataFrame({
        "t": sw.times,
        "kinetic": kinetic,
        "dissipation": dissipation,
        "forcing_work": i1,
        "transport_work": i2,
        "dilation_work": i3,
        "residual": residual,
    })
    budget = _time_budget(sw.gradient_p, sw.forcing_work, sw.transport, sw.dilation, times=sw.times)
    check = CheckResult(
        name="energy_identity",
        formula=Formula.ENERGY_IDENTITY,
        value=value,
        tolerance=tol,
        passed=bool(np.isfinite(value) and value <= tol),
        note=f"time-quadrature budget {budget:.2e}",
    )
    return IdentityResult(series=series, check=check)


def energy_bound(
    traj: GalerkinTrajectory,
    problem: ProblemData,
    motion: DomainMotion,
    basis: BasisSet,
    rule: QuadratureRule,
    sweep: TrajectorySweep | None = None,
    monotone_tol: float = 1e-10,
) -> IdentityResult:
    """sup_t ||u_N(t)||^2 + int_0^t ||grad u_N||_p^p, with its bookkeeping checks."""
    sw = _sweep(sweep, traj, problem, motion, basis, rule)
    dissipation = _cumulative(sw.gradient_p, sw.times)
    left = sw.l2_squared + dissipation
    value = float(np.max(left))

    notes: list[str] = []
    passed = bool(np.all(np.isfinite(left)))
    if np.any(np.diff(dissipation) < -1e-14 * max(1.0, float(dissipation[-1]))):
        passed = False
        notes.append("dissipation integral decreased")
    if motion.is_static and problem.unforced:
        norm = np.sqrt(sw.l2_squared)
        growth = float(np.max(np.diff(norm), initial=0.0))
        if growth > monotone_tol * max(1.0, float(norm[0])):
            passed = False
            notes.append(f"||u_N|| increased by {growth:.2e} without forcing")
        else:
            notes.append("||u_N|| nonincreasing")

    series = pd.DataFrame({
        "t": sw.times,
        "l2_squared": sw.l2_squared,
        "dissipation": dissipation,
        "left_side": left,
    })
    check = CheckResult(
        name="energy_bound",
        formula=Formula.ENERGY_BOUND,
        value=value,
        tolerance=float("inf"),
        passed=passed,
        note="; ".join(notes),
    )
    return IdentityResult(series=series, check=check)


def _higher_energy(sw: TrajectorySweep, p: float) -> tuple[np.ndarray, np.ndarray]:
    material_integral = _cumulative(sw.material, sw.times)
    return material_integral, 0.5 * material_integral + sw.gradient_p / (2.0 * p)


def material_derivative_energy(
    traj: GalerkinTrajectory,
    problem: ProblemData,
    motion: DomainMotion,
    basis: BasisSet,
    rule: QuadratureRule,
    reference: GalerkinTrajectory | None = None,
    rtol: float = 1e-3,
    sweep: TrajectorySweep | None = None,
) -> IdentityResult:
    """1/2 int_0^t ||d/dt. u_N||^2 + 1/(2p) ||grad u_N(t)||_p^p.

    With ``reference`` (the same run at halved tolerances) the supremum must agree
    to ``rtol``.
    """
    sw = _sweep(sweep, traj, problem, motion, basis, rule)
    material_integral, left = _higher_energy(sw, problem.p)
    value = float(np.max(left))
    passed = bool(np.all(np.isfinite(left)))
    note = ""
    if reference is not None:
        ref_sw = sweep_trajectory(reference, problem, motion, basis, rule)
        ref_value = float(np.max(_higher_energy(ref_sw, problem.p)[1]))
        drift = abs(value - ref_value) / max(abs(ref_value), 1e-12)
        passed = passed and drift <= rtol
        note = f"halved-tolerance drift {drift:.2e}"
    series = pd.DataFrame({
        "t": sw.times,
        "material_l2_squared": sw.material,
        "material_integral": material_integral,
        "gradient_energy": sw.gradient_p / (2.0 * problem.p),
        "left_side": left,
    })
    check = CheckResult(
        name="material_energy",
        formula=Formula.HIGHER_ENERGY,
        value=value,
        tolerance=rtol,
        passed=passed,
        note=note,
    )
    return IdentityResult(series=series, check=check)


def gradient_energy_rate(
    traj: GalerkinTrajectory,
    problem: ProblemData,
    motion: DomainMotion,
    basis: BasisSet,
    rule: QuadratureRule,
    tol: float = 1e-5,
    sweep: TrajectorySweep | None = None,
) -> IdentityResult:
    """(1/p)||grad u(t)||_p^p - (1/p)||grad u(0)||_p^p = int_0^t (flux, grad d/dt. u) + R1 ds.

    R1 = int -flux . ((grad v) grad u) + (1/p) |grad u|^p div v.
    """
    sw = _sweep(sweep, traj, problem, motion, basis, rule)
    p = problem.p
    change = (sw.gradient_p - sw.gradient_p[0]) / p
    rate = _cumulative(sw.flux_rate, sw.times)
    remainder = _cumulative(sw.remainder, sw.times)
    residual = change - rate - remainder
    value = float(np.max(np.abs(residual)))
    series = pd.DataFrame({
        "t": sw.times,
        "gradient_energy_change": change,
        "flux_rate_integral": rate,
        "remainder_integral": remainder,
        "residual": residual,
    })
    check = CheckResult(
        name="gradient_rate",
        formula=Formula.GRADIENT_RATE,
        value=value,
        tolerance=tol,
        passed=bool(np.isfinite(value) and value <= tol),
        note=f"time-quadrature budget {_time_budget(sw.flux_rate, sw.remainder, times=sw.times):.2e}",
    )
    return IdentityResult(series=series, check=check)


def sine_window(horizon: float) -> Window:
    """theta(t) = sin^2(pi t / T) and its derivative."""
    k = np.pi / horizon
    return (lambda t: np.sin(k * t) ** 2, lambda t: k * np.sin(2 * k * t))


def weak_form_residual(
    traj: GalerkinTrajectory,
    problem: ProblemData,
    motion: DomainMotion,
    basis: BasisSet,
    rule: QuadratureRule,
    coefficients: np.ndarray,
    theta: Window | None = None,
    test_basis: BasisSet | None = None,
) -> float:
    """int_0^T -theta'(u, phi) + theta [(flux, grad phi) + (u, v . grad phi) - (f, phi)] dt.

    phi = sum_k c_k w_k^t; the window must vanish at t = 0 and t = T.
    """
    T = traj.horizon
    window, dwindow = theta or sine_window(T)
    ends = np.asarray(window(np.array([0.0, T])), dtype=float)
    if np.any(np.abs(ends) > 1e-12):
        raise InputError(f"time window must vanish at 0 and T (got {ends[0]:.3e}, {ends[1]:.3e})",
                         formula=Formula.WEAK_FORM.value)

    c = np.asarray(coefficients, dtype=float)
    tb = test_basis or basis
    if c.shape[0] > tb.N:
        raise InputError(f"{c.shape[0]} test coefficients for a basis of size {tb.N}",
                         formula=Formula.WEAK_FORM.value)
    test_values, test_ref_grads = tb.tabulate(rule)
    phi = test_values[:, : c.shape[0]] @ c
    ref_grad_phi = np.einsum("qkd,k->qd", test_ref_grads[:, : c.shape[0]], c)

    integrand = np.zeros(len(traj.times))
    for i, t in enumerate(traj.times):
        fr = pullback_frame(basis, rule, motion, float(t))
        alpha = traj.states[i]
        u = fr.solution(alpha)
        flux = p_flux(fr.solution_gradient(alpha), problem.p)
        grad_phi = np.einsum("qij,qj->qi", fr.inverse_gradient, ref_grad_phi)
        f = np.asarray(problem.forcing(fr.X, fr.x, float(t)), dtype=float).reshape(-1)
        wJ = fr.weights
        pairing = wJ @ (u * phi)
        spatial = wJ @ (
            np.einsum("qd,qd->q", flux, grad_phi)
            + u * np.einsum("qd,qd->q", fr.velocity, grad_phi)
            - f * phi
        )
        integrand[i] = -dwindow(t) * pairing + window(t) * spatial
    return float(simpson(integrand, x=traj.times))


def weak_form_check(
    traj: GalerkinTrajectory,
    problem: ProblemData,
    motion: DomainMotion,
    basis: BasisSet,
    rule: QuadratureRule,
    tol: float = 1e-6,
    extended_basis: BasisSet | None = None,
) -> list[CheckResult]:
    """Weak-form residual against every w_k in the span, plus one test function outside it."""
    residuals = np.array([
        weak_form_residual(traj, problem, motion, basis, rule, np.eye(basis.N)[k])
        for k in range(basis.N)
    ])
    worst = int(np.argmax(np.abs(residuals)))
    value = float(np.abs(residuals[worst]))
    checks = [CheckResult(
        name="weak_form",
        formula=Formula.WEAK_FORM,
        value=value,
        tolerance=tol,
        passed=bool(np.isfinite(value) and value <= tol),
        note=f"largest at k={worst + 1}",
    )]
    if extended_basis is not None and extended_basis.N > basis.N:
        c = np.eye(extended_basis.N)[basis.N]
        outside = weak_form_residual(traj, problem, motion, basis, rule, c, test_basis=extended_basis)
        checks.append(CheckResult(
            name="weak_form_outside_span",
            formula=Formula.WEAK_FORM,
            value=abs(outside),
            tolerance=tol,
            passed=True,
            informational=True,
            note=f"test function w_{basis.N + 1} outside the Galerkin span",
        ))
    return checks


def boundary_residual_1d(
    traj: GalerkinTrajectory,
    motion: DomainMotion,
    basis: BasisSet,
    p: float,
    times: np.ndarray | None = None,
) -> pd.DataFrame:
    """|u_x|^(p-2) u_x nu + V u at both moving endpoints of a one-dimensional domain."""
    if motion.dim != 1:
        raise UnsupportedDimensionError(
            f"boundary residual is defined for dim = 1 only (got dim={motion.dim})",
            formula=Formula.BOUNDARY.value,
        )
    times = traj.times if times is None else np.asarray(times, dtype=float)
    ends = np.array([[0.0], [1.0]])
    normals = np.array([-1.0, 1.0])
    values = basis.evaluate(ends)
    ref_grads = basis.evaluate_gradient(ends)[:, :, 0]

    rows = []
    for t in times:
        alpha = traj.state_at(float(t))
        G = motion.map_gradient(ends, float(t))[:, 0, 0]
        u = values @ alpha
        ux = (ref_grads @ alpha) / G
        flux = np.abs(ux) ** (p - 2) * ux * normals
        V = np.array([
            boundary_normal_velocity(motion, Endpoint.LEFT, float(t)),
            boundary_normal_velocity(motion, Endpoint.RIGHT, float(t)),
        ])
        res = flux + V * u
        rows.append((float(t), u[0], u[1], flux[0], flux[1], res[0], res[1]))
    return pd.DataFrame(rows, columns=[
        "t", "u_left", "u_right", "flux_left", "flux_right", "residual_left", "residual_right",
    ])


def boundary_check(series: pd.DataFrame) -> CheckResult:
    value = float(np.max(np.abs(series[["residual_left", "residual_right"]].to_numpy()))) if len(series) else 0.0
    return CheckResult(
        name="boundary_residual",
        formula=Formula.BOUNDARY,
        value=value,
        tolerance=float("nan"),
        passed=True,
        informational=True,
        note="imposed weakly; decays with N",
    )


def mass_coercivity(
    motion: DomainMotion,
    basis: BasisSet,
    rule: QuadratureRule,
    times: np.ndarray,
    tol: float = 1e-8,
) -> IdentityResult:
    """Smallest eigenvalue of M_N(t) against the smallest Jacobian c0."""
    rows = []
    c0 = motion.bounds.c0
    for t in times:
        M = assemble_mass(basis, rule, motion, float(t))
        J = motion.jacobian_det(rule.nodes, float(t))
        c0 = min(c0, float(J.min()))
        rows.append((float(t), float(eigvalsh(M)[0]), float(J.min())))
    series = pd.DataFrame(rows, columns=["t", "min_eigenvalue", "min_jacobian"])
    smallest = float(series["min_eigenvalue"].min())
    threshold = c0 - tol
    check = CheckResult(
        name="mass_coercivity",
        formula=Formula.COERCIVITY,
        value=smallest,
        tolerance=threshold,
        passed=bool(smallest >= threshold),
        note=f"c0 = {c0:.6g}",
    )
    return IdentityResult(series=series, check=check)
