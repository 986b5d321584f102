"""Multi-run studies: manufactured solution, self-refinement and perturbation stability.

Independent runs are dispatched with asyncio.to_thread and collected by index.
"""

from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.integrate import simpson

from src.diagnostics.identities import boundary_residual_1d
from src.diagnostics.models import CheckResult, Formula, StudyReport
from src.errors import ConfigurationError, DiscretizationError
from src.galerkin.assembly import assemble_mass
from src.galerkin.integrator import integrate
from src.galerkin.models import GalerkinTrajectory, OdeOptions, ProblemData
from src.galerkin.problem import mms_exact, mms_problem
from src.geometry.models import MotionFamily, MotionKind
from src.geometry.motion import DomainMotion, motion_from_config
from src.spectral.basis import BasisSet, build_basis, project_initial
from src.spectral.quadrature import QuadratureRule, gauss_legendre_rule

logger = logging.getLogger(__name__)

ERROR_RULE_EXTRA = 8
QUADRATURE_SUSPECT = "quadrature-suspect"


def default_quad_order(N: int) -> int:
    return max(2 * N, 8)


@dataclass
class LevelRun:
    N: int
    order: int
    basis: BasisSet | None = None
    rule: QuadratureRule | None = None
    trajectory: GalerkinTrajectory | None = None
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.trajectory is not None


def _solve_level(
    problem: ProblemData, motion: DomainMotion, N: int, order: int, options: OdeOptions,
) -> LevelRun:
    run = LevelRun(N=N, order=order)
    try:
        run.rule = gauss_legendre_rule(order, motion.dim)
        run.basis = build_basis(motion.dim, N, run.rule)
        run.trajectory = integrate(problem, run.basis, run.rule, motion, **options.as_kwargs())
    except DiscretizationError as exc:
        run.error = f"{QUADRATURE_SUSPECT}: {exc}"
        logger.warning("Run N=%d (quad.order=%d) failed: %s", N, order, run.error)
    return run


async def solve_levels(
    problem: ProblemData,
    motion: DomainMotion,
    levels: list[tuple[int, int]],
    options: OdeOptions,
) -> list[LevelRun]:
    tasks = [asyncio.to_thread(_solve_level, problem, motion, N, order, options) for N, order in levels]
    return list(await asyncio.gather(*tasks))


def space_time_l2(times: np.ndarray, squared: np.ndarray) -> float:
    return float(np.sqrt(max(simpson(squared, x=times), 0.0)))


def _difference_squared(a: LevelRun, b: LevelRun, motion: DomainMotion, rule: QuadratureRule) -> np.ndarray:
    """||u_a(t) - u_b(t)||^2 on Omega_t at every grid time."""
    Wa = a.basis.evaluate(rule.nodes)
    Wb = b.basis.evaluate(rule.nodes)
    out = np.zeros(len(a.trajectory.times))
    for i, t in enumerate(a.trajectory.times):
        diff = Wa @ a.trajectory.states[i] - Wb @ b.trajectory.states[i]
        out[i] = (rule.weights * motion.jacobian_det(rule.nodes, float(t))) @ (diff * diff)
    return out


def _boundary_final(run: LevelRun, motion: DomainMotion, p: float) -> float:
    # t = 0 carries the residual of the initial datum, which no N removes
    series = boundary_residual_1d(run.trajectory, motion, run.basis, p, times=run.trajectory.times[-1:])
    return float(np.max(np.abs(series[["residual_left", "residual_right"]].to_numpy())))


def _decay_check(name: str, formula: Formula, levels: list[int], values: list[float], max_ratio: float | None) -> CheckResult:
    vals = np.asarray(values, dtype=float)
    if vals.size < 2:
        return CheckResult(name, formula, float(vals[0]) if vals.size else float("nan"), float("nan"),
                           passed=bool(vals.size and np.isfinite(vals[0])), note="single level")
    ratios = vals[1:] / np.where(vals[:-1] > 0, vals[:-1], np.nan)
    decreasing = bool(np.all(np.isfinite(vals)) and np.all(np.diff(vals) < 0))
    passed = decreasing and (max_ratio is None or bool(np.all(ratios <= max_ratio)))
    ratio_text = ", ".join(f"{r:.3g}" for r in ratios)
    return CheckResult(
        name=name,
        formula=formula,
        value=float(np.nanmax(ratios)) if np.any(np.isfinite(ratios)) else float("nan"),
        tolerance=max_ratio if max_ratio is not None else 1.0,
        passed=passed,
        note=f"N={levels}: ratios {ratio_text}",
    )


def _failed_runs_check(name: str, formula: Formula, runs: list[LevelRun]) -> CheckResult | None:
    failed = [r for r in runs if not r.ok]
    if not failed:
        return None
    return CheckResult(
        name=name,
        formula=formula,
        value=float(len(failed)),
        tolerance=0.0,
        passed=False,
        note="; ".join(f"N={r.N}, quad.order={r.order}: {r.error}" for r in failed),
    )


# -- Manufactured solution --

async def mms_static_1d(
    p: float,
    amplitude: float,
    rate: float,
    horizon: float,
    levels: list[int],
    options: OdeOptions,
    quad_order: int | None = None,
    max_ratio: float = 0.5,
    tolerance: float = 1e-4,
) -> StudyReport:
    """u* = A exp(-rate t) cos(pi x) on the static unit interval, errors in L2(Q_T) and at t = T."""
    if not levels:
        raise ConfigurationError("mms.levels must not be empty")
    problem = mms_problem(p, amplitude, rate)
    motion = motion_from_config(MotionFamily(kind=MotionKind.STATIC, dim=1, horizon=horizon))
    u_star = mms_exact(amplitude, rate)

    plan = [(N, quad_order or default_quad_order(N)) for N in levels]
    runs = await solve_levels(problem, motion, plan, options)

    rows = []
    for run in runs:
        row = {"N": run.N, "quad_order": run.order, "error_l2_qt": np.nan, "error_final": np.nan,
               "boundary_residual": np.nan, "status": run.error or "ok"}
        if run.ok:
            err_rule = gauss_legendre_rule(run.order + ERROR_RULE_EXTRA, 1)
            W = run.basis.evaluate(err_rule.nodes)
            traj = run.trajectory
            sq = np.array([
                err_rule.weights @ (W @ traj.states[i] - u_star(err_rule.nodes, float(t))) ** 2
                for i, t in enumerate(traj.times)
            ])
            row["error_l2_qt"] = space_time_l2(traj.times, sq)
            row["error_final"] = float(np.sqrt(sq[-1]))
            row["boundary_residual"] = _boundary_final(run, motion, p)
        rows.append(row)
    table = pd.DataFrame(rows)

    checks: list[CheckResult] = []
    failed = _failed_runs_check("mms", Formula.MMS, runs)
    if failed:
        checks.append(failed)
    else:
        errors = table["error_l2_qt"].tolist()
        finest = float(errors[-1])
        accuracy = CheckResult(
            name="mms_error",
            formula=Formula.MMS,
            value=finest,
            tolerance=tolerance,
            passed=bool(finest <= tolerance),
            note=f"N={levels[-1]}, final-time error {table['error_final'].iloc[-1]:.3e}",
        )
        checks.append(accuracy)
        if len(levels) > 1:
            checks.append(_decay_check("mms_convergence", Formula.MMS, levels, errors, max_ratio))
            checks.append(_boundary_decay(levels, table["boundary_residual"].tolist()))

    logger.info("MMS p=%g over N=%s: %s", p, levels, ", ".join(f"{e:.3e}" for e in table["error_l2_qt"]))
    return StudyReport(name="mms", formula=Formula.MMS, table=table, checks=checks,
                       errors=[r.error for r in runs if r.error])


def _boundary_decay(levels: list[int], residuals: list[float]) -> CheckResult:
    first, last = residuals[0], residuals[-1]
    return CheckResult(
        name="boundary_decay",
        formula=Formula.BOUNDARY,
        value=float(last),
        tolerance=float(first),
        passed=bool(np.isfinite(last) and last < first),
        note=f"final-time endpoint residual N={levels[0]}: {first:.3e}, N={levels[-1]}: {last:.3e}",
    )


# -- Self-refinement --

async def refinement_study(
    problem: ProblemData,
    motion: DomainMotion,
    levels: list[int],
    options: OdeOptions,
    quad_order: int | None = None,
    quadrature_check: bool = False,
) -> StudyReport:
    """Errors of coarse runs against the finest run in L2(Q_T), pulled back to Omega_0."""
    if len(levels) < 2:
        raise ConfigurationError(f"refine.N needs at least two levels (got {levels})")
    if any(b < a for a, b in zip(levels, levels[1:])):
        raise ConfigurationError(f"refine.N must be nondecreasing (got {levels})", formula=Formula.REFINEMENT.value)

    plan = [(N, quad_order or default_quad_order(N)) for N in levels]
    if quadrature_check:
        plan.append((levels[-1], 2 * plan[-1][1]))
    runs = await solve_levels(problem, motion, plan, options)
    doubled = runs.pop() if quadrature_check else None
    reference = runs[-1]

    checks: list[CheckResult] = []
    failed = _failed_runs_check("refinement", Formula.REFINEMENT, runs)
    rows = []
    err_rule = None
    if reference.ok:
        err_rule = gauss_legendre_rule(reference.order + ERROR_RULE_EXTRA, motion.dim)
    for run in runs:
        row = {"N": run.N, "quad_order": run.order, "error_l2_qt": np.nan, "boundary_residual": np.nan,
               "accepted": 0, "rejected": 0, "status": run.error or "ok"}
        if run.ok:
            row["accepted"] = run.trajectory.accepted
            row["rejected"] = run.trajectory.rejected
            if err_rule is not None:
                sq = _difference_squared(run, reference, motion, err_rule)
                row["error_l2_qt"] = space_time_l2(run.trajectory.times, sq)
            if motion.dim == 1:
                row["boundary_residual"] = _boundary_final(run, motion, problem.p)
        rows.append(row)
    table = pd.DataFrame(rows)

    if failed:
        checks.append(failed)
    else:
        coarse = levels[:-1]
        checks.append(_decay_check(
            "refinement", Formula.REFINEMENT, coarse, table["error_l2_qt"].iloc[:-1].tolist(), None,
        ))
        if motion.dim == 1 and levels[0] < levels[-1]:
            checks.append(_boundary_decay(levels, table["boundary_residual"].tolist()))
        if doubled is not None:
            if doubled.ok:
                sq = _difference_squared(doubled, reference, motion, err_rule)
                diff = space_time_l2(reference.trajectory.times, sq)
                smallest = float(table["error_l2_qt"].iloc[:-1].min())
                checks.append(CheckResult(
                    name="quadrature_doubling",
                    formula=Formula.REFINEMENT,
                    value=diff,
                    tolerance=smallest,
                    passed=True,
                    informational=True,
                    note="subdominant" if diff < smallest else "quadrature error comparable to refinement error",
                ))
            else:
                checks.append(CheckResult(
                    name="quadrature_doubling", formula=Formula.REFINEMENT, value=float("nan"),
                    tolerance=float("nan"), passed=False, note=doubled.error,
                ))

    logger.info("Refinement over N=%s: %s", levels, ", ".join(f"{e:.3e}" for e in table["error_l2_qt"]))
    errors = [r.error for r in runs if r.error]
    if doubled is not None and doubled.error:
        errors.append(doubled.error)
    return StudyReport(name="refine", formula=Formula.REFINEMENT, table=table, checks=checks, errors=errors)


# -- Stability of the flow under initial perturbations --

def _run_from(problem, basis, rule, motion, options, alpha0) -> GalerkinTrajectory:
    return integrate(problem, basis, rule, motion, alpha0=alpha0, **options.as_kwargs())


async def stability_experiment(
    problem: ProblemData,
    motion: DomainMotion,
    basis: BasisSet,
    rule: QuadratureRule,
    options: OdeOptions,
    deltas: list[float],
    max_spread: float = 2.0,
) -> StudyReport:
    """Runs (u0, u0 + delta w_2) and reports sup_t ||u_1 - u_2|| / delta for each delta."""
    if basis.N < 2:
        raise ConfigurationError("stability experiment perturbs along w_2 and needs basis.N >= 2",
                                 formula=Formula.STABILITY.value)
    if not deltas or any(d <= 0 for d in deltas):
        raise ConfigurationError(f"stability.deltas must be positive (got {deltas})", formula=Formula.STABILITY.value)
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ConfigurationError(f"stability.deltas must be decreasing (got {deltas})", formula=Formula.STABILITY.value)

    alpha0 = project_initial(problem.u0, basis, rule)
    starts = [alpha0, alpha0.copy()]
    for delta in deltas:
        perturbed = alpha0.copy()
        perturbed[1] += delta
        starts.append(perturbed)
    trajectories = await asyncio.gather(*[
        asyncio.to_thread(_run_from, problem, basis, rule, motion, options, start) for start in starts
    ])
    base, repeat, perturbed_runs = trajectories[0], trajectories[1], trajectories[2:]

    masses = [assemble_mass(basis, rule, motion, float(t)) for t in base.times]
    rows = []
    for delta, traj in zip(deltas, perturbed_runs):
        diff = traj.states - base.states
        norms = np.sqrt([d @ M @ d for d, M in zip(diff, masses)])
        rows.append({"delta": delta, "sup_difference": float(norms.max()), "ratio": float(norms.max() / delta)})
    table = pd.DataFrame(rows)

    identical = bool(np.array_equal(base.states, repeat.states))
    ratios = table["ratio"].to_numpy()
    spread = float(ratios.max() / ratios.min()) if ratios.min() > 0 else float("inf")
    rate = motion.bounds.gronwall_rate
    gronwall = float(np.exp(rate * motion.horizon))

    checks = [
        CheckResult(
            name="stability_identical",
            formula=Formula.STABILITY,
            value=0.0 if identical else 1.0,
            tolerance=0.0,
            passed=identical,
            note="delta = 0 reproduces the base run bitwise" if identical else "delta = 0 run differs from base run",
        ),
        CheckResult(
            name="stability_ratio",
            formula=Formula.STABILITY,
            value=spread,
            tolerance=max_spread,
            passed=bool(spread <= max_spread),
            note="max/min of sup_t ||u1 - u2|| / delta over " + ", ".join(f"{d:g}" for d in deltas),
        ),
        CheckResult(
            name="stability_gronwall",
            formula=Formula.STABILITY,
            value=float(ratios.max()),
            tolerance=gronwall,
            passed=bool(ratios.max() <= gronwall),
            informational=True,
            note=f"exp(c T) with c = sup|grad v| + sup|div v| = {rate:.4g}",
        ),
    ]
    logger.info("Stability: ratios %s (spread %.3g), bitwise repeat %s", ratios, spread, identical)
    return StudyReport(name="stability", formula=Formula.STABILITY, table=table, checks=checks)
