"""Run orchestration: one ScenarioRunner per invocation, one coroutine per subcommand."""

from __future__ import annotations

import asyncio
import dataclasses
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from src.diagnostics import identities, probes, studies
from src.diagnostics.models import CheckResult, DiagnosticsReport, Formula, StudyReport
from src.errors import ConfigurationError
from src.galerkin.integrator import integrate
from src.galerkin.models import GalerkinTrajectory, InitialKind, ProblemData
from src.galerkin.problem import forcing_term, initial_datum
from src.geometry.motion import DomainMotion, motion_from_config
from src.geometry.validation import validate_motion
from src.output import checks_frame, trajectory_frame, write_csv, write_summary
from src.scenario import CheckName, ProbeName, ScenarioConfig
from src.spectral.basis import BasisSet, build_basis
from src.spectral.quadrature import QuadratureRule, gauss_legendre_rule

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("solve", "verify", "probes", "mms", "refine", "stability", "motion-check")

EXIT_OK = 0
EXIT_CHECK_FAILED = 2

COERCIVITY_POINTS = 64


@dataclass
class RunStats:
    subcommand: str
    started: str = ""
    finished: str = ""
    integrations: int = 0
    checks: int = 0
    failed: int = 0
    files: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)


@dataclass
class Discretization:
    motion: DomainMotion
    rule: QuadratureRule
    basis: BasisSet
    problem: ProblemData


def build_problem(config: ScenarioConfig, basis: BasisSet | None) -> ProblemData:
    u0, f = config.problem.u0, config.problem.f
    return ProblemData(
        p=config.p,
        forcing=forcing_term(f.kind, p=config.p, amplitude=f.amplitude, rate=f.rate, omega=f.omega),
        u0=initial_datum(
            u0.kind, dim=config.dim, amplitude=u0.amplitude, mode=u0.mode,
            center=u0.center, width=u0.width, basis=basis,
        ),
        forcing_kind=f.kind.value,
        initial_kind=u0.kind.value,
    )


def discretize(config: ScenarioConfig) -> Discretization:
    motion = motion_from_config(config.motion_family())
    rule = gauss_legendre_rule(config.quad_order, config.dim)
    basis = build_basis(config.dim, config.basis.N, rule)
    return Discretization(motion=motion, rule=rule, basis=basis, problem=build_problem(config, basis))


class ScenarioRunner:
    """Runs one subcommand on a parsed scenario and writes its run directory."""

    def __init__(self, config: ScenarioConfig, out_dir: Path | str | None = None) -> None:
        self.config = config
        self.out_dir = Path(out_dir if out_dir is not None else config.output.dir)
        self.checks: list[CheckResult] = []
        self.stats = RunStats(subcommand="")

    async def run(self, subcommand: str) -> int:
        if subcommand not in SUBCOMMANDS:
            raise ConfigurationError(f"unknown subcommand {subcommand!r} (expected one of {', '.join(SUBCOMMANDS)})")
        self.stats = RunStats(subcommand=subcommand, started=datetime.now(timezone.utc).isoformat())
        logger.info("mopla %s -> %s", subcommand, self.out_dir)

        handler = getattr(self, "_" + subcommand.replace("-", "_"))
        await handler()

        self._write("residuals", checks_frame(self.checks), "none")
        self.stats.files.append(str(write_summary(self.out_dir, subcommand, self.config, self.checks)))
        self.stats.checks = sum(not c.informational for c in self.checks)
        failed = [c for c in self.checks if not c.informational and not c.passed]
        self.stats.failed = len(failed)
        self.stats.finished = datetime.now(timezone.utc).isoformat()

        for c in failed:
            logger.error("[%s] %s failed: value %.6g vs tolerance %.6g %s",
                         c.formula.value, c.name, c.value, c.tolerance, c.note)
        logger.info("mopla %s finished: %d checks, %d failed, %d files",
                    subcommand, self.stats.checks, self.stats.failed, len(self.stats.files))
        return EXIT_CHECK_FAILED if failed else EXIT_OK

    # -- Helpers --

    def _write(self, name: str, frame: pd.DataFrame, formula: Formula | str | None = None) -> None:
        self.stats.files.append(str(write_csv(self.out_dir, name, frame, formula)))

    def _record(self, checks: list[CheckResult]) -> None:
        for c in checks:
            logger.info("%-4s %-12s %s = %.6g (tolerance %.6g) %s",
                        c.status, c.formula.value, c.name, c.value, c.tolerance, c.note)
        self.checks.extend(checks)

    def _record_study(self, report: StudyReport, name: str) -> None:
        self._write(name, report.table, report.formula)
        self._record(report.checks)
        self.stats.errors.extend(report.errors)

    async def _integrate(self, disc: Discretization, options=None) -> GalerkinTrajectory:
        options = options or self.config.ode_options()
        traj = await asyncio.to_thread(
            integrate, disc.problem, disc.basis, disc.rule, disc.motion, **options.as_kwargs()
        )
        self.stats.integrations += 1
        return traj

    def _series(self, disc: Discretization, traj: GalerkinTrajectory, reference=None) -> DiagnosticsReport:
        d = self.config.diagnostics
        args = (traj, disc.problem, disc.motion, disc.basis, disc.rule)
        sweep = identities.sweep_trajectory(*args)
        report = DiagnosticsReport()

        mass = identities.mass_identity(*args, tol=d.mass_tol, sweep=sweep)
        energy = identities.energy_identity(*args, tol=d.energy_tol, sweep=sweep)
        bound = identities.energy_bound(*args, sweep=sweep)
        material = identities.material_derivative_energy(
            *args, reference=reference, rtol=d.material_rtol, sweep=sweep,
        )
        rate = identities.gradient_energy_rate(*args, tol=d.rate_tol, sweep=sweep)

        report.add_series("mass", mass.series, Formula.MASS)
        report.add_series("energy", energy.series.merge(
            bound.series[["t", "left_side"]].rename(columns={"left_side": "energy_bound"}), on="t",
        ), Formula.ENERGY_IDENTITY)
        report.add_series("material", material.series, Formula.HIGHER_ENERGY)
        report.add_series("gradient_rate", rate.series, Formula.GRADIENT_RATE)
        checks = {
            CheckName.MASS: mass.check,
            CheckName.ENERGY: energy.check,
            CheckName.ENERGY_BOUND: bound.check,
            CheckName.MATERIAL: material.check,
            CheckName.GRADIENT_RATE: rate.check,
        }
        if disc.motion.dim == 1:
            boundary = identities.boundary_residual_1d(traj, disc.motion, disc.basis, disc.problem.p)
            report.add_series("boundary", boundary, Formula.BOUNDARY)
            checks[CheckName.BOUNDARY] = identities.boundary_check(boundary)
        for name in d.checks:
            if name in checks:
                report.add(checks[name])
        return report

    def _write_series(self, report: DiagnosticsReport) -> None:
        for name, frame in report.series.items():
            self._write(name, frame)

    # -- Subcommands --

    async def _solve(self) -> None:
        """Trajectory plus identity series; checks are reported but do not gate the exit code."""
        disc = discretize(self.config)
        traj = await self._integrate(disc)
        self._write("trajectory", trajectory_frame(traj), "none")
        report = self._series(disc, traj)
        self._write_series(report)
        self._record([dataclasses.replace(c, informational=True) for c in report.checks])

    async def _verify(self) -> None:
        disc = discretize(self.config)
        d = self.config.diagnostics
        wanted = set(d.checks)

        options = self.config.ode_options()
        if CheckName.MATERIAL in wanted:
            traj, reference = await asyncio.gather(
                self._integrate(disc, options), self._integrate(disc, options.halved()),
            )
        else:
            traj, reference = await self._integrate(disc, options), None
        self._write("trajectory", trajectory_frame(traj), "none")

        report = self._series(disc, traj, reference=reference)
        self._write_series(report)

        if CheckName.WEAK_FORM in wanted:
            extended = build_basis(disc.basis.dim, disc.basis.N + 1, disc.rule)
            report.checks.extend(identities.weak_form_check(
                traj, disc.problem, disc.motion, disc.basis, disc.rule, tol=d.weak_tol, extended_basis=extended,
            ))
        if CheckName.COERCIVITY in wanted:
            times = np.linspace(0.0, self.config.T, COERCIVITY_POINTS)
            coercivity = identities.mass_coercivity(disc.motion, disc.basis, disc.rule, times)
            self._write("coercivity", coercivity.series, Formula.COERCIVITY)
            report.add(coercivity.check)
        self._record(report.checks)

    async def _probes(self) -> None:
        d = self.config.diagnostics
        if d.seed is None:
            raise ConfigurationError("probes need diagnostics.seed (or --seed) for reproducible sampling")
        disc = discretize(self.config)
        times = np.linspace(0.0, self.config.T, d.t_points)
        tables: dict[str, tuple[Formula, list[pd.DataFrame]]] = {}
        report = DiagnosticsReport()

        def keep(name: str, probe) -> None:
            report.add_probe(probe)
            if probe.table is not None:
                tables.setdefault(name, (probe.formula, []))[1].append(probe.table)

        for name in d.probes:
            rng = probes.probe_rng(d.seed, name.value)
            if name in (ProbeName.MONOTONICITY, ProbeName.PLIP):
                run = probes.monotonicity_probe if name == ProbeName.MONOTONICITY else probes.plip_probe
                for p in d.probe_exponents:
                    sample = probes.draw_vector_pairs(rng, p, d.probe_samples, d.probe_k, d.probe_tol)
                    keep(name.value, run(p, sample))
            elif name == ProbeName.LP_L2:
                for p in d.probe_exponents:
                    if p == 2:
                        logger.warning("Skipping L^p-L^2 probe at p=2 (needs p > 2)")
                        continue
                    sample = probes.draw_coefficients(rng, p, d.lp_samples, disc.basis.N, d.probe_tol, times)
                    keep(name.value, await asyncio.to_thread(
                        probes.lp_l2_probe, p, d.delta, disc.motion, disc.basis, disc.rule, sample,
                    ))
            elif name == ProbeName.POINCARE:
                sample = probes.draw_coefficients(rng, self.config.p, d.lp_samples, disc.basis.N, d.probe_tol, times)
                keep(name.value, await asyncio.to_thread(
                    probes.poincare_probe, d.poincare_q, disc.motion, disc.basis, disc.rule, sample,
                ))
            else:
                fine_rule = gauss_legendre_rule(max(2 * d.fine_N, 8), self.config.dim)
                fine = build_basis(self.config.dim, d.fine_N, fine_rule)
                sample = probes.draw_peaked_coefficients(
                    rng, self.config.p, d.friedrichs_samples, fine.N, d.probe_tol, times, ratio=d.friedrichs_ratio,
                )
                keep(name.value, await asyncio.to_thread(
                    probes.friedrichs_probe, d.epsilon, fine.N - 1, disc.motion, fine, sample, d.friedrichs_c,
                ))

        for name, (formula, frames) in tables.items():
            self._write(f"probe_{name}", pd.concat(frames, ignore_index=True), formula)
        for probe in report.probes:
            if probe.inconclusive:
                logger.warning("Probe %s inconclusive: %s", probe.name, probe.note)
        self._record(report.checks)

    async def _mms(self) -> None:
        m = self.config.mms
        if self.config.dim != 1 or self.config.motion.kind.value != "static":
            logger.warning("mms runs on the static unit interval; dim and motion settings are ignored")
        report = await studies.mms_static_1d(
            self.config.p, m.amplitude, m.rate, self.config.T, m.levels, self.config.ode_options(),
            quad_order=self.config.quad.order, max_ratio=m.max_ratio, tolerance=m.tolerance,
        )
        self._record_study(report, "mms")

    async def _refine(self) -> None:
        # levels build their own rules; an under-resolved rule must surface as a failed level
        motion = motion_from_config(self.config.motion_family())
        basis = None
        if self.config.problem.u0.kind == InitialKind.BASIS_MODE:
            basis = build_basis(self.config.dim, self.config.basis.N,
                                gauss_legendre_rule(self.config.quad_order, self.config.dim))
        report = await studies.refinement_study(
            build_problem(self.config, basis), motion, self.config.refine.N, self.config.ode_options(),
            quad_order=self.config.quad.order, quadrature_check=self.config.refine.quadrature_check,
        )
        self._record_study(report, "refine")

    async def _stability(self) -> None:
        disc = discretize(self.config)
        report = await studies.stability_experiment(
            disc.problem, disc.motion, disc.basis, disc.rule, self.config.ode_options(), self.config.stability.deltas,
        )
        self._record_study(report, "stability")

    async def _motion_check(self) -> None:
        g = self.config.geometry
        motion = motion_from_config(self.config.motion_family())
        report = await asyncio.to_thread(validate_motion, motion, g.samples, g.h, g.tol)

        rows = [{"quantity": k, "max_error": v, "tolerance": g.tol} for k, v in report.discrepancies().items()]
        rows += [{"quantity": k, "max_error": v, "tolerance": np.nan} for k, v in report.bounds.to_dict().items()]
        self._write("motion", pd.DataFrame(rows), Formula.GEOMETRY)
        worst = max(report.discrepancies().items(), key=lambda kv: kv[1])
        checks = [CheckResult(
            name="motion_derivatives",
            formula=Formula.GEOMETRY,
            value=worst[1],
            tolerance=g.tol,
            passed=report.passed,
            note=f"largest: {worst[0]}; c0={report.bounds.c0:.6g}, c1={report.bounds.c1:.6g}",
        )]
        b = report.bounds
        finite = bool(np.all(np.isfinite(list(b.to_dict().values()))))
        checks.append(CheckResult(
            name="motion_bounds",
            formula=Formula.GRADIENT_BOUND,
            value=b.c2,
            tolerance=float("inf"),
            passed=finite and b.c0 > 0,
            note=f"{b.c0:.6g} <= J <= {b.c1:.6g}; |grad Phi|, |grad Phi^-1| <= {b.c2:.6g}; |grad J| <= {b.g1:.6g}",
        ))

        rule = gauss_legendre_rule(self.config.quad_order, self.config.dim)
        basis = build_basis(self.config.dim, self.config.basis.N, rule)
        times = np.linspace(0.0, self.config.T, COERCIVITY_POINTS)
        coercivity = await asyncio.to_thread(identities.mass_coercivity, motion, basis, rule, times)
        self._write("coercivity", coercivity.series, Formula.COERCIVITY)
        checks.append(coercivity.check)
        self._record(checks)
