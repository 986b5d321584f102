from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd


class Formula(str, Enum):
    MASS = "Pf_EA:equ"
    ENERGY_IDENTITY = "Pf_Ener:Int"
    ENERGY_BOUND = "E:Energy"
    HIGHER_ENERGY = "E:HiEn"
    GRADIENT_RATE = "E:dt_Int"
    WEAK_FORM = "E:pLap_WF"
    BOUNDARY = "E:BC_Weak"
    COERCIVITY = "E:Uni_PD"
    GEOMETRY = "E:Det_Bd"
    GRADIENT_BOUND = "E:Grad_Bd"
    MONOTONICITY = "E:Vec_Mono"
    P_LIPSCHITZ = "E:p_Lip"
    LP_L2 = "E:Lp_L2"
    POINCARE = "E:Un_Poin"
    FRIEDRICHS = "E:Fried"
    MMS = "E:Reg_dt"
    REFINEMENT = "P:uN_Str"
    STABILITY = "P:Uni"


@dataclass
class CheckResult:
    name: str
    formula: Formula
    value: float
    tolerance: float
    passed: bool
    informational: bool = False
    note: str = ""

    @property
    def status(self) -> str:
        if self.informational:
            return "INFO"
        return "PASS" if self.passed else "FAIL"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "formula": self.formula.value,
            "value": float(self.value),
            "tolerance": float(self.tolerance),
            "passed": bool(self.passed),
            "informational": bool(self.informational),
            "note": self.note,
        }


@dataclass
class ProbeSample:
    """Random inputs of one probe: vector pairs (a, b) or basis-coefficient test functions."""

    p: float
    tolerance: float
    a: np.ndarray | None = None
    b: np.ndarray | None = None
    coefficients: np.ndarray | None = None
    times: np.ndarray | None = None

    @property
    def count(self) -> int:
        if self.a is not None:
            return int(self.a.shape[0])
        return int(self.coefficients.shape[0]) if self.coefficients is not None else 0


@dataclass
class ProbeReport:
    name: str
    formula: Formula
    samples: int
    violations: int
    worst_slack: float
    value: float = 0.0
    tolerance: float = 0.0
    passed: bool = True
    inconclusive: bool = False
    table: pd.DataFrame | None = None
    note: str = ""

    def to_check(self) -> CheckResult:
        note = self.note
        if self.inconclusive:
            note = f"inconclusive; {note}" if note else "inconclusive"
        return CheckResult(
            name=self.name,
            formula=self.formula,
            value=self.value,
            tolerance=self.tolerance,
            passed=self.passed and not self.inconclusive,
            note=note,
        )


@dataclass
class DiagnosticsReport:
    """Per-run series and checks, each check tagged with the formula it evaluates."""

    series: dict[str, pd.DataFrame] = field(default_factory=dict)
    checks: list[CheckResult] = field(default_factory=list)
    probes: list[ProbeReport] = field(default_factory=list)

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        return check

    def add_series(self, name: str, frame: pd.DataFrame, formula: Formula) -> None:
        frame.attrs["formula"] = formula.value
        self.series[name] = frame

    def add_probe(self, probe: ProbeReport) -> None:
        self.probes.append(probe)
        self.checks.append(probe.to_check())

    @property
    def failed(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.informational and not c.passed]

    @property
    def passed(self) -> bool:
        return not self.failed


@dataclass
class IdentityResult:
    series: pd.DataFrame
    check: CheckResult


@dataclass
class StudyReport:
    """Multi-run study: one table row per run plus the checks drawn from it."""

    name: str
    formula: Formula
    table: pd.DataFrame
    checks: list[CheckResult] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed or c.informational for c in self.checks)
