"""Randomized probes of the vector inequalities and the functional inequalities on Omega_t.

All randomness flows from one 64-bit seed through counter-based Philox streams,
one stream per probe, so sampled values do not depend on thread count or on
which other probes run.
"""

from __future__ import annotations

import logging

import numpy as np
import pandas as pd

from src.diagnostics.models import Formula, ProbeReport, ProbeSample
from src.errors import ConfigurationError
from src.galerkin.assembly import assemble_mass, assemble_stiffness, pullback_frame
from src.geometry.motion import DomainMotion
from src.spectral.basis import BasisSet
from src.spectral.quadrature import QuadratureRule

logger = logging.getLogger(__name__)

STREAMS = {
    "monotonicity": 1,
    "plip": 2,
    "lp_l2": 3,
    "poincare": 4,
    "friedrichs": 5,
}

MAX_SEED = 2**64


def probe_rng(seed: int, name: str) -> np.random.Generator:
    if not 0 <= seed < MAX_SEED:
        raise ConfigurationError(f"diagnostics.seed must be an unsigned 64-bit integer (got {seed})")
    return np.random.Generator(np.random.Philox(key=seed + (STREAMS[name] << 64)))


def _require_p(p: float, formula: Formula) -> None:
    if not p >= 2:
        raise ConfigurationError(f"p must be ≥ 2 (got {p})", formula=formula.value)


def draw_vector_pairs(rng: np.random.Generator, p: float, count: int, K: int, tol: float) -> ProbeSample:
    """Gaussian pairs in R^K with magnitudes spread over four decades."""
    if count < 1 or K < 1:
        raise ConfigurationError(f"probe sample count and K must be >= 1 (got {count}, {K})")
    a = rng.standard_normal((count, K)) * 10.0 ** rng.uniform(-2, 2, (count, 1))
    b = rng.standard_normal((count, K)) * 10.0 ** rng.uniform(-2, 2, (count, 1))
    return ProbeSample(p=p, tolerance=tol, a=a, b=b)


def draw_coefficients(
    rng: np.random.Generator, p: float, count: int, N: int, tol: float, times: np.ndarray,
) -> ProbeSample:
    if count < 1:
        raise ConfigurationError(f"probe sample count must be >= 1 (got {count})")
    scale = 10.0 ** rng.uniform(-1, 1, (count, 1))
    coefficients = rng.standard_normal((count, N)) * scale
    return ProbeSample(p=p, tolerance=tol, coefficients=coefficients, times=np.asarray(times, dtype=float))


def draw_peaked_coefficients(
    rng: np.random.Generator, p: float, count: int, N: int, tol: float, times: np.ndarray, ratio: float = 0.1,
) -> ProbeSample:
    """Each sample sits on one random mode m and falls off like ratio**|k - m| around it.

    Samples peaked on the low modes are the ones that need a nonzero projection in
    the Friedrichs inequality.
    """
    if count < 1:
        raise ConfigurationError(f"probe sample count must be >= 1 (got {count})")
    if not 0 < ratio < 1:
        raise ConfigurationError(f"peak ratio must be in (0, 1) (got {ratio})")
    scale = 10.0 ** rng.uniform(-1, 1, (count, 1))
    peaks = rng.integers(0, N, (count, 1))
    weights = ratio ** np.abs(np.arange(N)[None, :] - peaks)
    coefficients = rng.standard_normal((count, N)) * scale * weights
    return ProbeSample(p=p, tolerance=tol, coefficients=coefficients, times=np.asarray(times, dtype=float))


def vector_flux(a: np.ndarray, p: float) -> np.ndarray:
    """|a|^(p-2) a row-wise."""
    return np.power(np.linalg.norm(a, axis=-1), p - 2)[..., None] * a


# -- Vector inequalities --

def monotonicity_probe(
    p: float, sample: ProbeSample | None = None, *, samples: int = 10_000, K: int = 3,
    rng: np.random.Generator | None = None, tol: float = 1e-12,
) -> ProbeReport:
    """(|a|^(p-2) a - |b|^(p-2) b) . (a - b) >= 0."""
    _require_p(p, Formula.MONOTONICITY)
    sample = sample or draw_vector_pairs(rng or probe_rng(0, "monotonicity"), p, samples, K, tol)
    a, b = sample.a, sample.b
    d_flux = vector_flux(a, p) - vector_flux(b, p)
    d = a - b
    value = np.einsum("ij,ij->i", d_flux, d)
    scale = np.maximum(1.0, np.linalg.norm(d_flux, axis=1) * np.linalg.norm(d, axis=1))
    slack = value / scale
    violations = int(np.count_nonzero(slack < -sample.tolerance))
    table = pd.DataFrame([{
        "p": p, "K": a.shape[1], "samples": sample.count, "violations": violations,
        "min_relative_slack": float(slack.min()),
    }])
    logger.info("Monotonicity probe p=%g: %d/%d violations", p, violations, sample.count)
    return ProbeReport(
        name=f"monotonicity(p={p:g})",
        formula=Formula.MONOTONICITY,
        samples=sample.count,
        violations=violations,
        worst_slack=float(slack.min()),
        value=float(violations),
        tolerance=sample.tolerance,
        passed=violations == 0,
        table=table,
    )


def plip_constant(p: float) -> float:
    return 2.0 ** (p - 2) * (p - 1)


def plip_probe(
    p: float, sample: ProbeSample | None = None, *, samples: int = 10_000, K: int = 3,
    rng: np.random.Generator | None = None, tol: float = 1e-12,
) -> ProbeReport:
    """| |a|^(p-2) a - |b|^(p-2) b | <= 2^(p-2) (p-1) (|a|^(p-2) + |b|^(p-2)) |a - b|."""
    _require_p(p, Formula.P_LIPSCHITZ)
    sample = sample or draw_vector_pairs(rng or probe_rng(0, "plip"), p, samples, K, tol)
    a, b = sample.a, sample.b
    lhs = np.linalg.norm(vector_flux(a, p) - vector_flux(b, p), axis=1)
    weight = (np.linalg.norm(a, axis=1) ** (p - 2) + np.linalg.norm(b, axis=1) ** (p - 2)) * np.linalg.norm(a - b, axis=1)
    rhs = plip_constant(p) * weight
    slack = (rhs - lhs) / np.maximum(1.0, rhs)
    violations = int(np.count_nonzero(slack < -sample.tolerance))
    ratio = np.divide(lhs, weight, out=np.zeros_like(lhs), where=weight > 0)
    estimate = float(ratio.max())
    table = pd.DataFrame([{
        "p": p, "K": a.shape[1], "samples": sample.count, "violations": violations,
        "constant": plip_constant(p), "empirical_constant": estimate,
        "min_relative_slack": float(slack.min()),
    }])
    logger.info(
        "p-Lipschitz probe p=%g: %d/%d violations (empirical constant %.4g <= %.4g)",
        p, violations, sample.count, estimate, plip_constant(p),
    )
    return ProbeReport(
        name=f"plip(p={p:g})",
        formula=Formula.P_LIPSCHITZ,
        samples=sample.count,
        violations=violations,
        worst_slack=float(slack.min()),
        value=float(violations),
        tolerance=sample.tolerance,
        passed=violations == 0,
        table=table,
        note=f"empirical constant {estimate:.6g} vs {plip_constant(p):.6g}",
    )


# -- Inequalities on Omega_t --

def lp_l2_constant(p: float, delta: float, volume: float) -> float:
    """c_delta = sigma^(-2q/p) |Omega_t| / q with sigma = p delta / 2 and 2/p + 1/q = 1."""
    sigma = p * delta / 2.0
    q = p / (p - 2.0)
    return sigma ** (-2.0 * q / p) * volume / q


def lp_l2_probe(
    p: float,
    delta: float,
    motion: DomainMotion,
    basis: BasisSet,
    rule: QuadratureRule,
    sample: ProbeSample,
) -> ProbeReport:
    """||u||^2 <= delta ||u||_p^p + c_delta on every Omega_t of the sample grid."""
    if not p > 2:
        raise ConfigurationError(f"the L^p-L^2 interpolation needs p > 2 (got p={p})", formula=Formula.LP_L2.value)
    if not delta > 0:
        raise ConfigurationError(f"diagnostics.delta must be > 0 (got {delta})", formula=Formula.LP_L2.value)

    C = sample.coefficients
    rows = []
    worst = np.inf
    total_violations = 0
    for t in sample.times:
        fr = pullback_frame(basis, rule, motion, float(t))
        U = fr.values @ C.T
        l2 = fr.weights @ (U * U)
        lp = fr.weights @ np.abs(U) ** p
        c_delta = lp_l2_constant(p, delta, fr.volume)
        slack = (delta * lp + c_delta - l2) / np.maximum(1.0, l2)
        violations = int(np.count_nonzero(slack < -sample.tolerance))
        total_violations += violations
        worst = min(worst, float(slack.min()))
        rows.append({"t": float(t), "c_delta": c_delta, "volume": fr.volume,
                     "violations": violations, "min_relative_slack": float(slack.min())})

    count = C.shape[0] * len(sample.times)
    logger.info("L^p-L^2 probe p=%g delta=%g: %d/%d violations", p, delta, total_violations, count)
    return ProbeReport(
        name=f"lp_l2(p={p:g})",
        formula=Formula.LP_L2,
        samples=count,
        violations=total_violations,
        worst_slack=worst,
        value=float(total_violations),
        tolerance=sample.tolerance,
        passed=total_violations == 0,
        table=pd.DataFrame(rows).assign(p=p, delta=delta),
    )


def poincare_ratio(values: np.ndarray, grads: np.ndarray, weights: np.ndarray, q: float) -> np.ndarray:
    """||u - mean||_q / ||grad u||_q per column; NaN where the gradient vanishes.

    values: (nodes, samples), grads: (nodes, samples, n), weights include J_t.
    """
    u = values - (weights @ values) / weights.sum()
    g = np.linalg.norm(grads, axis=-1)
    if np.isinf(q):
        num, den = np.abs(u).max(axis=0), g.max(axis=0)
    else:
        num = (weights @ np.abs(u) ** q) ** (1.0 / q)
        den = (weights @ g**q) ** (1.0 / q)
    floor = 1e-12 * np.maximum(1.0, np.abs(values).max(axis=0))
    return np.where(den > floor, num / np.where(den > floor, den, 1.0), np.nan)


def poincare_probe(
    q: float,
    motion: DomainMotion,
    basis: BasisSet,
    rule: QuadratureRule,
    sample: ProbeSample,
    max_variation: float = 10.0,
) -> ProbeReport:
    """Estimate c in ||u||_q <= c ||grad u||_q for mean-zero u on each Omega_t."""
    if not q >= 1:
        raise ConfigurationError(f"diagnostics.poincare_q must be in [1, inf] (got {q})", formula=Formula.POINCARE.value)
    C = sample.coefficients
    rows = []
    excluded = 0
    for t in sample.times:
        fr = pullback_frame(basis, rule, motion, float(t))
        values = fr.values @ C.T
        grads = np.einsum("qkd,sk->qsd", fr.grads, C)
        ratios = poincare_ratio(values, grads, fr.weights, q)
        excluded += int(np.count_nonzero(np.isnan(ratios)))
        best = float(np.nanmax(ratios)) if np.any(~np.isnan(ratios)) else float("nan")
        rows.append({"t": float(t), "constant": best})

    table = pd.DataFrame(rows).assign(q=q)
    constants = table["constant"].to_numpy()
    finite = constants[np.isfinite(constants)]
    inconclusive = finite.size == 0
    estimate = float(finite.max()) if finite.size else float("nan")
    variation = float(finite.max() / finite.min()) if finite.size and finite.min() > 0 else float("inf")
    note = f"variation across t {variation:.4g}"
    if excluded:
        note += f"; {excluded} samples excluded (grad u = 0 after mean removal)"
    logger.info("Poincare probe q=%g: c=%.6g, variation %.4g", q, estimate, variation)
    return ProbeReport(
        name=f"poincare(q={q:g})",
        formula=Formula.POINCARE,
        samples=int(C.shape[0] * len(sample.times)),
        violations=0,
        worst_slack=variation,
        value=estimate,
        tolerance=max_variation,
        passed=bool(np.isfinite(estimate) and variation <= max_variation),
        inconclusive=inconclusive,
        table=table,
        note=note,
    )


def friedrichs_terms(M: np.ndarray, S: np.ndarray, C: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """||psi||^2, cumulative sum_{k<=K} (psi, w_k)^2 for K = 0..N, and ||psi||_H1^2 per sample."""
    MC = C @ M
    l2 = np.einsum("sk,sk->s", C, MC)
    cumulative = np.concatenate([np.zeros((C.shape[0], 1)), np.cumsum(MC**2, axis=1)], axis=1)
    h1 = l2 + np.einsum("sk,sk->s", C, C @ S)
    return l2, cumulative, h1


def minimal_k(l2, cumulative, h1, constant: float, epsilon: float, tol: float) -> np.ndarray:
    """Smallest K per sample with ||psi||^2 <= c (sum_{k<=K} (psi, w_k)^2 + eps ||psi||_H1^2)."""
    bound = constant * (cumulative + epsilon * h1[:, None])
    holds = l2[:, None] <= bound + tol * np.maximum(1.0, bound)
    first = np.argmax(holds, axis=1)
    return np.where(holds.any(axis=1), first, cumulative.shape[1])


def friedrichs_probe(
    epsilon: float,
    K: int,
    motion: DomainMotion,
    basis: BasisSet,
    sample: ProbeSample,
    constant: float | None = None,
) -> ProbeReport:
    """Find K_eps for the classical inequality on Omega_0 and check it on every Omega_t.

    ``basis`` is the fine basis the samples live in; ``constant`` defaults to the
    pullback constant max(1, C_H) / c0.
    """
    if not epsilon > 0:
        raise ConfigurationError(f"diagnostics.epsilon must be > 0 (got {epsilon})", formula=Formula.FRIEDRICHS.value)
    if not basis.N > K:
        raise ConfigurationError(
            f"fine basis size {basis.N} must exceed K = {K}", formula=Formula.FRIEDRICHS.value,
        )
    rule = basis.rule
    c = constant if constant is not None else motion.bounds.friedrichs_constant
    C = sample.coefficients
    tol = sample.tolerance

    times = np.asarray(sample.times, dtype=float)
    terms = []
    for t in times:
        M = assemble_mass(basis, rule, motion, float(t))
        S = assemble_stiffness(basis, rule, motion, float(t))
        terms.append(friedrichs_terms(M, S, C))

    # K on Omega_0 with constant 1
    k0 = int(minimal_k(*terms[0], 1.0, epsilon, tol).max())
    inconclusive = k0 > min(K, basis.N - 1)

    rows = []
    total_violations = 0
    worst = np.inf
    for t, (l2, cumulative, h1) in zip(times, terms):
        k_t = int(minimal_k(l2, cumulative, h1, c, epsilon, tol).max())
        bound = c * (cumulative[:, min(k0, basis.N)] + epsilon * h1)
        slack = (bound - l2) / np.maximum(1.0, bound)
        violations = int(np.count_nonzero(slack < -tol))
        total_violations += violations
        worst = min(worst, float(slack.min()))
        rows.append({"t": float(t), "minimal_K": k_t, "K0": k0, "violations_at_K0": violations, "constant": c})

    note = f"K0={k0}, c={c:.6g}, eps={epsilon:g}"
    logger.info("Friedrichs probe: %s, %d violations across %d times", note, total_violations, len(times))
    return ProbeReport(
        name="friedrichs",
        formula=Formula.FRIEDRICHS,
        samples=int(C.shape[0] * len(times)),
        violations=total_violations,
        worst_slack=worst,
        value=float(k0),
        tolerance=float(K),
        passed=total_violations == 0,
        inconclusive=inconclusive,
        table=pd.DataFrame(rows).assign(epsilon=epsilon),
        note=note,
    )
