"""Stability and assumption auditing.

Membership in the exponential-stability sets, Hilger-circle and
regressivity tests, generalized Lyapunov residuals, the sampled-feedback
contraction certificate, detectability of sampled spectra, positive-real
frequency diagnostics, exponential-envelope fitting, and delta-versus-
continuous integral comparisons.  All functions are pure; reports carry
the numeric evidence behind every verdict.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .matfun import spectrum, transmission_zeros
from .plant import LTIPlant
from .timescale import RealizedGrid, _as_time_function, delta_integral

__all__ = [
    "Regressivity",
    "DecayEstimate",
    "CertificateResult",
    "AssumptionReport",
    "PositiveRealReport",
    "DetectabilityReport",
    "EnvelopeFit",
    "IntegralComparison",
    "StabilityReport",
    "hilger_contains",
    "decay_exponent",
    "classify_regressivity",
    "generalized_lyapunov_residual",
    "contraction_certificate",
    "check_assumptions",
    "positive_real_diagnostic",
    "detectability_check",
    "envelope_fit",
    "integral_comparison",
]

DEFAULT_FREQ_GRID = np.logspace(-3.0, 3.0, 161)
A1_ZERO_TOL = 1e-7
_REGRESSIVITY_ATOL = 1e-12


def hilger_contains(lam: complex, mu: float) -> bool:
    """True iff lam lies strictly inside the Hilger circle |1 + mu*lam| < 1.

    At mu = 0 the circle degenerates to the open left half-plane.
    """
    if mu < 0:
        raise ValueError("graininess must be nonnegative")
    if mu == 0.0:
        return complex(lam).real < 0.0
    return abs(1.0 + mu * complex(lam)) < 1.0


class Regressivity(enum.Enum):
    POSITIVELY_REGRESSIVE = "positively_regressive"
    NEGATIVELY_REGRESSIVE = "negatively_regressive"
    NONREGRESSIVE = "nonregressive"


def classify_regressivity(lam: float, mu: float) -> Regressivity:
    """Sign class of 1 + mu*lam (nonregressive within 1e-12 of zero)."""
    if mu < 0:
        raise ValueError("graininess must be nonnegative")
    value = 1.0 + mu * lam
    if abs(value) <= _REGRESSIVITY_ATOL:
        return Regressivity.NONREGRESSIVE
    if value > 0:
        return Regressivity.POSITIVELY_REGRESSIVE
    return Regressivity.NEGATIVELY_REGRESSIVE


@dataclass(frozen=True)
class DecayEstimate:
    """Finite-horizon decay-exponent estimate.

    alpha is minus the horizon mean of log|1 + mu*eta| / mu (dense
    integrand Re eta); alpha_conservative takes the worst suffix-window
    mean as a limsup proxy.  A realized nonregressive point is reported
    as membership evidence for the nonregressive stability set instead
    of an exponent (alpha is None then); no infinite-horizon claim is
    attached to either number.
    """

    alpha: Optional[float]
    alpha_conservative: Optional[float]
    nonregressive_times: tuple = ()

    @property
    def nonregressive_membership(self) -> bool:
        return len(self.nonregressive_times) > 0


def _log_factor(eta: complex, mu: float) -> float:
    """log|1 + mu*eta| with a series branch against cancellation at tiny mu|eta|."""
    z = mu * eta
    if 0.0 < abs(z) < 1e-6:
        # log|1+z| = Re(z - z^2/2 + ...); two terms suffice at this size
        return (z - 0.5 * z * z).real
    return 0.5 * math.log1p(2.0 * z.real + abs(z) ** 2)


def decay_exponent(lam, grid: RealizedGrid) -> DecayEstimate:
    """Decay exponent of z^Delta = lam z along the grid.

    alpha = -(1/(T - t0)) * delta-integral of log|1 + mu*lam| / mu, with
    the dense-point integrand Re lam (its mu -> 0 limit).  Positive alpha
    certifies exponential decay over the realized horizon.
    """
    fn = _as_time_function(lam)
    times, mus = grid.times, grid.mus
    contributions = np.zeros(len(times) - 1)
    nonregressive = []
    for i in range(len(times) - 1):
        if mus[i] > 0.0:
            eta = complex(fn(times[i]))
            if abs(1.0 + mus[i] * eta) <= _REGRESSIVITY_ATOL:
                nonregressive.append(float(times[i]))
                continue
            contributions[i] = _log_factor(eta, mus[i])
        else:
            dt = times[i + 1] - times[i]
            contributions[i] = 0.5 * dt * (
                complex(fn(times[i])).real + complex(fn(times[i + 1])).real
            )
    if nonregressive:
        return DecayEstimate(
            alpha=None, alpha_conservative=None, nonregressive_times=tuple(nonregressive)
        )
    span = times[-1] - times[0]
    alpha = -float(np.sum(contributions)) / span
    # Suffix-window means, worst case over start points (conservative proxy).
    suffix = np.cumsum(contributions[::-1])[::-1]
    widths = times[-1] - times[:-1]
    alpha_conservative = float(np.min(-suffix / widths))
    return DecayEstimate(alpha=alpha, alpha_conservative=alpha_conservative)


def generalized_lyapunov_residual(a, p, q, mu: float) -> float:
    """Frobenius norm of A^T P + P A + mu A^T P A + Q.

    Zero means (P, Q) solves the graininess-mu generalized Lyapunov
    equation at this A.
    """
    am = np.atleast_2d(np.asarray(a, dtype=float))
    pm = np.atleast_2d(np.asarray(p, dtype=float))
    qm = np.atleast_2d(np.asarray(q, dtype=float))
    res = am.T @ pm + pm @ am + mu * (am.T @ pm @ am) + qm
    return float(np.linalg.norm(res))


class CertificateResult(NamedTuple):
    q: np.ndarray
    eps2: float

    @property
    def passes(self) -> bool:
        return self.eps2 > 0.0


def contraction_certificate(cb_hat, k: float, mu: float) -> CertificateResult:
    """Sampled-feedback contraction certificate at gain k and graininess mu.

    With M = -k * CB_hat, computes Q = -(M^T + M + mu M^T M) / k, the
    matrix making M satisfy the generalized Lyapunov equation with P = I.
    eps2 is the smallest eigenvalue of the symmetric part of Q; the
    certificate passes when eps2 > 0 (for a SISO system this is exactly
    mu * k * CB_hat < 2).
    """
    if not k > 0:
        raise ValueError("gain must be positive")
    if mu < 0:
        raise ValueError("graininess must be nonnegative")
    m = np.atleast_2d(np.asarray(cb_hat, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"CB_hat must be square, got shape {m.shape}")
    mm = -k * m
    q = -(mm.T + mm + mu * (mm.T @ mm)) / k
    eps2 = float(np.min(np.linalg.eigvalsh((q + q.T) / 2.0)))
    return CertificateResult(q=q, eps2=eps2)


@dataclass(frozen=True)
class AssumptionReport:
    """Structural audit: minimum phase (via transmission zeros) and CB definiteness."""

    a1_verdict: str  # "strict" | "marginal" | "non_minimum_phase"
    zeros: np.ndarray
    a2_pass: bool
    cb_sym_min_eig: float

    @property
    def a1_pass(self) -> bool:
        return self.a1_verdict == "strict"


def check_assumptions(plant: LTIPlant, zero_tol: float = A1_ZERO_TOL) -> AssumptionReport:
    """Classify transmission zeros and test positive definiteness of CB + CB^T.

    Zeros strictly left of -zero_tol give a strict verdict; any zero
    within zero_tol of the imaginary axis makes it marginal; any zero
    right of +zero_tol is non-minimum-phase (which dominates marginal).
    """
    zeros = transmission_zeros(plant.A, plant.B, plant.C)
    if any(z.real > zero_tol for z in zeros):
        verdict = "non_minimum_phase"
    elif any(abs(z.real) <= zero_tol for z in zeros):
        verdict = "marginal"
    else:
        verdict = "strict"
    cb = plant.cb()
    lam_min = float(np.min(np.linalg.eigvalsh(cb + cb.T)))
    return AssumptionReport(
        a1_verdict=verdict, zeros=zeros, a2_pass=lam_min > 0.0, cb_sym_min_eig=lam_min
    )


@dataclass(frozen=True)
class PositiveRealReport:
    """Frequency-grid surrogate for positive-realness of the frozen-gain loop."""

    verdict: str  # "pass" | "fail" | "not_applicable"
    k_star: float
    min_eig: Optional[float]
    closed_loop_spectrum: np.ndarray
    skipped_freqs: tuple = ()

    @property
    def passes(self) -> bool:
        return self.verdict == "pass"


def positive_real_diagnostic(
    plant: LTIPlant,
    k_star: float,
    freqs=None,
    tol: float = 1e-9,
) -> PositiveRealReport:
    """Check lmin{H(jw) + H(jw)*} >= -tol over a frequency grid.

    H(jw) = C (jw I - A + k* B C)^-1 B is the closed-loop transfer
    matrix at the frozen gain k*.  Requires A - k* B C Hurwitz; if not,
    the verdict is "not_applicable" with the spectrum as evidence.
    Grid points with a singular resolvent are skipped and reported.
    """
    closed = plant.A - k_star * (plant.B @ plant.C)
    eigs = spectrum(closed)
    if np.max(eigs.real) >= 0.0:
        return PositiveRealReport(
            verdict="not_applicable",
            k_star=k_star,
            min_eig=None,
            closed_loop_spectrum=eigs,
        )
    if freqs is None:
        freqs = DEFAULT_FREQ_GRID
    eye = np.eye(plant.n)
    min_eig = math.inf
    skipped = []
    for w in np.asarray(freqs, dtype=float):
        try:
            resolvent = np.linalg.solve(1j * w * eye - closed, plant.B)
        except np.linalg.LinAlgError:
            skipped.append(float(w))
            continue
        h = plant.C @ resolvent
        herm = h + h.conj().T
        min_eig = min(min_eig, float(np.min(np.linalg.eigvalsh(herm))))
    verdict = "pass" if min_eig >= -tol else "fail"
    return PositiveRealReport(
        verdict=verdict,
        k_star=k_star,
        min_eig=min_eig,
        closed_loop_spectrum=eigs,
        skipped_freqs=tuple(skipped),
    )


@dataclass(frozen=True)
class DetectabilityReport:
    """Sampled-spectrum aliasing audit at one graininess."""

    mu: float
    passes: bool
    violations: tuple  # (lam_k, lam_l, quotient) triples


def detectability_check(a, mu: float, tol: float = 1e-9) -> DetectabilityReport:
    """Flag eigenvalue pairs whose difference aliases under sampling at mu.

    For every unordered pair lam_k != lam_l drawn from {0} union spec(A),
    the quotient (lam_k - lam_l) * mu / (2 pi i) must not be a nonzero
    integer; a violation is declared when its imaginary part is within
    tol of 0 and its real part within tol of an integer of magnitude >= 1.
    """
    if not mu > 0:
        raise ValueError("detectability check requires positive graininess")
    eigs = [0.0 + 0.0j] + list(spectrum(a))
    violations = []
    for i in range(len(eigs)):
        for j in range(i + 1, len(eigs)):
            if eigs[i] == eigs[j]:
                continue
            quotient = (eigs[i] - eigs[j]) * mu / (2.0j * math.pi)
            nearest = round(quotient.real)
            if (
                abs(quotient.imag) <= tol
                and abs(quotient.real - nearest) <= tol
                and abs(nearest) >= 1
            ):
                violations.append((eigs[i], eigs[j], quotient))
    return DetectabilityReport(mu=float(mu), passes=not violations, violations=tuple(violations))


class EnvelopeFit(NamedTuple):
    K: float
    alpha_fit: float


def envelope_fit(times, norms, fit_fraction: float = 0.6) -> EnvelopeFit:
    """Fit ||x(t)|| <= ||x(t0)|| K exp(-alpha (t - t0) / 2) to a trace tail.

    Least-squares line on log||x|| over the trailing fit_fraction of the
    time span gives alpha_fit = -2 * slope; K is the smallest constant
    (at least 1) making the bound hold over the fit window.  An all-zero
    window reports alpha_fit = +inf as a degenerate sentinel.
    """
    t = np.asarray(times, dtype=float)
    r = np.asarray(norms, dtype=float)
    if t.ndim != 1 or t.shape != r.shape or len(t) < 2:
        raise ValueError("times and norms must be equal-length 1-D arrays (>= 2 points)")
    if not 0 < fit_fraction <= 1:
        raise ValueError("fit_fraction must lie in (0, 1]")
    t0, t_end = t[0], t[-1]
    window_start = t_end - fit_fraction * (t_end - t0)
    in_window = (t >= window_start - 1e-12) & (r > 0.0)
    if r[0] <= 0.0 or np.count_nonzero(in_window) < 2:
        return EnvelopeFit(K=1.0, alpha_fit=math.inf)
    tw, rw = t[in_window], r[in_window]
    slope = np.polyfit(tw, np.log(rw), 1)[0]
    alpha = -2.0 * float(slope)
    # Smallest K covering the window under the fitted rate.
    log_excess = np.log(rw) - np.log(r[0]) + 0.5 * alpha * (tw - t0)
    k_const = float(np.exp(np.max(log_excess)))
    return EnvelopeFit(K=max(1.0, k_const), alpha_fit=alpha)


@dataclass(frozen=True)
class IntegralComparison:
    """Two-sided comparison of the delta and continuous integrals of e^{alpha t}."""

    delta_value: float
    continuous_value: float
    c1: float
    c2: float
    verdict: bool


def integral_comparison(alpha: float, grid: RealizedGrid, rtol: float = 1e-6) -> IntegralComparison:
    """Check c1 * integral <= delta-integral <= c2 * integral for e^{alpha t}.

    With mu_inf the largest realized graininess, c1 = exp(-alpha mu_inf)
    for alpha > 0 (else 1) and c2 = exp(-alpha mu_inf) for alpha < 0
    (else 1).  rtol absorbs dense-run quadrature error in the verdict.
    """
    t0, t1 = grid.t_start, grid.t_end
    delta_value = delta_integral(lambda t: math.exp(alpha * t), grid)
    if alpha == 0.0:
        continuous = t1 - t0
    else:
        continuous = (math.exp(alpha * t1) - math.exp(alpha * t0)) / alpha
    mu_inf = grid.max_graininess
    c1 = math.exp(-alpha * mu_inf) if alpha > 0 else 1.0
    c2 = math.exp(-alpha * mu_inf) if alpha < 0 else 1.0
    slack = rtol * abs(continuous)
    verdict = (c1 * continuous <= delta_value + slack) and (
        delta_value <= c2 * continuous + slack
    )
    return IntegralComparison(
        delta_value=delta_value,
        continuous_value=continuous,
        c1=c1,
        c2=c2,
        verdict=verdict,
    )


@dataclass
class StabilityReport:
    """Aggregated audit results with the evidence behind each verdict.

    Sections are optional; `check` fills the structural ones, `analyze`
    the trace-dependent ones.
    """

    assumptions: Optional[AssumptionReport] = None
    detectability: tuple = ()
    certificates: tuple = ()  # (k, mu, eps2) rows
    positive_real: tuple = ()
    lyapunov_residuals: dict = field(default_factory=dict)
    decay: Optional[DecayEstimate] = None
    envelope: Optional[EnvelopeFit] = None
    extras: dict = field(default_factory=dict)

    def key_values(self) -> dict:
        """Flatten to string keys and scalar values for the report file."""
        kv: dict = {}
        if self.assumptions is not None:
            kv["a1.verdict"] = self.assumptions.a1_verdict
            kv["a1.zeros"] = ";".join(f"{z.real:.12g}{z.imag:+.12g}j" for z in self.assumptions.zeros)
            kv["a2.pass"] = self.assumptions.a2_pass
            kv["a2.cb_sym_min_eig"] = self.assumptions.cb_sym_min_eig
        for rep in self.detectability:
            key = f"detectability.mu_{rep.mu:.10g}"
            kv[f"{key}.pass"] = rep.passes
            kv[f"{key}.violations"] = len(rep.violations)
        if self.certificates:
            worst = min(eps2 for _, _, eps2 in self.certificates)
            kv["certificate.min_eps2"] = worst
            kv["certificate.rows"] = len(self.certificates)
            kv["certificate.all_pass"] = worst > 0.0
        for rep in self.positive_real:
            key = f"positive_real.k_{rep.k_star:.10g}"
            kv[f"{key}.verdict"] = rep.verdict
            if rep.min_eig is not None:
                kv[f"{key}.min_eig"] = rep.min_eig
        for name, value in self.lyapunov_residuals.items():
            kv[f"lyapunov.{name}"] = value
        if self.decay is not None:
            kv["decay.alpha"] = self.decay.alpha
            kv["decay.alpha_conservative"] = self.decay.alpha_conservative
            kv["decay.nonregressive_points"] = len(self.decay.nonregressive_times)
        if self.envelope is not None:
            kv["envelope.K"] = self.envelope.K
            kv["envelope.alpha_fit"] = self.envelope.alpha_fit
        for name, value in self.extras.items():
            kv[name] = value
        return kv

    def to_text(self) -> str:
        lines = []
        if self.assumptions is not None:
            a = self.assumptions
            zeros = ", ".join(f"{z:.6g}" for z in a.zeros) or "none"
            lines.append(f"minimum phase (A1): {a.a1_verdict} (transmission zeros: {zeros})")
            lines.append(
                f"CB definiteness (A2): {'pass' if a.a2_pass else 'FAIL'}"
                f" (min eig of CB + CB^T = {a.cb_sym_min_eig:.12g})"
            )
        for rep in self.detectability:
            status = "pass" if rep.passes else "VIOLATION"
            lines.append(f"detectability at mu = {rep.mu:.10g}: {status}")
            for lam_k, lam_l, quotient in rep.violations:
                lines.append(
                    f"  pair ({lam_k:.6g}, {lam_l:.6g}) aliases: quotient {quotient:.6g}"
                )
        if self.certificates:
            worst = min(eps2 for _, _, eps2 in self.certificates)
            lines.append(
                f"contraction certificate over {len(self.certificates)} (k, mu) pairs:"
                f" min eps2 = {worst:.6g} ({'all pass' if worst > 0 else 'FAILURES present'})"
            )
        for rep in self.positive_real:
            extra = "" if rep.min_eig is None else f" (min eig {rep.min_eig:.6g})"
            lines.append(f"positive-real at k* = {rep.k_star:.6g}: {rep.verdict}{extra}")
        if self.lyapunov_residuals:
            pairs = ", ".join(f"{k} = {v:.3g}" for k, v in self.lyapunov_residuals.items())
            lines.append(f"Lyapunov residuals: {pairs}")
        if self.decay is not None:
            if self.decay.nonregressive_membership:
                lines.append(
                    "decay exponent: nonregressive point(s) realized"
                    f" at {list(self.decay.nonregressive_times)}"
                )
            else:
                lines.append(
                    f"decay exponent: alpha = {self.decay.alpha:.6g}"
                    f" (conservative {self.decay.alpha_conservative:.6g})"
                )
        if self.envelope is not None:
            lines.append(
                f"envelope fit: K = {self.envelope.K:.6g}, alpha_fit = {self.envelope.alpha_fit:.6g}"
            )
        for name, value in self.extras.items():
            lines.append(f"{name}: {value}")
        return "\n".join(lines)
