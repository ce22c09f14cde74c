"""
asymptotics.py – the area law  A ~ 4 K eps^beta e^{-a/eps} (1 + O(1/ln(1/eps)))

Provides:
- SplittingFit, fit_splitting(): weighted least squares in log form, with and
  without the c/ln(1/eps) correction, leave-one-out spread
- TheoryPrediction, predict(): a, b, beta = -1 - mu Im b, |f(mu)|
- OriginalPrediction, to_original_variables(): the law in the original
  (I, delta) variables
- melnikov_verdict(): which parts of the first-order prediction survive
- prefactor_convergence(), beta_mu_slope(): convergence diagnostics
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from mpmath import mp

from .errors import FitError, SpecError
from .fourier import to_mpf

logger = logging.getLogger(__name__)

# ---------- knobs ----------
MIN_SAMPLES       = 6
MIN_SPAN          = 4
POWER_TOLERANCE   = mp.mpf("0.05")
B_TOLERANCE       = mp.mpf("1e-4")
MAX_CONDITION     = mp.mpf(10) ** 12

THETA_NOTE = ("prefactor is |f(mu) e^{iC(mu)}|; C(mu) is not computed, so the fitted K is "
              "reported next to |f(mu)| and the gap is attributed to e^{iC(mu)}")


class Verdict:
    POWER_MATCH, POWER_MISMATCH, MELNIKOV_VALID = "power match", "power mismatch", "Melnikov valid"


@dataclass
class SplittingFit:
    a_fit: object
    beta_fit: object
    K_fit: object
    c_fit: object
    covariance: object
    residuals: list
    epsilons: list
    corrected: bool = True
    leave_one_out: dict = field(default_factory=dict)
    uncorrected: "SplittingFit" = None
    flagged: bool = False

    @property
    def residual_norm(self):
        return mp.sqrt(mp.fsum(r ** 2 for r in self.residuals))

    def errors(self):
        """One-sigma errors on (ln 4K, beta, a[, c]) from the covariance diagonal."""
        return [mp.sqrt(abs(self.covariance[i, i])) for i in range(self.covariance.rows)]

    def model(self, epsilon):
        value = mp.log(4 * self.K_fit) + self.beta_fit * mp.log(epsilon) - self.a_fit / epsilon
        if self.corrected:
            value += self.c_fit / mp.log(1 / epsilon)
        return mp.exp(value)

    def to_dict(self) -> dict:
        s = lambda v: None if v is None else mp.nstr(v, 15)
        out = {"a": s(self.a_fit), "beta": s(self.beta_fit), "K": s(self.K_fit), "c": s(self.c_fit),
               "corrected": self.corrected, "errors": [s(e) for e in self.errors()],
               "residual_norm": s(self.residual_norm), "samples": len(self.epsilons),
               "leave_one_out": {k: s(v) for k, v in self.leave_one_out.items()},
               "flagged": self.flagged}
        if self.uncorrected is not None:
            out["uncorrected"] = self.uncorrected.to_dict()
        return out


def _field(sample, name):
    return sample[name] if isinstance(sample, dict) else getattr(sample, name)


def _accepted(samples):
    kept = []
    for s in samples:
        if _field(s, "flagged") in (True, "True", "true", 1):
            logger.warning("flagged sample at eps=%s left out of the fit", _field(s, "epsilon"))
            continue
        if mp.mpf(_field(s, "area")) <= 0:
            logger.warning("non-positive area at eps=%s left out of the fit", _field(s, "epsilon"))
            continue
        kept.append((mp.mpf(_field(s, "epsilon")), mp.mpf(_field(s, "area")),
                     mp.mpf(_field(s, "err_est"))))
    return kept


def _solve(points, corrected):
    ncol = 4 if corrected else 3
    rows, rhs = [], []
    for eps, area, err in points:
        weight = area / err if err > 0 else mp.mpf(1)
        weight = min(weight, mp.mpf(10) ** 30)
        row = [1, mp.log(eps), -1 / eps, 1 / mp.log(1 / eps)][:ncol]
        rows.append([weight * v for v in row])
        rhs.append(weight * mp.log(area))
    A, b = mp.matrix(rows), mp.matrix(rhs)
    normal = A.T * A
    try:
        inverse = mp.inverse(normal)
    except ZeroDivisionError as exc:
        raise FitError("singular design matrix") from exc
    condition = mp.mnorm(normal, 1) * mp.mnorm(inverse, 1)
    if condition > MAX_CONDITION ** 2:
        raise FitError("ill-conditioned design: eps range too narrow", {"condition": condition})
    coef, _ = mp.qr_solve(A, b)
    residuals = [(b[i] - mp.fsum(A[i, j] * coef[j] for j in range(ncol))) for i in range(len(points))]
    dof = max(1, len(points) - ncol)
    scale = mp.fsum(r ** 2 for r in residuals) / dof
    return coef, inverse * scale, residuals


def _build(points, corrected):
    coef, cov, residuals = _solve(points, corrected)
    return SplittingFit(
        a_fit=coef[2], beta_fit=coef[1], K_fit=mp.exp(coef[0]) / 4,
        c_fit=coef[3] if corrected else None, covariance=cov, residuals=residuals,
        epsilons=[p[0] for p in points], corrected=corrected,
    )


def fit_splitting(samples, *, corrected=True) -> SplittingFit:
    """
    Weighted least squares  ln A = ln(4K) + beta ln eps - a/eps [+ c/ln(1/eps)].

    Weights are A/err_est, so each sample counts by its relative accuracy.
    Both the corrected and the uncorrected fit are computed; the second is
    attached as ``uncorrected``.
    """
    points = _accepted(samples)
    if len(points) < MIN_SAMPLES:
        raise FitError(f"need at least {MIN_SAMPLES} accepted samples, got {len(points)}")
    eps = [p[0] for p in points]
    if max(eps) / min(eps) < MIN_SPAN:
        raise FitError(f"eps range must span a factor {MIN_SPAN}",
                       {"min": min(eps), "max": max(eps)})
    main = _build(points, corrected)
    other = _build(points, not corrected) if len(points) > 4 else None
    plain, full = (other, main) if corrected else (main, other)
    if plain is not None and full is not None and full.residual_norm > plain.residual_norm:
        logger.warning("correction term does not reduce the fit residual")
        main.flagged = True
    if corrected:
        main.uncorrected = plain
    spread = {"a": mp.mpf(0), "beta": mp.mpf(0), "K": mp.mpf(0)}
    if len(points) - 1 > (4 if corrected else 3):
        for i in range(len(points)):
            sub = _build(points[:i] + points[i + 1:], corrected)
            spread["a"] = max(spread["a"], abs(sub.a_fit - main.a_fit))
            spread["beta"] = max(spread["beta"], abs(sub.beta_fit - main.beta_fit))
            spread["K"] = max(spread["K"], abs(sub.K_fit - main.K_fit))
    main.leave_one_out = spread
    logger.info("area fit: a=%s beta=%s K=%s (leave-one-out a +-%s)", mp.nstr(main.a_fit, 10),
                mp.nstr(main.beta_fit, 8), mp.nstr(main.K_fit, 8), mp.nstr(spread["a"], 3))
    return main


# ---------- theory side ----------
@dataclass
class TheoryPrediction:
    a: object
    b: object
    b_closed: object
    beta_theory: object
    f_abs: object
    mu: object
    b_source: str = "inner"
    flagged: bool = False
    theta_note: str = THETA_NOTE

    def to_dict(self) -> dict:
        c = lambda z: None if z is None else [mp.nstr(mp.re(z), 15), mp.nstr(mp.im(z), 15)]
        return {"a": mp.nstr(self.a, 20), "b": c(self.b), "b_closed": c(self.b_closed),
                "beta_theory": mp.nstr(self.beta_theory, 15),
                "f_abs": None if self.f_abs is None else mp.nstr(self.f_abs, 15),
                "mu": mp.nstr(self.mu, 10), "b_source": self.b_source, "flagged": self.flagged,
                "theta_note": self.theta_note}


def predict(sing, inner, mu, *, g3=None) -> TheoryPrediction:
    """
    (a, b, beta, |f(mu)|) for the law  A ~ 4 e^{-a/eps + mu Im b ln(1/eps)} |f e^{iC}| / eps.

    b comes from the inner fit when available; the closed form 2 g3 C+ is
    the consistency check (and the fallback).
    """
    b_closed = None
    if g3 is not None:
        g3 = to_mpf(g3) if isinstance(g3, Fraction) else mp.mpf(g3)
        b_closed = 2 * g3 * sing.C_plus
    b, source, flagged = b_closed, "closed form", False
    f_abs = None
    if inner is not None:
        b, source = inner.b, "inner"
        f_abs = abs(inner.f)
        if b_closed is not None:
            tolerance = max(3 * inner.b_error, B_TOLERANCE)
            if abs(inner.b - b_closed) > tolerance:
                logger.warning("inner b = %s disagrees with 2 g3 C+ = %s", mp.nstr(inner.b, 10),
                               mp.nstr(b_closed, 10))
                flagged = True
    if b is None:
        b = mp.mpc(0)
        source = "none (G = 0 assumed)"
    beta = -1 - mu * mp.im(b)
    return TheoryPrediction(sing.a, b, b_closed, beta, f_abs, mu, source, flagged)


@dataclass
class OriginalPrediction:
    """The area law in the original variables, eps = m sqrt(h02 delta), I = eps y/(m h02)."""
    a: object
    imag_b: object
    h02: object
    m: int
    theta: object

    def epsilon_of(self, delta):
        return self.m * mp.sqrt(self.h02 * delta)

    def area_factor(self, epsilon):
        return epsilon / (self.m * self.h02)

    def area(self, delta):
        """4 m^(-1-Im b) h02^(-1-Im b/2) delta^(-Im b/2) e^{-a/(m sqrt(h02 delta))} |Theta|."""
        ib = self.imag_b
        return (4 * mp.power(self.m, -1 - ib) * mp.power(self.h02, -1 - ib / 2)
                * mp.power(delta, -ib / 2) * mp.exp(-self.a / (self.m * mp.sqrt(self.h02 * delta)))
                * self.theta)

    def rescaled_area(self, epsilon):
        return 4 * mp.power(epsilon, -1 - self.imag_b) * mp.exp(-self.a / epsilon) * self.theta

    def from_rescaled(self, area, epsilon):
        return area * self.area_factor(epsilon)

    def to_dict(self) -> dict:
        return {"a": mp.nstr(self.a, 20), "imag_b": mp.nstr(self.imag_b, 15),
                "h02": mp.nstr(self.h02, 15), "m": self.m, "theta": mp.nstr(self.theta, 15),
                "formula": "4 m^(-1-Im b) h02^(-1-Im b/2) delta^(-Im b/2) "
                           "exp(-a/(m sqrt(h02 delta))) |Theta|"}


def to_original_variables(pred: TheoryPrediction, spec, ctx, *, theta=None) -> OriginalPrediction:
    """Map the mu = 1 law to delta; Theta defaults to the measured |f(1)| when no fit is given."""
    if ctx.mu != 1 or pred.mu != 1:
        raise SpecError("the original-variable law is stated for mu = 1", {"mu": ctx.mu})
    if theta is None:
        theta = pred.f_abs if pred.f_abs is not None else mp.mpf(1)
    return OriginalPrediction(pred.a, mp.im(pred.b), to_mpf(spec.h02), ctx.m, theta)


# ---------- verdicts ----------
def melnikov_verdict(fit: SplittingFit, pred: TheoryPrediction, mel, mu) -> dict:
    """Exponent, power and prefactor of the Melnikov prediction against the measured law."""
    exponent_gap = abs(fit.a_fit - pred.a)
    a_error = max(fit.errors()[2], fit.leave_one_out.get("a", 0), mp.mpf(10) ** -6)
    power_mismatch = fit.beta_fit + 1
    expected_mismatch = -mu * mp.im(pred.b)
    f0 = getattr(mel, "f0_estimate", None) if mel is not None else None
    K_melnikov = abs(f0) * abs(mu) if f0 is not None else None
    if abs(power_mismatch) <= POWER_TOLERANCE:
        verdict = Verdict.POWER_MATCH
        if abs(mu) <= mp.mpf("0.01") and K_melnikov is not None:
            if abs(fit.K_fit / K_melnikov - 1) <= mp.mpf("0.05"):
                verdict = Verdict.MELNIKOV_VALID
    else:
        verdict = f"{Verdict.POWER_MISMATCH} = {mp.nstr(power_mismatch, 4)}"
    report = {
        "exponent": {"a_fit": mp.nstr(fit.a_fit, 12), "a_theory": mp.nstr(pred.a, 12),
                     "agree": bool(exponent_gap <= 5 * a_error + mp.mpf("0.01") * pred.a)},
        "power": {"beta_fit": mp.nstr(fit.beta_fit, 8), "beta_melnikov": "-1",
                  "beta_theory": mp.nstr(pred.beta_theory, 8),
                  "mismatch": mp.nstr(power_mismatch, 8),
                  "expected_mismatch": mp.nstr(expected_mismatch, 8)},
        "prefactor": {"K_fit": mp.nstr(fit.K_fit, 10),
                      "f_abs": None if pred.f_abs is None else mp.nstr(pred.f_abs, 10),
                      "K_melnikov": None if K_melnikov is None else mp.nstr(K_melnikov, 10),
                      "note": THETA_NOTE},
        "verdict": verdict,
    }
    logger.info("Melnikov verdict at mu=%s: %s", mp.nstr(mu, 6), verdict)
    return report


def prefactor_convergence(samples, a, imag_b, mu=1, *, slack=mp.mpf("1.1")) -> dict:
    """R(eps) = A eps^(1 + mu Im b) e^{a/eps} / 4 and the decay of its scaled increments."""
    points = sorted(((mp.mpf(_field(s, "epsilon")), mp.mpf(_field(s, "area")))
                     for s in samples), key=lambda p: -p[0])
    R = [(eps, area * mp.power(eps, 1 + mu * imag_b) * mp.exp(a / eps) / 4) for eps, area in points]
    scaled = [abs(R[i + 1][1] - R[i][1]) * mp.log(1 / R[i][0]) for i in range(len(R) - 1)]
    monotone = all(scaled[i + 1] <= scaled[i] * slack for i in range(len(scaled) - 1))
    return {"R": [(mp.nstr(e, 10), mp.nstr(r, 15)) for e, r in R],
            "scaled_increments": [mp.nstr(s, 8) for s in scaled],
            "monotone": monotone,
            "theta_estimate": mp.nstr(R[-1][1], 15) if R else None}


def beta_mu_slope(fits) -> dict:
    """Regress beta_fit on mu over (mu, SplittingFit) pairs; the slope estimates -Im b."""
    if len(fits) < 2:
        raise FitError("need fits at two or more values of mu")
    mus = np.array([float(mu) for mu, _ in fits])
    betas = np.array([float(f.beta_fit) for _, f in fits])
    (slope, intercept), cov = np.polyfit(mus, betas, 1, cov=True) if len(fits) > 3 else \
        (np.polyfit(mus, betas, 1), np.zeros((2, 2)))
    return {"slope": float(slope), "intercept": float(intercept),
            "slope_error": float(np.sqrt(abs(cov[0, 0]))), "points": len(fits)}
