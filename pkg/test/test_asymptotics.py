from fractions import Fraction
from types import SimpleNamespace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp

from splitting.asymptotics import (OriginalPrediction, SplittingFit, Verdict, beta_mu_slope,
                                   fit_splitting, melnikov_verdict, predict, prefactor_convergence,
                                   to_original_variables)
from splitting.errors import FitError, SpecError

GRID = [mp.mpf("0.4") * mp.mpf("0.85") ** k for k in range(10)]


def law(a, beta, K, c=0):
    return lambda eps: 4 * K * eps ** beta * mp.exp(-a / eps + c / mp.log(1 / eps))


def samples_of(area, grid=GRID):
    return [{"epsilon": eps, "area": area(eps), "err_est": area(eps) * mp.mpf(10) ** -20,
             "flagged": "false"} for eps in grid]


PENDULUM_SINGULARITY = SimpleNamespace(a=mp.pi / 2, C_plus=mp.mpc(0, -2))


def test_fit_recovers_the_law_with_correction(precision):
    a, beta, K, c = mp.pi / 2, mp.mpf("-0.6"), mp.mpf("1.7"), mp.mpf("0.3")
    fit = fit_splitting(samples_of(law(a, beta, K, c)))
    assert abs(fit.a_fit - a) < mp.mpf(10) ** -10
    assert abs(fit.beta_fit - beta) < mp.mpf(10) ** -10
    assert abs(fit.K_fit - K) < mp.mpf(10) ** -9
    assert abs(fit.c_fit - c) < mp.mpf(10) ** -9
    assert fit.uncorrected is not None and not fit.uncorrected.corrected
    assert fit.leave_one_out["a"] < mp.mpf(10) ** -10
    assert abs(fit.model(GRID[3]) / law(a, beta, K, c)(GRID[3]) - 1) < mp.mpf(10) ** -10
    assert fit.to_dict()["samples"] == len(GRID)


def test_uncorrected_fit(precision):
    fit = fit_splitting(samples_of(law(mp.pi / 2, -1, 2)), corrected=False)
    assert fit.c_fit is None and not fit.corrected
    assert abs(fit.a_fit - mp.pi / 2) < mp.mpf(10) ** -10
    assert len(fit.errors()) == 3


def test_flagged_and_empty_samples_are_left_out(precision):
    rows = samples_of(law(mp.pi / 2, -1, 2))
    rows[4]["flagged"] = "true"
    rows[5]["area"] = mp.mpf(0)
    fit = fit_splitting(rows)
    assert len(fit.epsilons) == len(GRID) - 2


def test_fit_needs_enough_samples_and_span(precision):
    area = law(mp.pi / 2, -1, 2)
    with pytest.raises(FitError, match="at least"):
        fit_splitting(samples_of(area, GRID[:5]))
    narrow = [mp.mpf("0.3") + mp.mpf("0.01") * k for k in range(8)]
    with pytest.raises(FitError, match="span"):
        fit_splitting(samples_of(area, narrow))


def test_prediction_from_the_closed_form_b(precision):
    pred = predict(PENDULUM_SINGULARITY, None, 1, g3=Fraction(1, 10))
    assert abs(pred.b - mp.mpc(0, "-0.4")) < mp.mpf(10) ** -25
    assert abs(pred.beta_theory + mp.mpf("0.6")) < mp.mpf(10) ** -25
    assert pred.b_source == "closed form" and pred.f_abs is None
    plain = predict(PENDULUM_SINGULARITY, None, 1)
    assert plain.beta_theory == -1 and plain.b == 0


def test_inner_b_is_checked_against_the_closed_form(precision):
    close = SimpleNamespace(b=mp.mpc("1e-6", "-0.4"), f=mp.mpc(0, 3), b_error=mp.mpf(0))
    pred = predict(PENDULUM_SINGULARITY, close, 1, g3=Fraction(1, 10))
    assert pred.b_source == "inner" and not pred.flagged
    assert pred.f_abs == 3
    far = SimpleNamespace(b=mp.mpc(0, "-0.3"), f=mp.mpc(0, 3), b_error=mp.mpf(0))
    assert predict(PENDULUM_SINGULARITY, far, 1, g3=Fraction(1, 10)).flagged


def test_original_variables_need_mu_one(precision):
    pred = predict(PENDULUM_SINGULARITY, None, mp.mpf("0.5"))
    spec = SimpleNamespace(h02=Fraction(1))
    with pytest.raises(SpecError):
        to_original_variables(pred, spec, SimpleNamespace(mu=mp.mpf("0.5"), m=1))
    unit = predict(PENDULUM_SINGULARITY, None, 1, g3=Fraction(1, 10))
    original = to_original_variables(unit, spec, SimpleNamespace(mu=1, m=1))
    assert original.theta == 1
    assert abs(original.imag_b + mp.mpf("0.4")) < mp.mpf(10) ** -25


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.fractions(min_value=Fraction(1, 4), max_value=4),
       st.floats(0.01, 0.5), st.floats(-1, 1))
def test_original_law_is_the_rescaled_law(m, h02, delta, imag_b):
    with mp.workdps(30):
        law = OriginalPrediction(mp.pi / 2, mp.mpf(imag_b), mp.mpf(h02.numerator) / h02.denominator,
                                 m, mp.mpf("2.5"))
        delta = mp.mpf(delta)
        eps = law.epsilon_of(delta)
        direct = law.area(delta)
        via = law.from_rescaled(law.rescaled_area(eps), eps)
        assert abs(direct - via) <= abs(direct) * mp.mpf(10) ** -20


def test_prefactor_settles_like_one_over_log(precision):
    a, imag_b, theta = mp.pi / 2, mp.mpf("-0.4"), mp.mpf("2.5")
    prefactor = lambda eps: theta * (1 + 1 / mp.log(1 / eps))
    area = lambda eps: 4 * prefactor(eps) * eps ** (-1 - imag_b) * mp.exp(-a / eps)
    report = prefactor_convergence(samples_of(area), a, imag_b)
    assert report["monotone"]
    assert mp.mpf(report["theta_estimate"]) == pytest.approx(float(prefactor(GRID[-1])))
    assert len(report["scaled_increments"]) == len(GRID) - 1


def test_beta_moves_linearly_with_mu():
    fits = [(mu, SimpleNamespace(beta_fit=-1 + 0.4 * mu)) for mu in (0.25, 0.5, 0.75, 1.0)]
    result = beta_mu_slope(fits)
    assert result["slope"] == pytest.approx(0.4)
    assert result["intercept"] == pytest.approx(-1)
    with pytest.raises(FitError):
        beta_mu_slope(fits[:1])


def test_melnikov_verdicts(precision):
    a = mp.pi / 2
    twisted = fit_splitting(samples_of(law(a, mp.mpf("-0.6"), 2)))
    pred = predict(PENDULUM_SINGULARITY, None, 1, g3=Fraction(1, 10))
    report = melnikov_verdict(twisted, pred, None, 1)
    assert report["verdict"].startswith(Verdict.POWER_MISMATCH)
    assert report["exponent"]["agree"]

    mu = mp.mpf("0.01")
    f0 = 2 * mp.pi
    first_order = fit_splitting(samples_of(law(a, -1, f0 * mu)))
    plain = predict(PENDULUM_SINGULARITY, None, mu)
    mel = SimpleNamespace(f0_estimate=mp.mpc(0, f0))
    assert melnikov_verdict(first_order, plain, mel, mu)["verdict"] == Verdict.MELNIKOV_VALID
    assert melnikov_verdict(first_order, plain, None, mu)["verdict"] == Verdict.POWER_MATCH
    assert isinstance(first_order, SplittingFit)
