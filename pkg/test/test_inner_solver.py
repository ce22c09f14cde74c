from fractions import Fraction

import numpy as np
import pytest
from mpmath import mp

from splitting import inner_solver
from splitting.errors import FitError
from splitting.inner_solver import (AsymptoticSeries, Collocation, InnerDomain, RForm,
                                    build_inner_model, compute_difference,
                                    first_order_stokes_constant, solve_inner_manifolds)
from splitting.model_core import ResonanceContext, rescale_at_resonance
from splitting.separatrix_analysis import SingularityData

from conftest import pendulum


def pendulum_singularity():
    """Pole data of (q0, p0) for V = cos x - 1, known in closed form."""
    return SingularityData(a=mp.pi / 2, C_plus=mp.mpc(0, -2), C1_hat=0, C2_hat=0, M=1,
                           fit_residual=0, scan_log=[], harmonic_sign=1, growth_constant=mp.mpf(4))


def model_for(spec, mu, **kwargs):
    system = rescale_at_resonance(spec, ResonanceContext.from_epsilon(spec, 0, 1, mp.mpf("0.2")))
    return build_inner_model(system, pendulum_singularity(), mu, **kwargs)


def test_collocation_derivatives(precision):
    grid = Collocation(8)
    cos = np.array([mp.cos(t) for t in grid.taus], dtype=object)
    dcos = grid.dtau(cos)
    icos = grid.antiderivative(cos)
    for j, t in enumerate(grid.taus):
        assert abs(dcos[j] + mp.sin(t)) < mp.mpf(10) ** -25
        assert abs(icos[j] - mp.sin(t)) < mp.mpf(10) ** -25
    assert abs(grid.harmonic(cos, 1) - mp.mpf(1) / 2) < mp.mpf(10) ** -25
    assert abs(grid.mean(cos)) < mp.mpf(10) ** -25


@pytest.mark.parametrize("size", [2, 7])
def test_collocation_size(size):
    with pytest.raises(ValueError):
        Collocation(size)


def test_pendulum_inner_model(precision, pendulum_spec):
    model = model_for(pendulum_spec, mp.mpf("0.01"))
    assert abs(model.a_tilde[1] - mp.mpc(0, "0.25")) < mp.mpf(10) ** -25
    assert abs(model.a_tilde[-1] - mp.mpc(0, "-0.25")) < mp.mpf(10) ** -25
    assert model.c_tilde == {} and model.G_tilde == {}
    assert model.b_closed == 0
    assert abs(first_order_stokes_constant(model) - mp.pi * 1j / 2) < mp.mpf(10) ** -25
    assert "d_tau psi" in model.describe()
    assert model.to_dict()["M"] == 1


def test_cubic_twist_gives_closed_form_b(precision, pendulum_eta_spec):
    model = model_for(pendulum_eta_spec, mp.mpf("0.01"))
    assert abs(model.G_tilde[3] - mp.mpc(0, "-0.2")) < mp.mpf(10) ** -25
    assert abs(model.b_closed - mp.mpc(0, "-0.4")) < mp.mpf(10) ** -25


def test_r_form_changes_the_z_power(precision):
    spec = pendulum(alpha=Fraction(1, 5))
    leading = model_for(spec, 1)
    example = model_for(spec, 1, r_form=RForm.EXAMPLE)
    lead_r = [t for t in leading.terms() if t.source == "R"]
    ex_r = [t for t in example.terms() if t.source == "R"]
    assert lead_r and ex_r
    assert [t.z_power for t in lead_r] == [t.z_power + 2 for t in ex_r]
    assert leading.order_flags[0]["used"] == RForm.LEADING


def test_series_without_perturbation_is_the_separatrix(precision, pendulum_spec):
    model = model_for(pendulum_spec, 0)
    grid = Collocation(8)
    series = AsymptoticSeries(model, grid, 10)
    z = mp.mpc(-20, -5)
    W, error, _ = series.seed(z)
    assert error == 0
    assert max(abs(w - 1 / z ** 2) for w in W) < mp.mpf(10) ** -25


def test_first_series_coefficient_balances_the_forcing(precision, pendulum_spec):
    mu = mp.mpf("0.001")
    model = model_for(pendulum_spec, mu)
    grid = Collocation(8)
    series = AsymptoticSeries(model, grid, 6)
    # d_tau phi_2 = -mu a(tau) with a = -sin(tau)/2
    for j, t in enumerate(grid.taus):
        assert abs(series.phi[2][j] + mu * mp.cos(t) / 2) < mp.mpf(10) ** -25


def test_no_difference_without_perturbation(precision):
    diff = compute_difference(None, None, 0, C_plus=mp.mpc(0, -2))
    assert diff.chi[-1] == 0 and diff.b == 0 and diff.f == 0
    assert diff.C_plus == mp.mpc(0, -2)
    assert diff.to_dict()["contaminated"] is False


def test_domain_defaults():
    domain = InnerDomain()
    assert domain.resolved_extent() == 60
    with mp.workdps(20):
        points = domain.observation_points()
    assert len(points) == 41 and mp.im(points[0]) == -25
    assert mp.re(points[0]) == -25 and mp.re(points[-1]) == 25
    assert domain.to_dict()["window"] == ["-25", "25"]


@pytest.mark.slow
def test_small_mu_matches_first_order(precision, pendulum_spec):
    mu = mp.mpf("0.001")
    model = model_for(pendulum_spec, mu)
    domain = InnerDomain(height=10, harmonics=16, order=40, window=(-5, 5), points=11)
    u_sol, s_sol = solve_inner_manifolds(model, domain)
    diff = compute_difference(u_sol, s_sol, mu, C_plus=mp.mpc(0, -2))
    first = first_order_stokes_constant(model)
    assert abs(abs(diff.chi[-1]) - abs(first)) < abs(first) * mp.mpf("0.05")
    assert diff.domain["points"] == 11


def test_difference_needs_the_pole_constant(precision):
    with pytest.raises(TypeError):
        compute_difference(None, None, 0)


@pytest.mark.parametrize("height", [10, 25])
def test_first_harmonic_fit_recovers_the_log_coefficient(height):
    with mp.workdps(40):
        b = mp.mpc(0, "-0.4")
        zs = InnerDomain(height=height).observation_points()
        tail = [(-1) ** k * mp.mpf(k) / 3 for k in range(1, 7)]
        logs = [mp.log(mp.mpf("0.7")) + 1j * b * mp.log(z)
                + mp.fsum(c * z ** -k for k, c in enumerate(tail, 1)) for z in zs]
        coef, misfit = inner_solver._fit_first_harmonic(zs, logs, 8)
        assert abs(coef[1] / 1j - b) < mp.mpf(10) ** -12
        assert abs(mp.exp(coef[0]) - mp.mpf("0.7")) < mp.mpf(10) ** -12
        assert misfit < mp.mpf(10) ** -15
        with pytest.raises(FitError):
            inner_solver._fit_first_harmonic(zs[:9], logs[:9], 8)


@pytest.mark.slow
def test_inner_b_matches_the_cubic_twist(pendulum_eta_spec):
    with mp.workdps(40):
        model = model_for(pendulum_eta_spec, mp.mpf(1))
        u_sol, s_sol = solve_inner_manifolds(model, InnerDomain())
        diff = compute_difference(u_sol, s_sol, mp.mpf(1), C_plus=mp.mpc(0, -2))
        assert abs(diff.b - model.b_closed) < mp.mpf(10) ** -4
        assert abs(diff.b + mp.mpc(0, "0.4")) < mp.mpf(10) ** -4


@pytest.mark.slow
def test_stokes_constant_tends_to_first_order_linearly(precision, pendulum_spec):
    C_plus = mp.mpc(0, -2)
    domain = InnerDomain(height=15, harmonics=16, order=40, window=(-15, 15), points=31)
    gaps = []
    mus = [mp.mpf("0.005"), mp.mpf("0.01"), mp.mpf("0.02")]
    for mu in mus:
        model = model_for(pendulum_spec, mu)
        f0 = C_plus ** 2 * first_order_stokes_constant(model)
        u_sol, s_sol = solve_inner_manifolds(model, domain)
        diff = compute_difference(u_sol, s_sol, mu, C_plus=C_plus)
        gaps.append(abs(diff.f - f0))
    assert abs(f0 + 2 * mp.pi * 1j) < mp.mpf(10) ** -20
    slopes = [mp.log(gaps[i + 1] / gaps[i]) / mp.log(2) for i in range(2)]
    assert all(abs(s - 1) < mp.mpf("0.2") for s in slopes)
