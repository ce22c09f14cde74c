from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp

from splitting.errors import SpecError
from splitting.fourier import ExactComplex, TrigPolynomial, exact, poisson_bracket, to_mpf


def test_exact_keeps_what_the_user_wrote():
    assert exact(0.1) == Fraction(1, 10)
    assert exact("1/3") == Fraction(1, 3)
    assert exact(" 2 ") == Fraction(2)
    assert exact(7) == Fraction(7)


@pytest.mark.parametrize("bad", [True, float("nan"), float("inf"), "one third", None])
def test_exact_rejects(bad):
    with pytest.raises(SpecError):
        exact(bad)


def test_exact_complex_arithmetic():
    a = ExactComplex.of("1/2", "-1/4")
    b = ExactComplex.of(2, 1)
    assert a * b == ExactComplex(Fraction(5, 4), Fraction(0))
    assert a + a.conjugate() == ExactComplex(Fraction(1), Fraction(0))
    assert (a / 2).to_pair() == ["1/4", "-1/8"]
    assert ExactComplex().is_zero()


def test_to_mpf_uses_current_precision(precision):
    assert abs(to_mpf(Fraction(1, 3)) - mp.mpf(1) / 3) < mp.mpf(10) ** -29


def test_pendulum_hamiltonian_values(precision):
    # y^2/2 + cos x
    H = TrigPolynomial({(0, 2, 0): mp.mpf(1) / 2, (1, 0, 0): mp.mpf(1) / 2, (-1, 0, 0): mp.mpf(1) / 2})
    assert abs(H.evaluate_real(mp.pi, 2) - 1) < mp.mpf(10) ** -25
    assert H.x_degree() == 1 and H.y_degree() == 2
    assert abs(H.diff_x().evaluate_real(mp.pi / 2, 0) + 1) < mp.mpf(10) ** -25


def test_bracket_with_itself_vanishes(precision):
    H = TrigPolynomial({(0, 2, 0): mp.mpf(1) / 2, (1, 0, 1): mp.mpc(0, 1), (-1, 0, -1): mp.mpc(0, -1)})
    assert len(poisson_bracket(H, H)) == 0


def test_tau_component():
    H = TrigPolynomial({(1, 0, 1): 2, (1, 0, -1): 3, (0, 2, 0): 1})
    assert H.tau_harmonics() == [-1, 0, 1]
    assert H.tau_component(1).monomials() == [(mp.mpf(2), 1, 0, 1)]


@settings(max_examples=40, deadline=None)
@given(st.integers(-3, 3), st.integers(0, 3), st.integers(-2, 2),
       st.floats(-3, 3), st.floats(-2, 2), st.floats(0, 6))
def test_derivatives_match_finite_differences(k, p, q, x, y, tau):
    with mp.workdps(30):
        f = TrigPolynomial({(k, p, q): mp.mpc("0.7", "-0.3")})
        x, y, tau = mp.mpf(x), mp.mpf(y), mp.mpf(tau)
        fx = mp.diff(lambda s: f.evaluate(s, y, tau), x)
        fy = mp.diff(lambda s: f.evaluate(x, s, tau), y)
        ft = mp.diff(lambda s: f.evaluate(x, y, s), tau)
        assert abs(f.diff_x().evaluate(x, y, tau) - fx) < mp.mpf(10) ** -15
        assert abs(f.diff_y().evaluate(x, y, tau) - fy) < mp.mpf(10) ** -15
        assert abs(f.diff_tau().evaluate(x, y, tau) - ft) < mp.mpf(10) ** -15
