import pytest
from mpmath import mp

from splitting.errors import ConvergenceError
from splitting.fourier import TrigPolynomial
from splitting.taylor import (FlowJet, TaylorIntegrator, default_order, horner, horner_derivative,
                              step_size)


def free_particle():
    return TrigPolynomial({(0, 2, 0): mp.mpf(1) / 2})


def pendulum_h0():
    return TrigPolynomial({(0, 2, 0): mp.mpf(1) / 2, (1, 0, 0): mp.mpf(1) / 2,
                           (-1, 0, 0): mp.mpf(1) / 2})


def test_horner():
    coeffs = [1, 2, 3]
    assert horner(coeffs, 2) == 17
    assert horner_derivative(coeffs, 2) == 14


def test_step_size_from_last_coefficients(precision):
    norms = [mp.mpf(1)] * 10
    assert step_size(norms, mp.mpf(10) ** -16) < 1
    assert step_size([0, 0], mp.mpf(10) ** -16) is None


def test_default_order_grows_with_accuracy():
    assert default_order(mp.mpf(10) ** -100) > default_order(mp.mpf(10) ** -20)


def test_free_particle_is_exact(precision):
    flow = TaylorIntegrator(free_particle(), action=True, tangents=True)
    result = flow.propagate(mp.mpf(0), (mp.mpf(1), mp.mpf(3)), mp.mpf(2),
                            tangent_vectors=((mp.mpf(0), mp.mpf(1)),))
    x, y = result.state
    assert abs(x - 7) < mp.mpf(10) ** -25
    assert abs(y - 3) < mp.mpf(10) ** -25
    # action of y dx - H dt is y^2/2 per unit time
    assert abs(result.action - 9) < mp.mpf(10) ** -25
    (u, w), = result.tangents
    assert abs(u - 2) < mp.mpf(10) ** -25 and abs(w - 1) < mp.mpf(10) ** -25


def test_complex_time(precision):
    flow = TaylorIntegrator(free_particle())
    result = flow.propagate(mp.mpf(0), (mp.mpf(1), mp.mpf(3)), mp.mpc(0, 2))
    assert abs(result.state[0] - mp.mpc(1, 6)) < mp.mpf(10) ** -25


def test_pendulum_energy_is_conserved(precision):
    H = pendulum_h0()
    flow = TaylorIntegrator(H)
    start = (mp.mpf("0.3"), mp.mpf("1.1"))
    result = flow.propagate(mp.mpf(0), start, mp.mpf(5), dense=True)
    drift = abs(H.evaluate_real(*result.state) - H.evaluate_real(*start))
    assert drift < mp.mpf(10) ** -24
    # dense output reproduces the endpoint
    last = result.segments[-1]
    assert abs(last.state(mp.mpf(5))[0] - result.state[0]) < mp.mpf(10) ** -24


def test_backward_integration_returns(precision):
    flow = TaylorIntegrator(pendulum_h0())
    start = (mp.mpf("0.3"), mp.mpf("1.1"))
    there = flow.propagate(mp.mpf(0), start, mp.mpf(3)).state
    back = flow.propagate(mp.mpf(3), there, mp.mpf(0)).state
    assert max(abs(back[0] - start[0]), abs(back[1] - start[1])) < mp.mpf(10) ** -22


def test_step_limit(precision):
    flow = TaylorIntegrator(pendulum_h0(), max_steps=2)
    with pytest.raises(ConvergenceError):
        flow.propagate(mp.mpf(0), (mp.mpf("0.3"), mp.mpf("1.1")), mp.mpf(50))


def test_time_dependent_flow(precision):
    # H = y^2/2 + y cos(t): x' = y + cos t, y' = 0
    forced = free_particle() + TrigPolynomial({(0, 1, 1): mp.mpf(1) / 2, (0, 1, -1): mp.mpf(1) / 2})
    assert FlowJet(free_particle()).autonomous
    assert not FlowJet(forced).autonomous
    result = TaylorIntegrator(forced).propagate(mp.mpf(0), (mp.mpf(1), mp.mpf(3)), mp.mpf(2))
    assert abs(result.state[0] - (7 + mp.sin(2))) < mp.mpf(10) ** -25
    assert abs(result.state[1] - 3) < mp.mpf(10) ** -25
