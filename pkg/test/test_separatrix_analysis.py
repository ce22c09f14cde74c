from fractions import Fraction

import pytest
from mpmath import mp

from splitting.errors import HypothesisError
from splitting.fourier import ExactComplex
from splitting.model_core import (HamiltonianSpec, ResonanceContext, Topology, load_hamiltonian,
                                  rescale_at_resonance)
from splitting.separatrix_analysis import (action_T0, compute_separatrix, find_critical_points,
                                           heteroclinic_partners, level_set, locate_singularity,
                                           minima_of)

from conftest import PENDULUM_TERMS, config_path


def potential(spec):
    return rescale_at_resonance(spec, ResonanceContext.from_epsilon(spec, 0, 1, 1)).potential()


def circle_distance(a, b):
    d = abs(a - b) % (2 * mp.pi)
    return min(d, 2 * mp.pi - d)


@pytest.fixture
def pendulum_saddle(precision, pendulum_spec):
    points = find_critical_points(potential(pendulum_spec))
    assert len(points) == 1
    return points[0]


def test_pendulum_critical_points(pendulum_saddle, pendulum_spec):
    cp = pendulum_saddle
    assert circle_distance(cp.x_star, 0) < mp.mpf(10) ** -20
    assert abs(cp.lam - 1) < mp.mpf(10) ** -20
    assert abs(cp.energy) < mp.mpf(10) ** -20
    assert cp.topology == Topology.GRAPH
    minima = minima_of(potential(pendulum_spec))
    assert len(minima) == 1 and circle_distance(minima[0], mp.pi) < mp.mpf(10) ** -20
    assert heteroclinic_partners(cp) == []
    assert level_set(cp) == []


def test_pendulum_separatrix_closed_form(pendulum_saddle):
    sep = compute_separatrix(pendulum_saddle)
    for u in (mp.mpf(-3), mp.mpf(0), mp.mpf("0.7"), mp.mpf("2.5")):
        x, y = sep.evaluate(u)
        assert abs((x - pendulum_saddle.x_star) - 4 * mp.atan(mp.exp(u))) < mp.mpf(10) ** -15
        assert abs(y - 2 / mp.cosh(u)) < mp.mpf(10) ** -15
    assert sep.energy_error() < mp.mpf(10) ** -20
    # the apex coordinate changes sign at u = 0
    assert sep.apex_coordinate(*sep.evaluate(mp.mpf(-1))) < 0 < sep.apex_coordinate(*sep.evaluate(mp.mpf(1)))


def test_separatrix_closed_form_at_40_digits(precision40, pendulum_spec):
    cp = find_critical_points(potential(pendulum_spec))[0]
    sep = compute_separatrix(cp)
    for u in (mp.mpf(-3), mp.mpf("-1.3"), mp.mpf(0), mp.mpf("0.7"), mp.mpf("2.5"), mp.mpf(3)):
        x, y = sep.evaluate(u)
        assert abs((x - cp.x_star) - 4 * mp.atan(mp.exp(u))) < mp.mpf(10) ** -30
        assert abs(y - 2 / mp.cosh(u)) < mp.mpf(10) ** -30
    assert sep.energy_error() < mp.mpf(10) ** -30


def test_separatrix_tails_and_shift(pendulum_saddle):
    sep = compute_separatrix(pendulum_saddle)
    far = sep.span + 5
    x, y = sep.evaluate(far)
    assert abs(y - 2 / mp.cosh(far)) < mp.mpf(10) ** -15
    shifted = sep.shifted(mp.mpf("0.5"))
    assert abs(shifted.p0(mp.mpf(1)) - sep.p0(mp.mpf("1.5"))) < mp.mpf(10) ** -20


def test_action_of_the_separatrix(pendulum_saddle):
    sep = compute_separatrix(pendulum_saddle)
    # integral of 4/cosh^2
    assert abs(action_T0(sep, mp.inf) - 8) < mp.mpf(10) ** -15
    assert abs(action_T0(sep, mp.mpf(0)) - 4) < mp.mpf(10) ** -15
    assert abs(action_T0(sep, mp.mpf(1)) - 4 * (1 + mp.tanh(1))) < mp.mpf(10) ** -15


def test_complex_evaluation(pendulum_saddle):
    sep = compute_separatrix(pendulum_saddle)
    u = mp.mpc("0.4", "0.6")
    assert abs(sep.p0(u) - 2 / mp.cosh(u)) < mp.mpf(10) ** -15


def test_heteroclinic_level_is_refused(precision):
    spec, _ = load_hamiltonian(config_path("two_maxima.toml"))
    points = find_critical_points(potential(spec))
    assert len(points) == 2
    with pytest.raises(HypothesisError):
        compute_separatrix(points[0])


@pytest.mark.slow
def test_pendulum_singularity(precision40, pendulum_spec):
    cp = find_critical_points(potential(pendulum_spec))[0]
    sing = locate_singularity(compute_separatrix(cp))
    assert abs(sing.a - mp.pi / 2) < mp.mpf(10) ** -20
    assert abs(sing.C_plus + 2j) < mp.mpf(10) ** -10
    assert sing.M == 1 and sing.sign == -1
    # growth constant E = -C+^2 for cos x
    assert abs(sing.growth_constant + sing.C_plus ** 2) < mp.mpf(10) ** -8
    assert abs(sing.C1_hat - 2) < mp.mpf(10) ** -8
    assert len(sing.to_dict()["scan_log"]) >= 1


def double_well():
    """V = cos x + 0.3 cos 2x with the pendulum forcing."""
    V = [(1, 0, 0, ExactComplex.of("1/2")), (-1, 0, 0, ExactComplex.of("1/2")),
         (2, 0, 0, ExactComplex.of("3/20")), (-2, 0, 0, ExactComplex.of("3/20"))]
    forcing = [(k, 0, j, c) for k, j, c in PENDULUM_TERMS if j != 0]
    return HamiltonianSpec.build([(2, Fraction(1, 2))], V + forcing)


def bracketed_roots(f, n=400, width=mp.mpf(10) ** -35):
    """Sign changes of f on a grid over one period, each bisected down to ``width``."""
    xs = [2 * mp.pi * (i + mp.mpf(1) / 3) / n for i in range(n + 1)]
    roots = []
    for a, b in zip(xs[:-1], xs[1:]):
        if f(a) * f(b) > 0:
            continue
        while b - a > width:
            m = (a + b) / 2
            if f(a) * f(m) <= 0:
                b = m
            else:
                a = m
        roots.append((a + b) / 2)
    return roots


def test_double_well_maxima_match_bisection(precision40):
    dV = lambda x: -mp.sin(x) - mp.mpf("0.6") * mp.sin(2 * x)
    d2V = lambda x: -mp.cos(x) - mp.mpf("1.2") * mp.cos(2 * x)
    maxima = [x for x in bracketed_roots(dV) if d2V(x) < 0]
    points = find_critical_points(potential(double_well()))
    assert len(points) == len(maxima) == 2
    for cp in points:
        match = min(maxima, key=lambda x: circle_distance(x, cp.x_star))
        assert circle_distance(match, cp.x_star) < mp.mpf(10) ** -30
        assert abs(cp.lam - mp.sqrt(-d2V(match))) < mp.mpf(10) ** -30
    graph, eight = sorted(points, key=lambda cp: -cp.energy)
    assert graph.topology == Topology.GRAPH and circle_distance(graph.x_star, 0) < mp.mpf(10) ** -30
    assert eight.topology == Topology.FIGURE_EIGHT and abs(eight.x_star - mp.pi) < mp.mpf(10) ** -30


@pytest.mark.slow
def test_figure_eight_separatrix(precision):
    points = find_critical_points(potential(double_well()))
    cp = next(p for p in points if p.topology == Topology.FIGURE_EIGHT)
    sep = compute_separatrix(cp)
    assert sep.end_points == (cp.x_star, cp.x_star)
    x0, y0 = sep.evaluate(mp.mpf(0))
    # u = 0 is the turning point of the loop
    assert abs(y0) < mp.mpf(10) ** -20 and abs(cp.V(x0) - cp.energy) < mp.mpf(10) ** -20
    for u in (mp.mpf("0.5"), mp.mpf(2)):
        xa, ya = sep.evaluate(u)
        xb, yb = sep.evaluate(-u)
        assert abs(xa - xb) < mp.mpf(10) ** -20 and abs(ya + yb) < mp.mpf(10) ** -20
    assert sep.energy_error() < mp.mpf(10) ** -20
    x_far, _ = sep.evaluate(sep.span + 3)
    assert abs(x_far - cp.x_star) < mp.mpf(10) ** -10
    assert action_T0(sep, mp.inf) > 0


@pytest.mark.slow
def test_double_well_has_a_pair_of_poles(precision40):
    # with t = tan(q/2): du = 2 dt / (sqrt(0.8) t sqrt(11 + 5 t^2)); poles at t = +-i
    cp = next(p for p in find_critical_points(potential(double_well())) if p.topology == Topology.GRAPH)
    sing = locate_singularity(compute_separatrix(cp))
    scale = 2 / mp.sqrt(mp.mpf("8.8"))
    assert abs(sing.a - mp.pi / mp.sqrt(mp.mpf("8.8"))) < mp.mpf(10) ** -12
    assert sing.M == 2 and abs(abs(sing.C_plus) - 1) < mp.mpf(10) ** -8
    lowest = min(mp.im(z) for z in sing.scan_log_distinct)
    pair = sorted((z for z in sing.scan_log_distinct if mp.im(z) - lowest < mp.mpf(10) ** -8),
                  key=lambda z: mp.re(z))
    assert len(pair) == 2
    gap = scale * mp.log((mp.sqrt(11) + mp.sqrt(6)) / (mp.sqrt(11) - mp.sqrt(6)))
    assert abs(mp.re(pair[1] - pair[0]) - gap) < mp.mpf(10) ** -8
