import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp

from splitting.errors import ConfigError, SpecError
from splitting.fourier import ExactComplex
from splitting.model_core import (HamiltonianSpec, ResonanceContext, Status, Topology,
                                  check_hypotheses, hamiltonian_from_dict, load_hamiltonian,
                                  read_config, rescale_at_resonance, translate_to_resonance,
                                  vector_field)

from conftest import config_path, pendulum


def test_pendulum_rescaling(precision, pendulum_spec):
    ctx = ResonanceContext.from_epsilon(pendulum_spec, 0, 1, mp.mpf("0.2"))
    system = rescale_at_resonance(pendulum_spec, ctx)
    assert system.V_fourier == {1: ExactComplex.of("1/2"), -1: ExactComplex.of("1/2"),
                                0: ExactComplex.of(-1)}
    assert system.F_coeffs[1] == {1: ExactComplex.of(0, "-1/4"), -1: ExactComplex.of(0, "1/4")}
    assert system.G_taylor == {} and system.R_coeffs == {}
    assert system.M == 1


def test_pendulum_with_eta_and_alpha(precision):
    spec = pendulum(eta=Fraction(1, 10), alpha=Fraction(1, 5))
    system = rescale_at_resonance(spec, ResonanceContext.from_epsilon(spec, 0, 1, mp.mpf("0.3")))
    assert system.G_taylor == {3: Fraction(1, 10)}
    assert system.g3 == Fraction(1, 10)
    # R = alpha I (1 + sin tau)(cos x - 1), I = eps y
    assert system.R_coeffs[(1, 1)][0] == ExactComplex.of("1/10")
    assert system.R_coeffs[(0, 1)][0] == ExactComplex.of("-1/5")


def test_zero_perturbation():
    spec = HamiltonianSpec.build([(2, "1/2"), (3, 1)], [])
    with mp.workdps(20):
        system = rescale_at_resonance(spec, ResonanceContext.from_epsilon(spec, 0, 1, 1))
    assert system.V_fourier == {} and system.F_coeffs == {} and system.R_coeffs == {}
    assert system.G_taylor == {3: Fraction(1)}


def test_forcing_has_zero_average(pendulum_spec):
    with mp.workdps(20):
        system = rescale_at_resonance(pendulum_spec, ResonanceContext.from_epsilon(pendulum_spec, 0, 1, 1))
    assert all(0 not in harmonics for harmonics in system.F_coeffs.values())


def random_terms():
    coef = st.fractions(min_value=-2, max_value=2, max_denominator=8)
    term = st.tuples(st.integers(-2, 2), st.integers(0, 2), st.integers(-2, 2), coef, coef)
    return st.lists(term, min_size=1, max_size=5)


@settings(max_examples=25, deadline=None)
@given(random_terms(), st.fractions(min_value=-1, max_value=1, max_denominator=6),
       st.floats(-3, 3), st.floats(-2, 2), st.floats(0, 6))
def test_rescaled_hamiltonian_matches_original(terms, h03, x, y, tau):
    """H(x~, y, tau) = h(x~ + n tau, eps y/(m h02), m tau)/delta at the 1/2 resonance."""
    n, m = 1, 2
    h1 = []
    for k, l, j, re, im in terms:
        c = ExactComplex(re, im)
        h1 += [(k, l, j, c), (-k, l, -j, c.conjugate())]
    spec = HamiltonianSpec.build([(2, "3/4"), (3, h03)], h1)
    with mp.workdps(30):
        eps = mp.mpf("0.3")
        ctx = ResonanceContext.from_epsilon(spec, n, m, eps)
        system = rescale_at_resonance(spec, ctx)
        x, y, tau = mp.mpf(x), mp.mpf(y), mp.mpf(tau)
        h02 = mp.mpf(3) / 2
        original = spec.evaluate(x + n * tau, eps * y / (m * h02), m * tau, ctx.delta) / ctx.delta
        rescaled = system.evaluate(x, y, tau, eps)
        assert abs(original - rescaled) < mp.mpf(10) ** -20
        # reality of V, F, G, R on real arguments
        assert abs(mp.im(rescaled)) < mp.mpf(10) ** -20


def test_resonance_context_rejects_bad_input(pendulum_spec):
    with pytest.raises(SpecError):
        ResonanceContext(2, 4, 1, 1)
    with pytest.raises(SpecError):
        ResonanceContext(0, 0, 1, 1)
    with pytest.raises(SpecError):
        ResonanceContext.from_delta(HamiltonianSpec.build([(2, "-1/2")], []), 0, 1, 1)


def test_epsilon_and_delta_agree(precision, pendulum_spec):
    ctx = ResonanceContext.from_delta(pendulum_spec, 0, 1, mp.mpf("0.04"))
    assert abs(ctx.epsilon - mp.mpf("0.2")) < mp.mpf(10) ** -25
    assert ctx.consistent_with(pendulum_spec)


def test_negative_h02_cannot_be_rescaled():
    spec = HamiltonianSpec.build([(2, "-1/2")], pendulum().h1_terms)
    with pytest.raises(SpecError):
        rescale_at_resonance(spec, ResonanceContext(0, 1, 1, 1))


def test_reality_is_enforced():
    with pytest.raises(SpecError, match="reality"):
        HamiltonianSpec.build([(2, "1/2")], [(1, 0, 0, ExactComplex.of(1, 1))])


def test_vector_field_at_critical_points(precision, pendulum_spec):
    eps = mp.mpf("0.2")
    system = rescale_at_resonance(pendulum_spec, ResonanceContext.from_epsilon(pendulum_spec, 0, 1, eps))
    dx, dy = vector_field(system, (mp.pi, mp.mpf(0)), mp.mpf(0), eps, mu=0)
    assert abs(dx) < mp.mpf(10) ** -25 and abs(dy) < mp.mpf(10) ** -25
    dx, dy = vector_field(system, (mp.pi, mp.mpf(2)), mp.mpf(0), eps, mu=0)
    assert abs(dx - 2 * eps) < mp.mpf(10) ** -25 and abs(dy) < mp.mpf(10) ** -25


def test_vector_field_is_hamiltonian(precision):
    spec = pendulum(eta=Fraction(1, 10), alpha=Fraction(1, 5))
    eps, mu = mp.mpf("0.2"), mp.mpf(1)
    system = rescale_at_resonance(spec, ResonanceContext.from_epsilon(spec, 0, 1, eps))
    x, y, tau = mp.mpf(1), mp.mpf("0.5"), mp.mpf("0.3")
    H = lambda a, b: mp.re(system.evaluate(a, b, tau, eps, mu))
    dx, dy = vector_field(system, (x, y), tau, eps, mu)
    assert abs(dx - eps * mp.diff(lambda b: H(x, b), y)) < mp.mpf(10) ** -20
    assert abs(dy + eps * mp.diff(lambda a: H(a, y), x)) < mp.mpf(10) ** -20


def test_vector_field_needs_positive_eps(pendulum_spec):
    with mp.workdps(20):
        system = rescale_at_resonance(pendulum_spec, ResonanceContext.from_epsilon(pendulum_spec, 0, 1, 1))
        with pytest.raises(SpecError):
            vector_field(system, (0, 0), 0, 0)


def test_pendulum_hypotheses_without_scan(precision, pendulum_spec):
    report = check_hypotheses(pendulum_spec, ResonanceContext(0, 1, 1, 1), scan=False)
    assert report.passed
    assert abs(report.lam - 1) < mp.mpf(10) ** -20
    assert report.topology == Topology.GRAPH
    assert report.statuses["HP6"].status == Status.SKIPPED
    assert json.loads(json.dumps(report.to_dict()))["passed"] is True


def test_negative_h02_fails_hp1(precision):
    spec = HamiltonianSpec.build([(2, "-1/2")], pendulum().h1_terms)
    report = check_hypotheses(spec, ResonanceContext(0, 1, 1, 1), scan=False)
    assert report.statuses["HP1"].status == Status.FAIL
    assert "sign convention" in report.statuses["HP1"].message
    assert not report.passed


def test_equal_maxima_are_heteroclinic(precision):
    spec, _ = load_hamiltonian(config_path("two_maxima.toml"))
    report = check_hypotheses(spec, ResonanceContext(0, 1, 1, 1))
    assert len(report.saddles) == 2
    assert all(s["HP5"] == Status.FAIL for s in report.saddles)
    assert report.statuses["HP5"].status == Status.FAIL
    assert report.statuses["HP6"].status == Status.SKIPPED


@pytest.mark.slow
def test_pendulum_hypotheses_with_scan(precision, pendulum_spec):
    report = check_hypotheses(pendulum_spec, ResonanceContext(0, 1, 1, 1))
    assert report.passed
    assert report.statuses["HP6"].status == Status.HEURISTIC_PASS
    assert report.singularity_count == 1


def test_toml_and_json_configs_agree():
    spec_toml, res_toml = load_hamiltonian(config_path("pendulum.toml"))
    spec_json, res_json = load_hamiltonian(config_path("pendulum.json"))
    assert spec_toml == spec_json == pendulum()
    assert res_toml == res_json == (0, 1)


@pytest.mark.parametrize("name", ["pendulum.toml", "pendulum_eta.toml", "generic.toml",
                                  "two_maxima.toml", "negative_h02.toml"])
def test_shipped_toml_configs_load(name):
    spec, resonance = load_hamiltonian(config_path(name))
    assert resonance == (0, 1)
    assert abs(spec.h0_2) == Fraction(1, 2)


def test_h0_rows_as_tables_or_pairs(tmp_path):
    path = tmp_path / "eta.toml"
    path.write_text(
        "[resonance]\nn = 0\nm = 1\n"
        "[h0]\ntaylor = [{ power = 2, coef = \"1/2\" }, { power = 3, coef = \"1/10\" }]\n"
        "[h1]\nterms = [{ k = 1, l = 0, j = 0, re = 0.5 }, { k = -1, l = 0, j = 0, re = 0.5 }]\n")
    spec, _ = load_hamiltonian(str(path))
    assert dict(spec.h0_taylor) == {2: Fraction(1, 2), 3: Fraction(1, 10)}
    assert load_hamiltonian(config_path("pendulum_eta.toml"))[0] == pendulum(eta=Fraction(1, 10))
    data = pendulum().to_dict()
    data["resonance"] = {"n": 0, "m": 1}
    data["h0.taylor"] = [{"power": 2, "coef": "1/2"}]
    assert hamiltonian_from_dict(data)[0] == pendulum()
    for bad in ([[2]], [{"coef": "1/2"}], ["1/2"]):
        data["h0.taylor"] = bad
        with pytest.raises(ConfigError):
            hamiltonian_from_dict(data)


def test_read_config_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_config(str(tmp_path / "missing.toml"))
    empty = tmp_path / "empty.json"
    empty.write_text("  \n")
    with pytest.raises(ConfigError, match="empty"):
        read_config(str(empty))
    broken = tmp_path / "broken.toml"
    broken.write_text("resonance = [1,\n")
    with pytest.raises(ConfigError):
        read_config(str(broken))


def test_frequency_entry_must_match_resonance():
    data = pendulum().to_dict()
    data["resonance"] = {"n": 1, "m": 2}
    data["h0.taylor"] = [[1, "1/2"]] + data["h0.taylor"]
    spec, resonance = hamiltonian_from_dict(data)
    assert resonance == (1, 2) and spec == pendulum()
    data["h0.taylor"][0] = [1, "1/3"]
    with pytest.raises(SpecError):
        hamiltonian_from_dict(data)


def test_missing_key_is_a_config_error():
    with pytest.raises(ConfigError, match="h1.terms"):
        hamiltonian_from_dict({"resonance": {"n": 0, "m": 1}, "h0": {"taylor": [[2, 1]]}})


@settings(max_examples=30, deadline=None)
@given(random_terms())
def test_config_round_trip(terms):
    h1 = []
    for k, l, j, re, im in terms:
        c = ExactComplex(re, im)
        h1 += [(k, l, j, c), (-k, l, -j, c.conjugate())]
    spec = HamiltonianSpec.build([(2, "1/2"), (4, "-1/7")], h1, r="3/2")
    data = json.loads(json.dumps(spec.to_dict()))
    assert data["h0.taylor"][0] == {"power": 2, "coef": "1/2"}
    data["resonance"] = {"n": 0, "m": 1}
    assert hamiltonian_from_dict(data) == (spec, (0, 1))


def test_translate_to_resonance():
    spec, frequency = translate_to_resonance([(2, "1/2"), (3, "1/6")], [], 1)
    # h0 = I^2/2 + I^3/6 around I* = 1: frequency 3/2, h0_2 = 1/2 + 1/2
    assert frequency == Fraction(3, 2)
    assert dict(spec.h0_taylor) == {2: Fraction(1), 3: Fraction(1, 6)}
    with pytest.raises(SpecError):
        translate_to_resonance([(2, 1)], [], 1, truncated=True)
