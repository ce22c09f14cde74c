"""
model_core.py – Hamiltonian family, resonance rescaling and hypothesis checks

Provides:
- HamiltonianSpec: exact Fourier–Taylor data of h0(I) + delta*h1(x, I, t)
- ResonanceContext: resonance n/m with the size parameters delta, eps, mu
- RescaledSystem: V, F, G, R of the normal form near the resonance
- rescale_at_resonance(), vector_field(), check_hypotheses()
- translate_to_resonance(): re-expand h0, h1 around a resonant action I*
- read_config(), load_hamiltonian(): JSON / TOML configuration files
"""
import json
import logging
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import toml
from mpmath import mp

from .errors import ConfigError, SpecError
from .fourier import ExactComplex, TrigPolynomial, exact, to_mpf

logger = logging.getLogger(__name__)


class Status:
    PASS, FAIL, HEURISTIC_PASS, HEURISTIC_FAIL, SKIPPED = (
        "pass", "fail", "heuristic-pass", "heuristic-fail", "skipped")


class Topology:
    GRAPH, FIGURE_EIGHT = "graph", "figure-eight"


# ---------- Hamiltonian data ----------
@dataclass(frozen=True)
class HamiltonianSpec:
    """
    h(x, I, t) = sum_l h0_l I^l + delta * sum c[k,l,j] e^{ikx} I^l e^{ijt}.

    ``h0_taylor`` holds degrees >= 2 only; the frequency at the resonance
    is implied by the resonance itself. ``M`` is derived from ``h1_terms``.
    """
    h0_taylor: tuple
    h1_terms: tuple
    r: Fraction = Fraction(1)
    M: int = field(init=False)

    def __post_init__(self):
        degrees = [d for d, _ in self.h0_taylor]
        if len(set(degrees)) != len(degrees):
            raise SpecError("repeated degree in h0 Taylor data")
        for degree, coef in self.h0_taylor:
            if not isinstance(degree, int) or degree < 2:
                raise SpecError(f"h0 Taylor degree must be an integer >= 2, got {degree!r}")
            if not isinstance(coef, Fraction):
                raise SpecError("h0 coefficients must be exact (use HamiltonianSpec.build)")
        if self.r <= 0:
            raise SpecError(f"action radius r must be positive, got {self.r}")
        table = {}
        for k, l, j, c in self.h1_terms:
            if l < 0:
                raise SpecError(f"negative power of I in term {(k, l, j)}")
            table[(k, l, j)] = c
        for (k, l, j), c in table.items():
            partner = table.get((-k, l, -j), ExactComplex())
            if partner != c.conjugate():
                raise SpecError(
                    f"reality violated: c[{-k},{l},{-j}] must be conj(c[{k},{l},{j}])",
                    {"term": (k, l, j), "coefficient": c.to_pair()})
        object.__setattr__(self, "M", max((abs(k) for k, _, _, _ in self.h1_terms), default=0))

    @classmethod
    def build(cls, h0_taylor, h1_terms, r=1) -> "HamiltonianSpec":
        """Convert numbers to exact form, merge duplicate keys and drop zeros."""
        h0 = {}
        for degree, coef in h0_taylor:
            h0[int(degree)] = h0.get(int(degree), Fraction(0)) + exact(coef)
        terms = {}
        for k, l, j, c in h1_terms:
            key = (int(k), int(l), int(j))
            terms[key] = terms.get(key, ExactComplex()) + ExactComplex.coerce(c)
        return cls(
            h0_taylor=tuple(sorted((d, c) for d, c in h0.items() if c != 0)),
            h1_terms=tuple(sorted(key + (c,) for key, c in terms.items() if not c.is_zero())),
            r=exact(r),
        )

    @property
    def h0_2(self) -> Fraction:
        return dict(self.h0_taylor).get(2, Fraction(0))

    @property
    def h02(self) -> Fraction:
        """Second derivative of h0 at the resonance."""
        return 2 * self.h0_2

    def h0(self, action):
        return mp.fsum(to_mpf(c) * action ** d for d, c in self.h0_taylor)

    def h1(self, x, action, t):
        total = mp.mpc(0)
        for k, l, j, c in self.h1_terms:
            total += c.to_mpc() * mp.expj(k * x + j * t) * action ** l
        return total

    def evaluate(self, x, action, t, delta):
        return self.h0(action) + delta * self.h1(x, action, t)

    def to_dict(self) -> dict:
        return {
            "h0.taylor": [{"power": d, "coef": str(c)} for d, c in self.h0_taylor],
            "h1.terms": [{"k": k, "l": l, "j": j, "re": str(c.re), "im": str(c.im)}
                         for k, l, j, c in self.h1_terms],
            "r": str(self.r),
        }


@dataclass(frozen=True)
class ResonanceContext:
    n: int
    m: int
    delta: object
    epsilon: object
    mu: object = 1

    def __post_init__(self):
        if self.m <= 0:
            raise SpecError(f"resonance denominator must be positive, got m={self.m}")
        if math.gcd(self.n, self.m) != 1:
            raise SpecError(f"resonance {self.n}/{self.m} is not in lowest terms")
        if self.delta <= 0 or self.epsilon <= 0:
            raise SpecError("delta and epsilon must be positive")

    @classmethod
    def from_delta(cls, spec: HamiltonianSpec, n, m, delta, mu=1) -> "ResonanceContext":
        if spec.h02 <= 0:
            raise SpecError("h0_2 must be positive to define eps = m*sqrt(h02*delta)")
        delta = mp.mpf(delta)
        return cls(n, m, delta, m * mp.sqrt(to_mpf(spec.h02) * delta), mu)

    @classmethod
    def from_epsilon(cls, spec: HamiltonianSpec, n, m, epsilon, mu=1) -> "ResonanceContext":
        if spec.h02 <= 0:
            raise SpecError("h0_2 must be positive to define delta from eps")
        epsilon = mp.mpf(epsilon)
        return cls(n, m, epsilon ** 2 / (m ** 2 * to_mpf(spec.h02)), epsilon, mu)

    def consistent_with(self, spec: HamiltonianSpec) -> bool:
        lhs = self.epsilon ** 2
        rhs = self.m ** 2 * to_mpf(spec.h02) * self.delta
        return abs(lhs - rhs) <= mp.eps * 64 * max(abs(lhs), 1)


# ---------- rescaled normal form ----------
@dataclass(frozen=True)
class RescaledSystem:
    """
    H(x, y, tau) = y^2/2 + V(x)
                 + mu*( F(x, tau) + sum g_k eps^(k-2) y^k + sum c_kl(tau) eps^l y^l e^{ikx} ).

    Fourier data keyed by x-harmonic k (and tau-harmonic q); G by degree.
    """
    n: int
    m: int
    h02: Fraction
    V_fourier: dict = field(default_factory=dict)
    F_coeffs: dict = field(default_factory=dict)
    G_taylor: dict = field(default_factory=dict)
    R_coeffs: dict = field(default_factory=dict)

    @property
    def tau_period(self):
        return 2 * mp.pi

    @property
    def M(self) -> int:
        ks = list(self.V_fourier) + list(self.F_coeffs) + [k for k, _ in self.R_coeffs]
        return max((abs(k) for k in ks), default=0)

    @property
    def g3(self) -> Fraction:
        return self.G_taylor.get(3, Fraction(0))

    def potential(self) -> TrigPolynomial:
        return TrigPolynomial({(k, 0, 0): c.to_mpc() for k, c in self.V_fourier.items()})

    def V(self, x):
        return mp.re(self.potential().evaluate(x, 0))

    def dV(self, x):
        return mp.re(self.potential().diff_x().evaluate(x, 0))

    def d2V(self, x):
        return mp.re(self.potential().diff_x().diff_x().evaluate(x, 0))

    def unperturbed(self) -> TrigPolynomial:
        return self.potential() + TrigPolynomial({(0, 2, 0): mp.mpf(1) / 2})

    def forcing(self) -> TrigPolynomial:
        return TrigPolynomial({(k, 0, q): c.to_mpc()
                               for k, harmonics in self.F_coeffs.items()
                               for q, c in harmonics.items()})

    def g_part(self, epsilon) -> TrigPolynomial:
        return TrigPolynomial({(0, kappa, 0): to_mpf(g) * epsilon ** (kappa - 2)
                               for kappa, g in self.G_taylor.items()})

    def r_part(self, epsilon) -> TrigPolynomial:
        return TrigPolynomial({(k, l, q): c.to_mpc() * epsilon ** l
                               for (k, l), harmonics in self.R_coeffs.items()
                               for q, c in harmonics.items()})

    def perturbation(self, epsilon) -> TrigPolynomial:
        return self.forcing() + self.g_part(epsilon) + self.r_part(epsilon)

    def hamiltonian(self, epsilon, mu=1) -> TrigPolynomial:
        return self.unperturbed() + self.perturbation(epsilon).scale(mu)

    def evaluate(self, x, y, tau, epsilon, mu=1):
        return self.hamiltonian(epsilon, mu).evaluate(x, y, tau)

    def to_dict(self) -> dict:
        return {
            "resonance": {"n": self.n, "m": self.m},
            "h02": str(self.h02),
            "V": {str(k): c.to_pair() for k, c in sorted(self.V_fourier.items())},
            "F": {str(k): {str(q): c.to_pair() for q, c in sorted(h.items())}
                  for k, h in sorted(self.F_coeffs.items())},
            "G": {str(k): str(g) for k, g in sorted(self.G_taylor.items())},
            "R": {f"{k},{l}": {str(q): c.to_pair() for q, c in sorted(h.items())}
                  for (k, l), h in sorted(self.R_coeffs.items())},
        }


def _split_terms(spec: HamiltonianSpec, n: int, m: int):
    """Sort h1 terms into V (resonant, I-free), F (oscillating, I-free) and I-dependent ones."""
    V, F, rest = {}, {}, []
    for k, l, j, c in spec.h1_terms:
        q = k * n + j * m
        if l == 0 and q == 0:
            V[k] = V.get(k, ExactComplex()) + c
        elif l == 0:
            F.setdefault(k, {})
            F[k][q] = F[k].get(q, ExactComplex()) + c
        else:
            rest.append((k, l, q, c))
    return V, F, rest


def potential_of(spec: HamiltonianSpec, n: int = 0, m: int = 1) -> TrigPolynomial:
    """V of the rescaled system; independent of h02, usable before HP1 is known."""
    V, _, _ = _split_terms(spec, n, m)
    return TrigPolynomial({(k, 0, 0): c.to_mpc() for k, c in V.items() if not c.is_zero()})


def rescale_at_resonance(spec: HamiltonianSpec, ctx: ResonanceContext) -> RescaledSystem:
    """
    Normal form near the resonance n/m.

    With x = x~ + n*tau, t = m*tau, I = sqrt(delta/h02)*y and eps = m*sqrt(h02*delta),
    H = h/delta has the form documented on RescaledSystem.
    """
    if spec.h02 <= 0:
        raise SpecError("h0_2 must be positive (sign convention of the action)",
                        {"h0_2": spec.h0_2})
    if not ctx.consistent_with(spec):
        raise SpecError("eps^2 != m^2 * h02 * delta for this context")
    n, m, h02 = ctx.n, ctx.m, spec.h02
    V, F, rest = _split_terms(spec, n, m)
    if (0 in V) and not V[0].is_zero():
        logger.warning("constant term %s of h1 kept in V; it does not affect the dynamics",
                       V[0].re)
    R = {}
    scale = m * h02
    for k, l, q, c in rest:
        R.setdefault((k, l), {})
        R[(k, l)][q] = R[(k, l)].get(q, ExactComplex()) + c / scale ** l
    G = {d: m ** 2 * h02 * c / scale ** d for d, c in spec.h0_taylor if d >= 3}
    clean = lambda table: {key: h for key, h in table.items() if not h.is_zero()}
    system = RescaledSystem(
        n=n, m=m, h02=h02,
        V_fourier=clean(V),
        F_coeffs={k: clean(h) for k, h in F.items() if clean(h)},
        G_taylor={d: g for d, g in G.items() if g != 0},
        R_coeffs={key: clean(h) for key, h in R.items() if clean(h)},
    )
    logger.debug("rescaled %s/%s: |V|=%d |F|=%d |G|=%d |R|=%d", n, m, len(system.V_fourier),
                 len(system.F_coeffs), len(system.G_taylor), len(system.R_coeffs))
    return system


def vector_field(sys: RescaledSystem, state, tau, epsilon, mu=1, *, order=None):
    """
    (dx/dtau, dy/dtau) = eps*(H_y, -H_x).

    With ``order`` the Taylor jet of the solution through ``state`` at time
    ``tau`` is returned instead (a taylor.Jet of that order).
    """
    if epsilon <= 0:
        raise SpecError("eps must be positive")
    H = sys.hamiltonian(epsilon, mu)
    x, y = state
    if order is not None:
        from .taylor import FlowJet
        real = all(mp.im(v) == 0 for v in (x, y, tau))
        return FlowJet(H, epsilon).expand(tau, x, y, order, real=real)
    dx = epsilon * H.diff_y().evaluate(x, y, tau)
    dy = -epsilon * H.diff_x().evaluate(x, y, tau)
    if all(mp.im(v) == 0 for v in (x, y, tau)):
        return mp.re(dx), mp.re(dy)
    return dx, dy


# ---------- hypotheses ----------
@dataclass
class HypothesisStatus:
    status: str
    message: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status in (Status.PASS, Status.HEURISTIC_PASS, Status.SKIPPED)


@dataclass
class HypothesisReport:
    statuses: dict
    lam: object = None
    topology: str = None
    singularity_count: int = None
    saddle: object = None
    saddles: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(s.ok for s in self.statuses.values())

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "hypotheses": {name: {"status": s.status, "message": s.message,
                                  "diagnostics": {k: str(v) for k, v in s.diagnostics.items()}}
                           for name, s in sorted(self.statuses.items())},
            "lambda": None if self.lam is None else mp.nstr(self.lam, 20),
            "topology": self.topology,
            "singularity_count": self.singularity_count,
            "saddle": None if self.saddle is None else mp.nstr(self.saddle, 20),
            "saddles": self.saddles,
        }


def check_hypotheses(spec: HamiltonianSpec, ctx: ResonanceContext, *, saddle_index=None,
                     scan=True) -> HypothesisReport:
    """
    HP1–HP6 for the resonance of ``ctx``.

    HP4/HP5 are reported for every maximum of V; the working saddle is the
    global maximum unless ``saddle_index`` picks another one. HP6 runs the
    complex-time singularity scan on the working saddle's separatrix.
    """
    from .separatrix_analysis import (compute_separatrix, find_critical_points,
                                      heteroclinic_partners, locate_singularity)

    statuses = {}
    if spec.h02 > 0:
        statuses["HP1"] = HypothesisStatus(Status.PASS, "h0_2 > 0")
    else:
        statuses["HP1"] = HypothesisStatus(
            Status.FAIL, "h0_2 must be positive: the sign convention fixes d2h0/dI2 > 0 "
                         "at the resonance (reverse time for the negative case)",
            {"h0_2": spec.h0_2})
    if spec.M > 0:
        statuses["HP2"] = HypothesisStatus(Status.PASS, f"h1 has x-degree M={spec.M}")
    else:
        statuses["HP2"] = HypothesisStatus(Status.FAIL, "h1 does not depend on x")

    V = potential_of(spec, ctx.n, ctx.m)
    if V.x_degree() == spec.M and spec.M > 0:
        statuses["HP3"] = HypothesisStatus(Status.PASS, f"V has degree {spec.M}")
    else:
        statuses["HP3"] = HypothesisStatus(
            Status.FAIL, f"V has degree {V.x_degree()} but h1 has degree {spec.M}")
        report = HypothesisReport(statuses)
        for name in ("HP4", "HP5", "HP6"):
            statuses[name] = HypothesisStatus(Status.SKIPPED, "needs a nonconstant V of degree M")
        return report

    points, degenerate = find_critical_points(V, report_degenerate=True)
    report = HypothesisReport(statuses)
    for cp in points:
        partners = heteroclinic_partners(cp)
        report.saddles.append({
            "x": mp.nstr(cp.x_star, 20), "energy": mp.nstr(cp.energy, 20),
            "lambda": mp.nstr(cp.lam, 20), "topology": cp.topology,
            "HP5": Status.FAIL if partners else Status.PASS,
            "heteroclinic_to": [mp.nstr(x, 12) for x in partners],
        })
    if not points:
        statuses["HP4"] = HypothesisStatus(
            Status.FAIL, "V has no non-degenerate maximum (no saddle)",
            {"degenerate": [mp.nstr(x, 12) for x in degenerate]})
        statuses["HP5"] = statuses["HP6"] = HypothesisStatus(Status.SKIPPED, "no saddle")
        return report
    if saddle_index is None:
        cp = max(points, key=lambda p: p.energy)
    else:
        cp = points[saddle_index]
    report.saddle, report.lam, report.topology = cp.x_star, cp.lam, cp.topology
    statuses["HP4"] = HypothesisStatus(Status.PASS, f"hyperbolic saddle at x*={mp.nstr(cp.x_star, 12)}",
                                       {"lambda": cp.lam, "degenerate": len(degenerate)})
    partners = heteroclinic_partners(cp)
    if partners:
        statuses["HP5"] = HypothesisStatus(
            Status.FAIL, "level set of the saddle reaches another saddle (heteroclinic)",
            {"partners": [mp.nstr(x, 12) for x in partners]})
    else:
        statuses["HP5"] = HypothesisStatus(Status.PASS, f"homoclinic loop ({cp.topology})")

    if not scan or not statuses["HP5"].ok:
        statuses["HP6"] = HypothesisStatus(Status.SKIPPED, "singularity scan not run")
        return report
    sep = compute_separatrix(cp)
    sing = locate_singularity(sep)
    nearest = [u for u in sing.scan_log_distinct if abs(mp.im(u) - sing.a) < sing.height_tolerance]
    report.singularity_count = len(nearest)
    diagnostics = {"a": sing.a, "C_plus": sing.C_plus, "rays": len(sing.scan_log)}
    if len(nearest) == 1:
        statuses["HP6"] = HypothesisStatus(Status.HEURISTIC_PASS,
                                           "single singularity on the strip boundary", diagnostics)
    else:
        statuses["HP6"] = HypothesisStatus(
            Status.HEURISTIC_FAIL, f"{len(nearest)} singularities at the same height", diagnostics)
    return report


# ---------- translation helper ----------
def translate_to_resonance(h0_full, h1_terms, I_star, r=1, truncated=False):
    """
    Re-expand h0 and h1 around the resonant action I*.

    ``h0_full`` is [(degree, coef), ...] including degrees 0 and 1. Returns
    (HamiltonianSpec, frequency dh0/dI(I*)). Refuses truncated h0 data,
    whose re-expansion would miss every term beyond the supplied order.
    """
    if truncated:
        raise SpecError("h0 Taylor data are truncated; translation would drop unknown terms")
    I_star = exact(I_star)
    shifted = {}
    for degree, coef in h0_full:
        coef = exact(coef)
        for i in range(int(degree) + 1):
            shifted[i] = shifted.get(i, Fraction(0)) + coef * comb(int(degree), i) * I_star ** (int(degree) - i)
    frequency = shifted.get(1, Fraction(0))
    terms = []
    for k, l, j, c in h1_terms:
        c = ExactComplex.coerce(c)
        for i in range(int(l) + 1):
            terms.append((k, i, j, c * (comb(int(l), i) * I_star ** (int(l) - i))))
    spec = HamiltonianSpec.build([(d, c) for d, c in shifted.items() if d >= 2], terms, r)
    return spec, frequency


# ---------- configuration ----------
def read_config(path: str) -> dict:
    """Parse a .toml or .json configuration file into a dict."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, "r") as f:
        text = f.read()
    if not text.strip():
        raise ConfigError(f"empty config file: {path}")
    try:
        if path.endswith(".toml"):
            return toml.loads(text)
        return json.loads(text)
    except (toml.TomlDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc


def _lookup(data: dict, dotted: str):
    if dotted in data:
        return data[dotted]
    node = data
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(f"missing key '{dotted}'")
        node = node[part]
    return node


def _h0_row(row):
    """(degree, coefficient) from an inline table {power, coef} or a [degree, coef] pair."""
    if isinstance(row, dict):
        return row["power"], row["coef"]
    if not isinstance(row, (list, tuple)) or len(row) != 2:
        raise ConfigError("h0.taylor rows are {power, coef} tables or [degree, coef] pairs, "
                          f"got {row!r}")
    return row[0], row[1]


def hamiltonian_from_dict(data: dict):
    """(HamiltonianSpec, (n, m)) from parsed config data."""
    try:
        resonance = _lookup(data, "resonance")
        n, m = int(resonance["n"]), int(resonance["m"])
        h0_rows = [_h0_row(row) for row in _lookup(data, "h0.taylor")]
        rows = _lookup(data, "h1.terms")
        terms = [(int(t["k"]), int(t["l"]), int(t["j"]),
                  ExactComplex(exact(t.get("re", 0)), exact(t.get("im", 0)))) for t in rows]
        r = data.get("r", 1)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed Hamiltonian config: {exc}") from exc
    if m <= 0 or math.gcd(n, m) != 1:
        raise SpecError(f"resonance {n}/{m} must have m > 0 and gcd(n, m) = 1")
    h0 = []
    for degree, coef in h0_rows:
        degree, coef = int(degree), exact(coef)
        if degree == 1:
            if coef != Fraction(n, m):
                raise SpecError(f"frequency {coef} does not match the resonance {n}/{m}")
        elif degree == 0:
            logger.info("constant term of h0 ignored")
        else:
            h0.append((degree, coef))
    return HamiltonianSpec.build(h0, terms, r), (n, m)


def load_hamiltonian(path: str):
    return hamiltonian_from_dict(read_config(path))
