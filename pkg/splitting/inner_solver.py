"""
inner_solver.py – the inner Hamilton–Jacobi equation near the singularity

    d_tau psi + H0(z, d_z psi, tau) = 0,
    H0(z, w, tau) = z^2 w^2 / 2 - 1 / (2 z^2) + mu * P(z, w, tau)

Provides:
- InnerModel, build_inner_model(): a~(tau), c~_l(tau), G~ from the outer system
- first_order_stokes_constant(): mu-linear chi^[-q] by residues
- AsymptoticSeries: psi ~ -1/z + sum_{j>=2} phi_j(tau) z^-j, summed to its least term
- InnerSolution, solve_inner_manifolds(): tau-collocation march of w = d_z psi
  along Im z = -Y from both ends
- InnerDifference, compute_difference(): fit of the first harmonic of
  psi^u - psi^s to  mu chi e^{-iz} z^{i mu b} (1 + c1/z + ...) in mpmath least squares
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from mpmath import mp

from .errors import ConvergenceError, FitError
from .fourier import to_mpf
from .model_core import RescaledSystem
from .separatrix_analysis import SingularityData
from .taylor import SAFETY, horner, horner_derivative

logger = logging.getLogger(__name__)

FIT_CORRECTIONS = 8     # powers of 1/z beside ln z in the first-harmonic fit


class RForm:
    LEADING, EXAMPLE = "leading", "example"


# ---------- model ----------
@dataclass(frozen=True)
class InnerTerm:
    """coef(tau) * z^z_power * w^w_power, coef as tau-Fourier coefficients."""
    coef: dict
    z_power: int
    w_power: int
    source: str

    def values(self, taus):
        return np.array([mp.fsum(c * mp.expj(q * t) for q, c in self.coef.items()) for t in taus],
                        dtype=object)


@dataclass
class InnerModel:
    a_tilde: dict
    c_tilde: dict
    G_tilde: dict
    mu: object
    C_plus: object
    M: int
    r_form: str = RForm.LEADING
    provenance: dict = field(default_factory=dict)
    order_flags: list = field(default_factory=list)

    @property
    def b_closed(self):
        """b = 2 g3 C+ = 2 G~_3."""
        return 2 * self.G_tilde.get(3, 0)

    def terms(self):
        """Perturbation monomials (without the factor mu)."""
        out = []
        for kappa, g in sorted(self.G_tilde.items()):
            out.append(InnerTerm({0: g}, kappa, kappa, "G"))
        if self.a_tilde:
            out.append(InnerTerm(dict(self.a_tilde), -2, 0, "F"))
        for l, coef in sorted(self.c_tilde.items()):
            if self.r_form == RForm.EXAMPLE:
                out.append(InnerTerm({q: c / 2 for q, c in coef.items()}, l - 4, l, "R"))
            else:
                out.append(InnerTerm(dict(coef), l - 2, l, "R"))
        return out

    def hamiltonian_terms(self):
        """All monomials of H0 including the unperturbed part, mu applied."""
        base = [InnerTerm({0: mp.mpf(1) / 2}, 2, 2, "0"), InnerTerm({0: -mp.mpf(1) / 2}, -2, 0, "0")]
        scaled = [InnerTerm({q: self.mu * c for q, c in t.coef.items()}, t.z_power, t.w_power, t.source)
                  for t in self.terms()]
        return base + scaled

    def describe(self, digits=8) -> str:
        parts = ["d_tau psi", "z^2 (d_z psi)^2 / 2", "- 1/(2 z^2)"]
        for t in self.terms():
            coef = " + ".join(f"({mp.nstr(c, digits)}) e^({q} i tau)" for q, c in sorted(t.coef.items()))
            parts.append(f"mu*[{coef}] z^{t.z_power} (d_z psi)^{t.w_power}")
        return " + ".join(parts) + " = 0"

    def to_dict(self) -> dict:
        c = lambda z: [mp.nstr(mp.re(z), 20), mp.nstr(mp.im(z), 20)]
        return {
            "mu": mp.nstr(self.mu, 15), "C_plus": c(self.C_plus), "M": self.M, "r_form": self.r_form,
            "a_tilde": {str(q): c(v) for q, v in sorted(self.a_tilde.items())},
            "c_tilde": {str(l): {str(q): c(v) for q, v in sorted(h.items())}
                        for l, h in sorted(self.c_tilde.items())},
            "G_tilde": {str(k): c(v) for k, v in sorted(self.G_tilde.items())},
            "order_flags": self.order_flags,
            "provenance": {k: str(v) for k, v in self.provenance.items()},
        }


def build_inner_model(sys: RescaledSystem, sing: SingularityData, mu, *,
                      r_form=RForm.LEADING) -> InnerModel:
    """
    Leading singular parts of F, G, R at u = ia in the inner variables.

    Near the pole only the growing harmonic e^{isMx} of each x-Fourier sum
    survives: e^{isM q0(ia+v)} ~ E / v^2, with E the extrapolated limit
    stored on ``sing``. Then a~ = C+^-2 E a_{sM}, c~_l = C+^(l-2) E c_{sM,l},
    G~_k = C+^(k-2) g_k.
    """
    C = sing.C_plus
    E = sing.growth_constant
    k_lead = sing.harmonic_sign * sing.M
    v_lead = sys.V_fourier.get(k_lead)
    check = None
    if v_lead is not None:
        check = abs(E * v_lead.to_mpc() + C ** 2 / 2)
        if check > mp.mpf(10) ** (-mp.dps // 4) * max(1, abs(C) ** 2):
            raise ConvergenceError(
                "singular limit of the potential is inconsistent with C+ (wrong correction exponents?)",
                {"E": E, "C_plus": C, "mismatch": check, "fit_residual": sing.fit_residual})
    a_tilde = {q: c.to_mpc() * E / C ** 2 for q, c in sys.F_coeffs.get(k_lead, {}).items()}
    c_tilde, flags = {}, []
    for (k, l), harmonics in sorted(sys.R_coeffs.items()):
        if k != k_lead:
            continue
        c_tilde[l] = {q: c.to_mpc() * E * C ** (l - 2) for q, c in harmonics.items()}
        flags.append({"l": l, "leading_z_power": l - 2, "example_z_power": l - 4,
                      "used": r_form})
    G_tilde = {kappa: to_mpf(g) * C ** (kappa - 2) for kappa, g in sys.G_taylor.items()}
    dropped = sorted({k for k in sys.F_coeffs if k != k_lead} | {k for k, _ in sys.R_coeffs if k != k_lead})
    model = InnerModel(
        a_tilde=a_tilde, c_tilde=c_tilde, G_tilde=G_tilde, mu=mu, C_plus=C, M=sing.M,
        r_form=r_form, order_flags=flags,
        provenance={"growth_constant": E, "harmonic": k_lead, "potential_check": check,
                    "singularity_fit_residual": sing.fit_residual,
                    "subleading_harmonics_dropped": dropped,
                    "normalisation": "K^u = K^s = 0 (asymptotic seeds carry no constant)"},
    )
    logger.info("inner model: %s", model.describe(6))
    return model


def first_order_stokes_constant(model: InnerModel, harmonic=1):
    """
    chi^[-q] at first order in mu.

    Linearising around psi = -1/z, a forcing term f z^-m e^{iq tau} gives
    psi^u - psi^s = -f 2 pi i (iq)^(m-1)/(m-1)! e^{-iq(z - tau)} per unit mu.
    """
    total = mp.mpc(0)
    for term in model.terms():
        f = term.coef.get(harmonic, 0)
        power = 2 * term.w_power - term.z_power
        if f == 0 or power < 1:
            continue
        total += -f * 2 * mp.pi * 1j * (1j * harmonic) ** (power - 1) / mp.factorial(power - 1)
    return total


# ---------- tau collocation ----------
class Collocation:
    """Equispaced tau grid with DFT-based derivative and antiderivative."""

    def __init__(self, size):
        if size < 4 or size % 2:
            raise ValueError("collocation size must be an even number >= 4")
        self.size = size
        self.taus = [2 * mp.pi * j / size for j in range(size)]
        self.freqs = [j if j < size // 2 else j - size for j in range(size)]
        self.freqs[size // 2] = 0  # Nyquist mode treated as non-oscillating noise
        self._forward = np.array([[mp.expj(-q * t) / size for t in self.taus]
                                  for q in self._raw_freqs()], dtype=object)
        self._backward = np.array([[mp.expj(q * t) for q in self._raw_freqs()] for t in self.taus],
                                  dtype=object)

    def _raw_freqs(self):
        return [j if j < self.size // 2 else j - self.size for j in range(self.size)]

    def zeros(self):
        return np.array([mp.mpc(0)] * self.size, dtype=object)

    def ones(self):
        return np.array([mp.mpc(1)] * self.size, dtype=object)

    def coefficients(self, values):
        return self._forward.dot(values)

    def values(self, coeffs):
        return self._backward.dot(coeffs)

    def harmonic(self, values, q):
        return self.coefficients(values)[q % self.size]

    def mean(self, values):
        return mp.fsum(values) / self.size

    def dtau(self, values):
        c = self.coefficients(values)
        return self.values(np.array([mp.mpc(0, q) * c[j] if j != self.size // 2 else 0
                                     for j, q in enumerate(self.freqs)], dtype=object))

    def antiderivative(self, values):
        c = self.coefficients(values)
        return self.values(np.array([c[j] / mp.mpc(0, q) if q else 0
                                     for j, q in enumerate(self.freqs)], dtype=object))


def _norm(values):
    return max(abs(v) for v in values)


# ---------- asymptotic seed ----------
class AsymptoticSeries:
    """psi = -1/z + sum_{j>=2} phi_j(tau) z^-j with phi_1 = 0, order by order."""

    def __init__(self, model: InnerModel, grid: Collocation, order: int):
        self.model = model
        self.grid = grid
        self.order = order
        self.terms = [(t.values(grid.taus) * model.mu, t.z_power, t.w_power) for t in model.terms()]
        self.phi = {1: grid.zeros()}
        self._powers = {}
        self._build()

    def _omega(self, j):
        """Coefficient j of z*w in powers of 1/z."""
        if j == 1:
            return self.grid.ones()
        if j < 1:
            return self.grid.zeros()
        return -j * self.phi[j]

    def _omega_power(self, p, j):
        if p == 0:
            return self.grid.ones() if j == 0 else self.grid.zeros()
        if j < p:
            return self.grid.zeros()
        if p == 1:
            return self._omega(j)
        key = (p, j)
        if key not in self._powers:
            acc = self.grid.zeros()
            for i in range(1, j - p + 2):
                acc = acc + self._omega(i) * self._omega_power(p - 1, j - i)
            self._powers[key] = acc
        return self._powers[key]

    def _forcing(self, n):
        acc = self.grid.zeros()
        for values, zp, wp in self.terms:
            index = n - (wp - zp)
            if index >= wp:
                acc = acc + values * self._omega_power(wp, index)
        return acc

    def _quadratic(self, n):
        acc = self.grid.zeros()
        for i in range(2, n - 1):
            acc = acc + (i * (n - i)) * self.phi[i] * self.phi[n - i]
        return acc / 2

    def _build(self):
        grid = self.grid
        for n in range(2, self.order + 2):
            quad = self._quadratic(n)
            forcing = self._forcing(n)
            if n > 2:
                target = (grid.mean(quad) + grid.mean(forcing)) / (n - 1)
                self.phi[n - 1] = self.phi[n - 1] + (target - grid.mean(self.phi[n - 1]))
            elif abs(grid.mean(forcing)) > mp.mpf(10) ** (-mp.dps // 2):
                logger.warning("inner forcing has a nonzero tau-average at order 1/z^2")
            if n == self.order + 1:
                break
            rhs = (n - 1) * self.phi[n - 1] - quad - forcing
            self.phi[n] = grid.antiderivative(rhs)

    def w_terms(self, z):
        """Successive terms of w = d_z psi at z (arrays over tau)."""
        out = [self.grid.ones() / z ** 2]
        for j in range(2, self.order + 1):
            out.append(-j * self.phi[j] / z ** (j + 1))
        return out

    def seed(self, z):
        """(w(z, tau) summed to its least term, error estimate, terms used)."""
        terms = self.w_terms(z)
        sizes = [_norm(t) for t in terms]
        stop = len(terms)
        for j in range(2, len(terms)):
            if sizes[j] > sizes[j - 1] and sizes[j - 1] > 0:
                stop = j
                break
        total = self.grid.zeros()
        for t in terms[:stop]:
            total = total + t
        error = sizes[stop] if stop < len(terms) else sizes[-1]
        return total, error, stop


# ---------- march along Im z = -Y ----------
@dataclass(frozen=True)
class InnerDomain:
    height: object = 25
    extent: object = None
    harmonics: int = 32
    order: int = 60
    window: tuple = (-25, 25)
    points: int = 41
    taylor_order: int = None
    tol: object = None

    def resolved_extent(self):
        return self.extent if self.extent is not None else 2 * self.height + 10

    def observation_points(self):
        lo, hi = self.window
        return [mp.mpc(s, -self.height) for s in mp.linspace(lo, hi, self.points)]

    def to_dict(self) -> dict:
        return {"height": str(self.height), "extent": str(self.resolved_extent()),
                "harmonics": self.harmonics, "order": self.order,
                "window": [str(self.window[0]), str(self.window[1])], "points": self.points}


@dataclass
class InnerSolution:
    branch: str
    points: list
    values: list
    psi_harmonics: list
    seed_point: object
    seed_error: object
    seed_terms: int
    residual: object
    uniqueness_constant: object
    steps: int
    normalisation: str = "K = 0: psi(z) ~ -1/z with no constant term at the seed"


class _Transport:
    """Taylor jets in arclength of  dW/dz = -(d_tau W + H_z) / H_w  on the tau grid."""

    def __init__(self, model: InnerModel, grid: Collocation):
        self.grid = grid
        self.h_z, self.h_w, self.h = {}, {}, {}
        for t in model.hamiltonian_terms():
            values = t.values(grid.taus)
            e, p = t.z_power - t.w_power, t.w_power
            self._add(self.h, (e, p), values)
            if t.z_power:
                self._add(self.h_z, (e - 1, p), values * t.z_power)
            if t.w_power:
                self._add(self.h_w, (e + 1, p - 1), values * t.w_power)
        self.max_power = max(p for _, p in list(self.h_z) + list(self.h_w))

    @staticmethod
    def _add(table, key, values):
        table[key] = table[key] + values if key in table else values

    @staticmethod
    def _z_series(zc, d, exponent, order):
        """Taylor coefficients of (zc + d s)^exponent in s."""
        out = [zc ** exponent]
        for n in range(1, order + 1):
            out.append(out[-1] * (exponent - n + 1) / n * d / zc)
        return out

    def _combined(self, table, zc, d, order):
        """For each power p: series sum_e A_{e,p}(tau) z^e."""
        out = {}
        zs = {}
        for (e, p), values in table.items():
            if e not in zs:
                zs[e] = self._z_series(zc, d, e, order)
            series = out.setdefault(p, [self.grid.zeros() for _ in range(order + 1)])
            for n in range(order + 1):
                series[n] = series[n] + values * zs[e][n]
        return out

    def evaluate(self, table, z, W):
        acc = self.grid.zeros()
        omega = z * W
        for (e, p), values in table.items():
            acc = acc + values * z ** e * omega ** p
        return acc

    def rhs(self, z, W):
        grid = self.grid
        return -(grid.dtau(W) + self.evaluate(self.h_z, z, W)) / self.evaluate(self.h_w, z, W)

    def jet(self, zc, W0, d, order):
        grid = self.grid
        hz = self._combined(self.h_z, zc, d, order)
        hw = self._combined(self.h_w, zc, d, order)
        W = [W0]
        omega = [zc * W0]
        powers = {0: [grid.ones()] + [grid.zeros() for _ in range(order)], 1: omega}
        for p in range(2, self.max_power + 1):
            powers[p] = [omega[0] ** p]
        Hw, R = [], []
        for n in range(order):
            if n:
                omega.append(zc * W[n] + d * W[n - 1])
                for p in range(2, self.max_power + 1):
                    acc = grid.zeros()
                    for i in range(n + 1):
                        acc = acc + powers[p - 1][i] * omega[n - i]
                    powers[p].append(acc)
            num = grid.dtau(W[n])
            for p, series in hz.items():
                for i in range(n + 1):
                    num = num + series[i] * powers[p][n - i]
            den = grid.zeros()
            for p, series in hw.items():
                for i in range(n + 1):
                    den = den + series[i] * powers[p][n - i]
            Hw.append(den)
            acc = -d * num
            for i in range(1, n + 1):
                acc = acc - Hw[i] * R[n - i]
            R.append(acc / Hw[0])
            W.append(R[n] / (n + 1))
        return W


def _march(transport: _Transport, z_start, W, targets, order, tol):
    """Integrate along the horizontal line from z_start through the target points in order."""
    d = 1 if mp.re(targets[-1]) > mp.re(z_start) else -1
    z = z_start
    results = []
    steps = 0
    max_residual = mp.mpf(0)
    scale = _norm(W)
    for target in targets:
        while abs(target - z) > 0:
            coeffs = transport.jet(z, W, d, order)
            norms = [_norm(c) for c in coeffs[-2:]]
            h = None
            for j, size in zip((order - 1, order), norms):
                if size > 0:
                    cand = (tol * scale / size) ** (mp.mpf(1) / j)
                    h = cand if h is None else min(h, cand)
            h = SAFETY * h if h is not None else abs(target - z)
            h = min(h, abs(target - z))
            if h < mp.eps * 1e6:
                raise ConvergenceError("inner march step underflow", {"z": z})
            W = horner(coeffs, h)
            slope = horner_derivative(coeffs, h) * d
            z = z + d * h
            steps += 1
            if abs(target - z) < mp.eps * 100:
                z = target
            max_residual = max(max_residual, _norm(slope - transport.rhs(z, W)))
        results.append(W)
    return results, steps, max_residual


def _psi_harmonics(transport: _Transport, z, W, grid: Collocation, count=3):
    """tau-harmonics q != 0 of psi from d_tau psi = -H0(z, w, tau)."""
    h = transport.evaluate(transport.h, z, W)
    coeffs = grid.coefficients(h)
    return {q: -coeffs[q % grid.size] / mp.mpc(0, q) for q in range(-count, count + 1) if q}


def solve_inner_manifolds(model: InnerModel, domain: InnerDomain):
    """Unstable (seeded at Re z = -Z) and stable (Re z = +Z) solutions on Im z = -Y."""
    grid = Collocation(domain.harmonics)
    series = AsymptoticSeries(model, grid, domain.order)
    transport = _Transport(model, grid)
    tol = domain.tol if domain.tol is not None else mp.mpf(10) ** (-(mp.dps - 5))
    order = domain.taylor_order or max(16, int(mp.ceil(-mp.log(tol) / 2)) + 1)
    Y, Z = mp.mpf(domain.height), mp.mpf(domain.resolved_extent())
    points = domain.observation_points()
    target_error = mp.exp(-Y) * mp.mpf(10) ** -8
    solutions = []
    for branch, sign, targets in (("u", -1, points), ("s", 1, list(reversed(points)))):
        z0 = mp.mpc(sign * Z, -Y)
        W0, error, used = series.seed(z0)
        if error > target_error and model.mu != 0:
            raise ConvergenceError("asymptotic series cannot reach the seed accuracy",
                                   {"branch": branch, "seed_error": error, "target": target_error,
                                    "terms": used})
        values, steps, residual = _march(transport, z0, W0, targets, order, tol)
        if branch == "s":
            values = list(reversed(values))
        harmonics = [_psi_harmonics(transport, z, W, grid) for z, W in zip(points, values)]
        bound = max(_norm((W - grid.ones() / z ** 2) * z ** 3) for z, W in zip(points, values))
        solutions.append(InnerSolution(branch, points, values, harmonics, z0, error, used,
                                       residual, bound, steps))
        logger.info("inner %s-solution: %d steps, seed error %s, residual %s", branch, steps,
                    mp.nstr(error, 3), mp.nstr(residual, 3))
    return solutions[0], solutions[1]


# ---------- difference ----------
@dataclass
class InnerDifference:
    mu: object
    chi: dict
    b: object
    f: object
    C_plus: object
    chi_error: object = 0
    b_error: object = 0
    diagnostics: dict = field(default_factory=dict)
    domain: dict = field(default_factory=dict)
    contaminated: bool = False

    def to_dict(self) -> dict:
        c = lambda z: [mp.nstr(mp.re(z), 20), mp.nstr(mp.im(z), 20)]
        return {
            "mu": mp.nstr(self.mu, 15),
            "chi_m1": c(self.chi.get(-1, 0)),
            "chi_m2": c(self.chi.get(-2, 0)),
            "b": c(self.b),
            "f": c(self.f),
            "fit_error": {"chi": mp.nstr(self.chi_error, 5), "b": mp.nstr(self.b_error, 5)},
            "contaminated": self.contaminated,
            "domain_params": self.domain,
            "diagnostics": {k: str(v) for k, v in self.diagnostics.items()},
        }


def _unwrapped_log(zs, ds):
    out, previous = [], None
    for z, value in zip(zs, ds):
        L = mp.log(value * mp.expj(z))
        if previous is not None:
            L += 2j * mp.pi * mp.nint(mp.im(previous - L) / (2 * mp.pi))
        out.append(L)
        previous = L
    return out


def _fit_first_harmonic(zs, logs, corrections):
    if len(zs) <= corrections + 2:
        raise FitError("not enough observation points for the inner fit",
                       {"points": len(zs), "corrections": corrections})
    z0 = zs[len(zs) // 2]
    # powers of z0/z keep every column of size ~1 at any height
    A = mp.matrix([[1, mp.log(z)] + [(z0 / z) ** k for k in range(1, corrections + 1)] for z in zs])
    AH = A.H
    try:
        coef = mp.lu_solve(AH * A, AH * mp.matrix(logs))
    except ZeroDivisionError as exc:
        raise FitError("inner fit is rank deficient", {"corrections": corrections}) from exc
    misfit = max(abs(logs[i] - mp.fsum(A[i, j] * coef[j] for j in range(A.cols))) for i in range(A.rows))
    return [coef[j] for j in range(A.cols)], misfit


def compute_difference(u_sol: InnerSolution, s_sol: InnerSolution, mu, *, C_plus,
                       corrections=FIT_CORRECTIONS, extra=()) -> InnerDifference:
    """
    chi^[-1], b and f = C+^2 chi^[-1] from psi^u - psi^s on Im z = -Y.

    ``C_plus`` is the pole constant of the outer separatrix, which sets f.
    ``extra`` holds further (u, s) pairs, e.g. at other heights; the spread
    over heights, half windows and correction counts gives the error bars.
    """
    C = C_plus
    domain = {} if u_sol is None else {"height": str(-mp.im(u_sol.points[0])), "points": len(u_sol.points)}
    if mu == 0:
        return InnerDifference(mu, {-1: mp.mpc(0), -2: mp.mpc(0)}, mp.mpc(0), mp.mpc(0), C,
                               diagnostics={"note": "mu = 0: manifolds coincide"}, domain=domain)
    estimates = []
    details = {}
    for index, (us, ss) in enumerate(((u_sol, s_sol),) + tuple(extra)):
        zs = us.points
        d1 = [hu[1] - hs[1] for hu, hs in zip(us.psi_harmonics, ss.psi_harmonics)]
        logs = _unwrapped_log(zs, d1)
        half = len(zs) // 2
        windows = {"full": slice(None), "left": slice(0, half + 1), "right": slice(half, None)}
        for name, window in windows.items():
            top = max(1, min(corrections, len(zs[window]) - 3))
            for k in (top, top - 1):
                try:
                    coef, misfit = _fit_first_harmonic(zs[window], logs[window], k)
                except FitError:
                    continue
                estimates.append((index, name, k, coef, misfit))
        d2 = [hu[2] - hs[2] for hu, hs in zip(us.psi_harmonics, ss.psi_harmonics)]
        details[f"chi2_raw_{index}"] = mp.fsum(v * mp.expj(2 * z) for z, v in zip(zs, d2)) / len(zs)
    if not estimates:
        raise FitError("inner difference fit failed on every window")
    main = next((e for e in estimates if e[0] == 0 and e[1] == "full"), None)
    if main is None:
        raise FitError("inner difference fit failed on the full window")
    chi_of = lambda coef: mp.exp(coef[0]) / mu
    b_of = lambda coef: coef[1] / (1j * mu)
    chi = chi_of(main[3])
    b = b_of(main[3])
    chi_error = max(abs(chi_of(e[3]) - chi) for e in estimates)
    b_error = max(abs(b_of(e[3]) - b) for e in estimates)
    chi2 = details["chi2_raw_0"] / mu
    height = -mp.im(u_sol.points[0])
    contamination = abs(chi2) * mp.exp(-height) / max(abs(chi), mp.eps)
    contaminated = contamination > max(chi_error / max(abs(chi), mp.eps), mp.mpf(10) ** -8)
    if contaminated:
        logger.warning("second harmonic may contaminate the inner fit (ratio %s)",
                       mp.nstr(contamination, 3))
    diagnostics = {"misfit": main[4], "fits": len(estimates), "contamination": contamination,
                   "log_convention": "e^{-i(z - tau)} z^{i mu b}: b = coefficient of ln z / (i mu)"}
    result = InnerDifference(mu, {-1: chi, -2: chi2}, b, C ** 2 * chi, C, chi_error, b_error,
                             diagnostics, domain, contaminated)
    logger.info("inner difference mu=%s: chi=%s b=%s (+-%s)", mp.nstr(mu, 6), mp.nstr(chi, 12),
                mp.nstr(b, 10), mp.nstr(b_error, 3))
    return result
