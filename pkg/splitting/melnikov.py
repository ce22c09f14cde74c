"""
melnikov.py – first-order (in mu) prediction of the splitting

Provides:
- MelnikovData: tau-harmonics M^[q] of the Melnikov function at one eps
- melnikov_function(): tail-corrected composite Gauss–Legendre quadrature of
  {H0, H1} along the unperturbed separatrix
- melnikov_area(), first_harmonic_area(): lobe area at first order
- extrapolate_f0(): eps -> 0 limit of eps^2 e^{a/eps} M^[1]
"""
import logging
from dataclasses import dataclass, field

from mpmath import mp
from mpmath.calculus.quadrature import GaussLegendre

from .errors import ConvergenceError, PrecisionError
from .fourier import poisson_bracket
from .model_core import RescaledSystem
from .separatrix_analysis import SeparatrixOrbit, SingularityData

logger = logging.getLogger(__name__)

CONVENTION = ("M(t0) = int {H0,H1}(q0(u), p0(u), (u+t0)/eps) du = sum_q M^[q] e^{i q t0/eps}; "
              "f0 = eps^2 e^{a/eps} M^[1]; A_mel = 4 eps |M^[1]| mu = 4 e^{-a/eps} |f0| mu / eps")

# ---------- knobs ----------
MIN_DEGREE    = 4
MAX_DEGREE    = 8
EXTRA_DIGITS  = 30


@dataclass
class MelnikovData:
    epsilon: object
    harmonics: dict
    f0_estimate: object = None
    a: object = None
    quadrature_error: object = 0
    convention: str = CONVENTION
    tails: dict = field(default_factory=dict)

    @property
    def vanishes(self) -> bool:
        return all(c == 0 for c in self.harmonics.values())

    def first_harmonic(self):
        """(q, M^[q]) for the lowest positive harmonic with a nonzero coefficient."""
        for q in sorted(k for k in self.harmonics if k > 0):
            if self.harmonics[q] != 0:
                return q, self.harmonics[q]
        return None, mp.mpc(0)

    def value(self, t0):
        return mp.re(mp.fsum(c * mp.expj(q * t0 / self.epsilon) for q, c in self.harmonics.items()))

    def derivative(self, t0):
        eps = self.epsilon
        return mp.re(mp.fsum(mp.mpc(0, q) / eps * c * mp.expj(q * t0 / eps)
                             for q, c in self.harmonics.items()))

    def predicted_area(self, mu, epsilon=None):
        """Area law 4 e^{-a/eps} |f0| mu / eps; at the computed eps this is 4 eps |M^[1]| mu."""
        if epsilon is None or self.f0_estimate is None or self.a is None:
            return 4 * self.epsilon * abs(self.harmonics.get(1, 0)) * abs(mu)
        return 4 * mp.exp(-self.a / epsilon) * abs(self.f0_estimate) * abs(mu) / epsilon

    def decay_rate(self):
        """a implied by ln|M^[k]| = c + p ln k - k a/eps over the positive harmonics."""
        ks = [k for k in sorted(self.harmonics) if k > 0 and self.harmonics[k] != 0]
        if len(ks) < 2:
            return None
        ys = [mp.log(abs(self.harmonics[k])) for k in ks]
        if len(ks) == 2:
            slope = (ys[1] - ys[0]) / (ks[1] - ks[0])
            return -slope * self.epsilon
        A = mp.matrix([[1, mp.log(k), -k] for k in ks])
        coef = mp.lu_solve(A.T * A, A.T * mp.matrix(ys))
        return coef[2] * self.epsilon

    def to_rows(self, mu=1):
        area = melnikov_area(self, mu)
        f0 = self.f0_estimate if self.f0_estimate is not None else mp.mpc(0)
        return [{"epsilon": self.epsilon, "k": q, "re_Mk": mp.re(c), "im_Mk": mp.im(c),
                 "f0_re": mp.re(f0), "f0_im": mp.im(f0), "area_mel": area}
                for q, c in sorted(self.harmonics.items())]


def _pieces(span, epsilon, q_max, lam):
    length = min(mp.mpf(1) / lam, mp.pi * epsilon / max(q_max, 1))
    count = int(mp.ceil(2 * span / length))
    edges = mp.linspace(-span, span, count + 1)
    return list(zip(edges[:-1], edges[1:]))


def _tail_rate(g_edge, g_inner, step, lam):
    """Decay rate of the integrand beyond the window, snapped to a multiple of lambda."""
    if g_edge == 0 or g_inner == 0:
        return lam
    measured = mp.log(abs(g_inner) / abs(g_edge)) / step
    return lam * max(1, int(mp.nint(measured / lam)))


def melnikov_function(sys: RescaledSystem, sep: SeparatrixOrbit, epsilon, *,
                      singularity: SingularityData = None, tol=None) -> MelnikovData:
    """
    tau-harmonics of M(t0) at one eps.

    The bracket {H0, H1} is split by tau-harmonic q; each M^[q] is the
    integral of b_q(q0(u), p0(u)) e^{iqu/eps} over the window [-U, U] plus
    closed-form exponential tails.
    """
    a = singularity.a if singularity is not None else None
    if a is not None:
        needed = a / (epsilon * mp.log(10)) + EXTRA_DIGITS
        if mp.dps < needed:
            raise PrecisionError(f"eps={mp.nstr(epsilon, 6)} needs at least {int(needed) + 1} digits",
                                 {"digits": mp.dps, "needed": needed})
    tol = tol if tol is not None else mp.mpf(10) ** (-(mp.dps - 10))
    bracket = poisson_bracket(sys.unperturbed(), sys.perturbation(epsilon))
    components = {q: bracket.tau_component(q) for q in bracket.tau_harmonics() if q > 0}
    lam = sep.cp.lam
    span = sep.span
    harmonics = {}
    if not components:
        logger.info("perturbation has no tau-dependence: Melnikov function vanishes")
        return MelnikovData(epsilon, {}, mp.mpc(0), a, mp.mpf(0))

    q_max = max(components)
    pieces = _pieces(span, epsilon, q_max, lam)
    rule = GaussLegendre(mp)
    cache = {}

    def integrand_values(u):
        if u not in cache:
            x, y = sep.evaluate(u)
            cache[u] = {q: poly.evaluate(x, y, 0) for q, poly in components.items()}
        return cache[u]

    def quadrature(degree):
        totals = {q: mp.mpc(0) for q in components}
        for lo, hi in pieces:
            for u, w in rule.get_nodes(lo, hi, degree, mp.prec):
                values = integrand_values(u)
                for q in components:
                    totals[q] += w * values[q] * mp.expj(q * u / epsilon)
        return totals

    degree = MIN_DEGREE
    coarse = quadrature(degree)
    while True:
        fine = quadrature(degree + 1)
        error = max(abs(fine[q] - coarse[q]) for q in components)
        scale = max(max(abs(v) for v in fine.values()), mp.mpf(10) ** (-mp.dps // 2))
        if error <= tol * scale:
            break
        if degree + 1 >= MAX_DEGREE:
            raise ConvergenceError("Melnikov quadrature did not converge",
                                   {"error": error, "degree": degree + 1})
        degree += 1
        coarse = fine
        cache.clear()

    step = 1 / lam
    tails = {}
    for q in components:
        omega = q / epsilon
        right, right_in = integrand_values(span)[q], integrand_values(span - step)[q]
        left, left_in = integrand_values(-span)[q], integrand_values(-span + step)[q]
        k_right = _tail_rate(right, right_in, step, lam)
        k_left = _tail_rate(left, left_in, step, lam)
        tail = (right * mp.expj(omega * span) / (k_right - mp.mpc(0, omega))
                + left * mp.expj(-omega * span) / (k_left + mp.mpc(0, omega)))
        remainder = abs(tail) * mp.exp(-lam * span)
        if remainder > tol * max(abs(fine[q]), 1):
            raise ConvergenceError("Melnikov tail estimate exceeds tolerance",
                                   {"harmonic": q, "tail": tail})
        tails[q] = tail
        harmonics[q] = fine[q] + tail
        harmonics[-q] = mp.conj(harmonics[q])
    f0 = None
    if a is not None and 1 in harmonics:
        f0 = epsilon ** 2 * mp.exp(a / epsilon) * harmonics[1]
    logger.info("Melnikov harmonics at eps=%s: %s (quadrature error %s)", mp.nstr(epsilon, 8),
                {q: mp.nstr(abs(c), 8) for q, c in harmonics.items() if q > 0},
                mp.nstr(error, 3))
    return MelnikovData(epsilon, harmonics, f0, a, error, tails=tails)


def first_harmonic_area(data: MelnikovData, mu):
    """Lobe area when M is replaced by its leading harmonic: 4 eps |M^[q]| / q * mu."""
    q, coef = data.first_harmonic()
    if q is None:
        return mp.mpf(0)
    return 4 * data.epsilon * abs(coef) / q * abs(mu)


def melnikov_area(data: MelnikovData, mu):
    """mu * |integral of M| between two adjacent zeros of M."""
    if mu == 0:
        return mp.mpf(0)
    if data.vanishes:
        logger.warning("Melnikov function vanishes identically at eps=%s", mp.nstr(data.epsilon, 8))
        return mp.mpf(0)
    q, coef = data.first_harmonic()
    eps = data.epsilon
    phase = mp.arg(coef)
    seeds = [eps * (mp.pi / 2 + j * mp.pi - phase) / q for j in (0, 1)]
    zeros = []
    for seed in seeds:
        try:
            zeros.append(mp.findroot(data.value, seed, solver="newton", df=data.derivative))
        except ValueError as exc:
            raise ConvergenceError("Newton on the Melnikov series did not converge",
                                   {"seed": seed}) from exc
    t1, t2 = sorted(zeros)
    integral = mp.fsum(c * eps / mp.mpc(0, k) * (mp.expj(k * t2 / eps) - mp.expj(k * t1 / eps))
                       for k, c in data.harmonics.items() if k != 0)
    area = abs(mp.re(integral)) * abs(mu)
    logger.debug("Melnikov lobe [%s, %s]: area %s (first harmonic %s)", mp.nstr(t1, 8),
                 mp.nstr(t2, 8), mp.nstr(area, 12), mp.nstr(first_harmonic_area(data, mu), 12))
    return area


def extrapolate_f0(datas):
    """Neville extrapolation of f0_estimate(eps) to eps = 0."""
    points = sorted(((d.epsilon, d.f0_estimate) for d in datas if d.f0_estimate is not None),
                    key=lambda p: p[0])
    if not points:
        return None
    xs = [p[0] for p in points]
    table = [p[1] for p in points]
    for level in range(1, len(xs)):
        table = [(xs[i + level] * table[i] - xs[i] * table[i + 1]) / (xs[i + level] - xs[i])
                 for i in range(len(table) - 1)]
    return table[0]
