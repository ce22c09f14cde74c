"""
separatrix_analysis.py – the unperturbed pendulum-like system H0 = y^2/2 + V(x)

Provides:
- CriticalPoint, find_critical_points(): maxima of V, classified graph / figure-eight
- heteroclinic_partners(), turning_points(): level-set bookkeeping for HP5
- SeparatrixOrbit, compute_separatrix(): dense real-time output and complex continuation
- SingularityData, locate_singularity(): nearest complex-time singularity (a, C+)
- action_T0(): integral of p0^2 from -infinity with closed-form exponential tails
"""
import bisect
import logging
from dataclasses import dataclass, field

import mpmath
from mpmath import mp

from .errors import ConvergenceError, HypothesisError
from .fourier import TrigPolynomial
from .model_core import RescaledSystem, Topology
from .taylor import TaylorIntegrator, default_tolerance

logger = logging.getLogger(__name__)

# ---------- knobs ----------
TAIL_LENGTH      = 30          # U = TAIL_LENGTH / lambda
BLOWUP           = 10 ** 6     # |p0| threshold for "singularity reached"
CHASE_FRACTION   = mp.mpf("0.9")
MAX_JUMP         = mp.mpf("0.5")
MAX_CHASE        = 80
N_RAYS           = 5
FIT_FAR          = mp.mpf("1e-3")   # Laurent fit samples at distances FIT_FAR ... FIT_NEAR below the pole
FIT_NEAR         = mp.mpf("1e-6")
FIT_SAMPLES      = 10
FIT_TERMS        = 4


def _as_potential(V) -> TrigPolynomial:
    if isinstance(V, RescaledSystem):
        return V.potential()
    return V


def _unit_circle_roots(poly: TrigPolynomial, shift=0):
    """Real roots in [0, 2pi) of the trigonometric polynomial poly(x) - shift."""
    M = poly.x_degree()
    coeffs = {k: c for (k, _, _), c in poly.terms.items()}
    coeffs[0] = coeffs.get(0, 0) - shift
    if M == 0:
        return []
    dense = [coeffs.get(M - j, 0) for j in range(2 * M + 1)]
    while dense and abs(dense[0]) == 0:
        dense.pop(0)
    try:
        zetas = mp.polyroots(dense, maxsteps=400, extraprec=4 * mp.prec)
    except mpmath.libmp.libhyper.NoConvergence as exc:
        raise ConvergenceError("polynomial root finder did not converge") from exc
    tol = mp.mpf(10) ** (-mp.dps // 4)
    roots = []
    for zeta in zetas:
        if abs(abs(zeta) - 1) < tol:
            roots.append(mp.arg(zeta) % (2 * mp.pi))
    return sorted(roots)


def _polish(f, x):
    try:
        return mp.findroot(f, x, tol=mp.eps * 64)
    except (ValueError, ZeroDivisionError):
        return x


def _dedupe(values, tol, period=None):
    out = []
    for v in sorted(values):
        close = any(abs(v - w) < tol or (period and abs(abs(v - w) - period) < tol) for w in out)
        if not close:
            out.append(v)
    return out


@dataclass(frozen=True)
class CriticalPoint:
    x_star: object
    energy: object
    lam: object
    topology: str
    potential: TrigPolynomial = field(compare=False, repr=False)

    def V(self, x):
        return mp.re(self.potential.evaluate(x, 0))


def _extrema(V: TrigPolynomial):
    dV = V.diff_x()
    f = lambda x: mp.re(dV.evaluate(x, 0))
    tol = mp.mpf(10) ** (-mp.dps // 3)
    roots = [_polish(f, x) % (2 * mp.pi) for x in _unit_circle_roots(dV)]
    return _dedupe(roots, tol, 2 * mp.pi)


def find_critical_points(V, report_degenerate=False):
    """
    Non-degenerate maxima of V in [0, 2pi), sorted by position.

    With ``report_degenerate`` a second list of degenerate critical points is
    returned as well.
    """
    V = _as_potential(V)
    d2V = V.diff_x().diff_x()
    tol = mp.mpf(10) ** (-mp.dps // 3)
    points = _extrema(V)
    values = [mp.re(V.evaluate(x, 0)) for x in points]
    top = max(values, default=None)
    maxima, degenerate = [], []
    for x, value in zip(points, values):
        curvature = mp.re(d2V.evaluate(x, 0))
        if abs(curvature) < tol:
            logger.warning("degenerate critical point of V at x=%s excluded", mp.nstr(x, 12))
            degenerate.append(x)
            continue
        if curvature > 0:
            continue
        topology = Topology.GRAPH if value >= top - tol else Topology.FIGURE_EIGHT
        maxima.append(CriticalPoint(x, value, mp.sqrt(-curvature), topology, V))
    if report_degenerate:
        return maxima, degenerate
    return maxima


def minima_of(V):
    V = _as_potential(V)
    d2V = V.diff_x().diff_x()
    return [x for x in _extrema(V) if mp.re(d2V.evaluate(x, 0)) > 0]


def level_set(cp: CriticalPoint):
    """Solutions of V(x) = E* other than x* itself, in [0, 2pi)."""
    f = lambda x: cp.V(x) - cp.energy
    tol = mp.mpf(10) ** (-mp.dps // 5)
    out = []
    for x in _unit_circle_roots(cp.potential, cp.energy):
        gap = abs(x - cp.x_star)
        if min(gap, 2 * mp.pi - gap) < tol:
            continue
        out.append(x)
    return _dedupe(out, tol, 2 * mp.pi)


def heteroclinic_partners(cp: CriticalPoint):
    """Other critical points on the saddle's energy level (HP5 failures)."""
    dV = cp.potential.diff_x()
    tol = mp.mpf(10) ** (-mp.dps // 5)
    return [x for x in level_set(cp) if abs(mp.re(dV.evaluate(x, 0))) < tol]


def turning_points(cp: CriticalPoint):
    dV = cp.potential.diff_x()
    tol = mp.mpf(10) ** (-mp.dps // 5)
    return [x for x in level_set(cp) if abs(mp.re(dV.evaluate(x, 0))) >= tol]


# ---------- separatrix ----------
class SeparatrixOrbit:
    """
    Time parametrisation (q0(u), p0(u)) of one separatrix branch of H0.

    u = 0 at the apex: the minimum of V along a graph separatrix, the turning
    point of a figure-eight loop. ``branch`` is +1/-1: direction of travel in
    x for graph separatrices, right/left loop for figure eights.
    """

    def __init__(self, cp: CriticalPoint, branch=1, *, span=None, tol=None):
        self.cp = cp
        self.branch = 1 if branch >= 0 else -1
        self.tol = tol if tol is not None else default_tolerance()
        self.span = span if span is not None else TAIL_LENGTH / cp.lam
        self.phase_shift = mp.mpf(0)
        self.hamiltonian = cp.potential + TrigPolynomial({(0, 2, 0): mp.mpf(1) / 2})
        self._integrator = TaylorIntegrator(self.hamiltonian, 1, tol=self.tol)
        self.apex = self._find_apex()
        forward = self._integrator.propagate(mp.mpf(0), self.apex, self.span, dense=True)
        backward = self._integrator.propagate(mp.mpf(0), self.apex, -self.span, dense=True)
        self.segments = list(reversed(backward.segments)) + forward.segments
        self._starts = [self._bounds(s)[0] for s in self.segments]
        self._cumulative = self._action_table()
        logger.debug("separatrix through x*=%s: %d segments, energy error %s",
                     mp.nstr(cp.x_star, 10), len(self.segments), mp.nstr(self.energy_error(), 5))

    def _find_apex(self):
        cp = self.cp
        if cp.topology == Topology.GRAPH:
            lo, hi = sorted((cp.x_star, cp.x_star + 2 * mp.pi * self.branch))
            candidates = []
            for x in minima_of(cp.potential):
                x = x + 2 * mp.pi * mp.floor((lo - x) / (2 * mp.pi)) + 2 * mp.pi
                while x > hi:
                    x -= 2 * mp.pi
                if lo < x < hi:
                    candidates.append(x)
            if not candidates:
                raise HypothesisError("no minimum of V along the separatrix")
            values = [cp.V(x) for x in candidates]
            best = min(values)
            apexes = [x for x, v in zip(candidates, values) if v - best < mp.mpf(10) ** (-mp.dps // 3)]
            if len(apexes) > 1:
                logger.warning("apex not unique (%d candidates); first one chosen", len(apexes))
            x_apex = apexes[0]
            return x_apex, self.branch * mp.sqrt(2 * (cp.energy - cp.V(x_apex)))
        turning = turning_points(cp)
        if not turning:
            raise HypothesisError("figure-eight level set without turning points")
        # nearest turning point on the requested side of x*
        offsets = [((x - cp.x_star) % (2 * mp.pi)) for x in turning]
        if self.branch > 0:
            offset = min(offsets)
        else:
            offset = max(offsets) - 2 * mp.pi
        return cp.x_star + offset, mp.mpf(0)

    @staticmethod
    def _bounds(seg):
        end = seg.t0 + seg.direction * seg.length
        return (min(seg.t0, end), max(seg.t0, end))

    # ---------- evaluation ----------
    @property
    def end_points(self):
        """x-limits of q0 as u -> -inf and u -> +inf."""
        if self.cp.topology == Topology.GRAPH:
            return self.cp.x_star, self.cp.x_star + 2 * mp.pi * self.branch
        return self.cp.x_star, self.cp.x_star

    def _segment(self, u):
        i = bisect.bisect_right(self._starts, u) - 1
        return self.segments[max(0, min(i, len(self.segments) - 1))]

    def _real_state(self, u):
        if abs(u) <= self.span:
            return self._segment(u).state(u)
        start, end = self.end_points
        edge = self.span if u > 0 else -self.span
        x_edge, y_edge = self._segment(edge).state(edge)
        decay = mp.exp(-self.cp.lam * (abs(u) - self.span))
        limit = end if u > 0 else start
        return limit + (x_edge - limit) * decay, y_edge * decay

    def evaluate(self, u):
        """(q0(u), p0(u)) for real or complex u (vertical continuation from Re u)."""
        u = u + self.phase_shift
        if mp.im(u) == 0:
            return self._real_state(mp.re(u))
        base = mp.re(u)
        if abs(base) > self.span:
            raise ValueError("complex evaluation only inside the dense window")
        return self._integrator.propagate(base, self._real_state(base), u, real=False).state

    def evaluate_along(self, vertices):
        """Continue (q0, p0) along a polygonal path of u-values starting on the real axis."""
        start = vertices[0] + self.phase_shift
        if mp.im(start) != 0:
            raise ValueError("path must start on the real axis")
        shifted = [v + self.phase_shift for v in vertices]
        result = self._integrator.propagate_path(shifted, self._real_state(mp.re(start)), real=False)
        return result.state

    def q0(self, u):
        return self.evaluate(u)[0]

    def p0(self, u):
        return self.evaluate(u)[1]

    def energy(self, state):
        return self.hamiltonian.evaluate(state[0], state[1])

    def energy_error(self, samples=200):
        grid = mp.linspace(-self.span, self.span, samples)
        return max(abs(self.energy(self._real_state(u)) - self.cp.energy) for u in grid)

    def apex_coordinate(self, x, y):
        """Increases through 0 along the loop as the orbit passes the apex."""
        if self.cp.topology == Topology.GRAPH:
            return self.branch * (x - self.apex[0])
        return -self.branch * y

    def shifted(self, delta_u) -> "SeparatrixOrbit":
        """Same orbit with u -> u + delta_u."""
        clone = object.__new__(SeparatrixOrbit)
        clone.__dict__.update(self.__dict__)
        clone.phase_shift = self.phase_shift + delta_u
        return clone

    # ---------- action ----------
    def _segment_p2(self, seg):
        p = seg.y
        n = len(p)
        return [mp.fdot(p[: j + 1], p[j::-1]) if j < n else
                mp.fdot(p[j - n + 1:], p[n - 1: j - n: -1]) for j in range(2 * n - 1)]

    @staticmethod
    def _integral(coeffs, s):
        return mp.fsum(c * s ** (j + 1) / (j + 1) for j, c in enumerate(coeffs))

    def _action_table(self):
        table, total = [], mp.mpf(0)
        for seg in self.segments:
            p2 = self._segment_p2(seg)
            table.append((total, p2))
            total += self._integral(p2, seg.length)
        return table

    def _p2_integral_to(self, u):
        """Integral of p0^2 from -span to u, for |u| <= span."""
        i = max(0, min(bisect.bisect_right(self._starts, u) - 1, len(self.segments) - 1))
        seg = self.segments[i]
        before, p2 = self._cumulative[i]
        lo, hi = self._bounds(seg)
        if seg.direction > 0:
            return before + self._integral(p2, u - lo)
        return before + self._integral(p2, seg.length) - self._integral(p2, hi - u)


def compute_separatrix(cp: CriticalPoint, branch=1, **kwargs) -> SeparatrixOrbit:
    partners = heteroclinic_partners(cp)
    if partners:
        raise HypothesisError("heteroclinic level set: the saddle connects to another saddle",
                              {"partners": [mp.nstr(x, 12) for x in partners]})
    return SeparatrixOrbit(cp, branch, **kwargs)


def action_T0(sep: SeparatrixOrbit, u):
    """T0(u) = integral of p0^2 over (-inf, u]; exponential tails in closed form."""
    lam, span = sep.cp.lam, sep.span
    u = u + sep.phase_shift
    p_left = sep._real_state(-span)[1]
    left_tail = p_left ** 2 / (2 * lam)
    if u == mp.ninf:
        return mp.mpf(0)
    if u < -span:
        return left_tail * mp.exp(2 * lam * (u + span))
    if u <= span:
        return left_tail + sep._p2_integral_to(u)
    p_right = sep._real_state(span)[1]
    inner = left_tail + sep._p2_integral_to(span)
    if u == mp.inf:
        return inner + p_right ** 2 / (2 * lam)
    return inner + p_right ** 2 / (2 * lam) * (1 - mp.exp(-2 * lam * (u - span)))


# ---------- complex singularities ----------
@dataclass
class SingularityData:
    a: object
    C_plus: object
    C1_hat: object
    C2_hat: object
    M: int
    fit_residual: object
    scan_log: list
    scan_log_distinct: list = field(default_factory=list)
    height_tolerance: object = None
    phase_shift: object = 0
    sign: int = 1
    harmonic_sign: int = 1
    growth_constant: object = None

    def to_dict(self) -> dict:
        c = lambda z: [mp.nstr(mp.re(z), 25), mp.nstr(mp.im(z), 25)]
        return {
            "a": mp.nstr(self.a, 30), "C_plus": c(self.C_plus), "C1_hat": c(self.C1_hat),
            "C2_hat": c(self.C2_hat), "M": self.M, "fit_residual": mp.nstr(self.fit_residual, 5),
            "phase_shift": mp.nstr(self.phase_shift, 20), "sign": self.sign,
            "harmonic_sign": self.harmonic_sign, "growth_constant": c(self.growth_constant),
            "scan_log": [{"ray": mp.nstr(r, 10), "location": None if z is None else c(z)}
                         for r, z in self.scan_log],
        }


class _Chase:
    """Complex-time continuation of (q0, p0) steered onto a pole of p0."""

    def __init__(self, sep: SeparatrixOrbit, stop_distance):
        self.sep = sep
        self.integrator = sep._integrator
        self.stop = stop_distance
        self.dV = sep.cp.potential.diff_x()

    def march_up(self, c, height, blowup=BLOWUP):
        """Vertical continuation from u = c; stops at |p| > blowup or Im u = height."""
        t = mp.mpc(c)
        state = self.sep._real_state(c)
        tol = self.integrator.tol
        while mp.im(t) < height:
            jet = self.integrator.jet(t, state, mp.mpc(0, 1))
            h = jet.suggested_step(tol) or (height - mp.im(t))
            h = min(h, height - mp.im(t))
            state = jet.state(h)
            t += mp.mpc(0, h)
            if abs(state[1]) > blowup:
                break
        return t, state

    def climb(self, c, cap, blowup=BLOWUP):
        """
        First point of the vertical ray from u = c next to a pole of p0: where
        |p0| > blowup, else the first local maximum of |p0| (the ray passes beside
        the pole). None when neither happens below Im u = cap.
        """
        t = mp.mpc(c)
        state = self.sep._real_state(c)
        tol = self.integrator.tol
        rising = False
        while mp.im(t) < cap:
            jet = self.integrator.jet(t, state, mp.mpc(0, 1))
            h = jet.suggested_step(tol) or (cap - mp.im(t))
            h = min(h, cap - mp.im(t))
            following = jet.state(h)
            if abs(following[1]) > blowup:
                return t + mp.mpc(0, h), following
            grows = abs(following[1]) > abs(state[1])
            if rising and not grows:
                return t, state
            rising = grows
            t, state = t + mp.mpc(0, h), following
        return None

    def newton_target(self, t, state):
        q, p = state
        dp = -self.dV.evaluate(q, 0)
        return t + p / dp

    def chase(self, t, state):
        target = self.newton_target(t, state)
        for _ in range(MAX_CHASE):
            jump = target - t
            if abs(jump) < self.stop:
                return target
            move = jump * CHASE_FRACTION
            if abs(move) > MAX_JUMP:
                move = move / abs(move) * MAX_JUMP
            state = self.integrator.propagate(t, state, t + move, real=False).state
            t = t + move
            target = self.newton_target(t, state)
        raise ConvergenceError("singularity chase did not converge",
                               {"last": t, "target": target})


def _extrapolate(vs, values, exponent, terms=FIT_TERMS):
    """
    Least-squares limit of values(v) ~ L + c1 v^e + c2 v^(2e) + ... as v -> 0.

    Columns are powers of v / max|v| so that every column is O(1) at the
    farthest sample.
    """
    scale = max(abs(v) for v in vs)
    ncol = max(1, min(terms, len(vs) - 1))
    A = mp.matrix([[(v / scale) ** (exponent * j) if j else mp.mpf(1) for j in range(ncol)]
                   for v in vs])
    b = mp.matrix(values)
    AH = A.H
    coef = mp.lu_solve(AH * A, AH * b)
    residual = max(abs(values[i] - mp.fsum(A[i, j] * coef[j] for j in range(ncol)))
                   for i in range(len(vs)))
    return coef[0], residual


def _approach(sep: SeparatrixOrbit, location, distances):
    """(u - location, state) on the vertical line below the pole, for decreasing distances."""
    base = mp.re(location)
    t, state = mp.mpc(base), sep._real_state(base)
    out = []
    for r in distances:
        target = location - mp.mpc(0, r)
        state = sep._integrator.propagate(t, state, target, real=False).state
        t = target
        out.append((target - location, state))
    return out


def locate_singularity(sep: SeparatrixOrbit, *, rays=N_RAYS, cap=None,
                       blowup=BLOWUP) -> SingularityData:
    """
    Nearest singularity ia of the separatrix and the constants of its pole.

    The ray Re u = 0 is continued upward until |p0| > blowup, or to the first
    maximum of |p0| when the ray passes beside the pole; Newton steps on 1/p0
    then steer the continuation onto the pole. Further rays chase from
    the same height to populate the HP6 scan log. The pole constants come from
    a Laurent fit on the vertical approach, FIT_FAR down to FIT_NEAR below it.
    """
    M = sep.cp.potential.x_degree()
    cap = cap if cap is not None else 20 / sep.cp.lam
    stop = mp.mpf(10) ** (-mp.dps // 3)
    chaser = _Chase(sep, stop)
    found = chaser.climb(mp.mpf(0), cap, blowup)
    if found is None:
        raise ConvergenceError("no pole of p0 met along the imaginary axis below the cap",
                               {"cap": cap})
    location = chaser.chase(*found)
    scan_log = [(mp.mpf(0), location)]
    height = mp.im(location)
    offsets = [mp.mpf(2 * j) / (rays - 1) - 1 for j in range(rays)] if rays > 1 else []
    for offset in offsets:
        c = 2 * height * offset
        if c == 0:
            continue
        start_t, start_state = chaser.march_up(c, height, blowup)
        try:
            found = chaser.chase(start_t, start_state)
        except ConvergenceError:
            found = None
        scan_log.append((c, found))
    tol = mp.mpf(10) ** (-mp.dps // 4)
    distinct = _dedupe_complex([z for _, z in scan_log if z is not None], tol)
    lowest = min(mp.im(z) for z in distinct)
    at_boundary = [z for z in distinct if mp.im(z) - lowest < tol]
    if len(at_boundary) > 1:
        logger.warning("%d singularities at height %s: HP6 fails", len(at_boundary),
                       mp.nstr(lowest, 12))
    best = min(at_boundary, key=lambda z: abs(mp.re(z)))
    if abs(mp.re(best - location)) > tol or abs(mp.im(best - location)) > tol:
        # the lowest singularity is off the first ray; redo the pole fit there
        start_t, start_state = chaser.march_up(mp.re(best), height, blowup)
        location = chaser.chase(start_t, start_state)

    ratio = (FIT_NEAR / FIT_FAR) ** (mp.mpf(1) / (FIT_SAMPLES - 1))
    close = _approach(sep, location, [FIT_FAR * ratio ** j for j in range(FIT_SAMPLES)])
    vs = [v for v, _ in close]
    exponent = mp.mpf(2) / M
    C_plus, residual = _extrapolate(vs, [v * st[1] for v, st in close], exponent)
    C1, _ = _extrapolate(vs, [mp.cos(st[0]) * v ** exponent for v, st in close], exponent)
    C2, _ = _extrapolate(vs, [mp.sin(st[0]) * v ** exponent for v, st in close], exponent)
    _, last_state = close[-1]
    grow = max((1, -1), key=lambda s: abs(mp.expj(s * M * last_state[0])))
    E, _ = _extrapolate(vs, [mp.expj(grow * M * st[0]) * v ** 2 for v, st in close], exponent)
    expected = mp.mpf(2) / M
    if abs(abs(C_plus) - expected) > mp.mpf(10) ** -6 or abs(mp.re(C_plus)) > mp.mpf(10) ** -6:
        logger.warning("C+ = %s deviates from +-2i/M", mp.nstr(C_plus, 12))
    data = SingularityData(
        a=mp.im(location), C_plus=C_plus, C1_hat=C1, C2_hat=C2, M=M,
        fit_residual=residual, scan_log=scan_log, scan_log_distinct=distinct,
        height_tolerance=tol, phase_shift=mp.re(location),
        sign=1 if mp.im(C_plus) > 0 else -1, harmonic_sign=grow, growth_constant=E,
    )
    logger.info("singularity at u = %s (C+ = %s, %d rays)", mp.nstr(location, 15),
                mp.nstr(C_plus, 12), len(scan_log))
    return data


def _dedupe_complex(values, tol):
    out = []
    for z in values:
        if all(abs(z - w) >= tol for w in out):
            out.append(z)
    return out
