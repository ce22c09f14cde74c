"""
manifold_lab.py – direct measurement of the splitting on the stroboscopic section

Provides:
- PrecisionContext: digits heuristic ceil(0.4343 a/eps) + 40 and a workdps scope
- StroboscopicMap: time-2pi map of the full rescaled system (inverse, Jacobian, action)
- find_periodic_orbit(), periodic_orbit_bounds(): hyperbolic fixed point and its eps-scaling
- compute_manifold(): parameterization P(rho s) = F(P(s)) by DFT fixed-point sweeps
- find_homoclinic_points(): primary intersections near the separatrix apex
- lobe_area(): homoclinic action difference, cross-checked by the boundary integral of y dx
- gap_spectrum(): share of the manifold gap carried by the period-2pi*eps mode
"""
import logging
import time
from dataclasses import dataclass, field

import numpy as np
from mpmath import mp

from .errors import ConvergenceError, HypothesisError, PrecisionError
from .model_core import RescaledSystem, Topology
from .separatrix_analysis import SeparatrixOrbit
from .taylor import TaylorIntegrator, horner, horner_derivative

logger = logging.getLogger(__name__)

# ---------- knobs ----------
EXTRA_DIGITS      = 40
MANIFOLD_ORDER    = 40
MAX_HALVINGS      = 8
NEWTON_ITERATIONS = 40
ARC_NODES         = 24
AREA_NODES        = 16
SEARCH_PERIODS    = mp.mpf("1.5")


class Method:
    ACTION, BOUNDARY = "action", "boundary-integral"


# ---------- precision ----------
@dataclass(frozen=True)
class PrecisionContext:
    digits: int

    @staticmethod
    def required(a, epsilon, extra=EXTRA_DIGITS) -> int:
        return int(mp.ceil(a / (epsilon * mp.log(10)))) + extra

    @classmethod
    def for_splitting(cls, a, epsilon, *, extra=EXTRA_DIGITS, floor=30) -> "PrecisionContext":
        return cls(max(floor, cls.required(a, epsilon, extra)))

    def check(self, a, epsilon):
        needed = self.required(a, epsilon)
        if self.digits < needed:
            raise PrecisionError(f"{self.digits} digits are not enough at eps={mp.nstr(epsilon, 6)}",
                                 {"digits": self.digits, "needed": needed})

    def scope(self):
        return mp.workdps(self.digits)


# ---------- the map ----------
@dataclass
class MapStep:
    state: tuple
    action: object
    tangents: list = field(default_factory=list)

    @property
    def jacobian(self):
        (a, c), (b, d) = self.tangents[:2]
        return mp.matrix([[a, b], [c, d]])


class StroboscopicMap:
    """
    Time-2pi map tau0 -> tau0 + 2pi of x' = eps H_y, y' = -eps H_x.

    The action of one step is the integral of y dx - eps H dtau; for the
    inverse map it is accumulated along decreasing tau.
    """

    def __init__(self, sys: RescaledSystem, epsilon, mu=1, *, tau0=0, tol=None, order=None):
        self.sys = sys
        self.epsilon = epsilon
        self.mu = mu
        self.tau0 = tau0
        H = sys.hamiltonian(epsilon, mu)
        self._plain = TaylorIntegrator(H, epsilon, tol=tol, order=order, action=True)
        self._variational = TaylorIntegrator(H, epsilon, tol=tol, order=order, tangents=True,
                                             action=True)
        self.tol = self._plain.tol
        self._energy = sys.unperturbed()

    @property
    def period(self):
        return 2 * mp.pi

    def apply(self, state, *, inverse=False, tangent_vectors=()) -> MapStep:
        t1 = self.tau0 - self.period if inverse else self.tau0 + self.period
        integrator = self._variational if tangent_vectors else self._plain
        result = integrator.propagate(self.tau0, state, t1, tangent_vectors=tangent_vectors)
        return MapStep(result.state, result.action, result.tangents)

    def __call__(self, state):
        return self.apply(state).state

    def inverse(self, state):
        return self.apply(state, inverse=True).state

    def with_jacobian(self, state, *, inverse=False) -> MapStep:
        return self.apply(state, inverse=inverse,
                          tangent_vectors=((mp.mpf(1), mp.mpf(0)), (mp.mpf(0), mp.mpf(1))))

    def jacobian_determinant(self, state):
        return mp.det(self.with_jacobian(state).jacobian)

    def energy(self, state):
        return mp.re(self._energy.evaluate(state[0], state[1]))


# ---------- periodic orbit ----------
@dataclass
class PeriodicOrbitResult:
    fixed_point: tuple
    multipliers: tuple
    eigenvectors: tuple
    jacobian: object
    residual: object
    iterations: int
    epsilon: object
    mu: object
    action: object
    bound_constant: object = None
    offset: tuple = (0, 0)

    @property
    def lam_eff(self):
        return mp.log(self.multipliers[0]) / (2 * mp.pi * self.epsilon)


def _unit(v):
    n = mp.sqrt(v[0] ** 2 + v[1] ** 2)
    return (v[0] / n, v[1] / n)


def _eigenvector(J, rho):
    first = (J[0, 1], rho - J[0, 0])
    second = (rho - J[1, 1], J[1, 0])
    v = first if max(abs(first[0]), abs(first[1])) >= max(abs(second[0]), abs(second[1])) else second
    return _unit(v)


def find_periodic_orbit(smap: StroboscopicMap, guess=None, *, tol=None,
                        max_iter=NEWTON_ITERATIONS) -> PeriodicOrbitResult:
    """
    Newton on F(z) - z with the variational Jacobian, seeded at the saddle (or the origin).

    ``offset`` and ``bound_constant`` measure the fixed point against the seed.
    """
    tol = tol if tol is not None else mp.mpf(10) ** (-(mp.dps - 10))
    z = tuple(mp.mpf(c) for c in guess) if guess is not None else (mp.mpf(0), mp.mpf(0))
    start = z
    identity = mp.eye(2)
    for iteration in range(1, max_iter + 1):
        step = smap.with_jacobian(z)
        G = mp.matrix([step.state[0] - z[0], step.state[1] - z[1]])
        residual = max(abs(G[0]), abs(G[1]))
        logger.debug("periodic orbit Newton %d: residual %s", iteration, mp.nstr(residual, 5))
        if residual <= tol:
            break
        dz = mp.lu_solve(step.jacobian - identity, -G)
        z = (z[0] + dz[0], z[1] + dz[1])
        if abs(dz[0]) + abs(dz[1]) > 10:
            raise ConvergenceError("periodic orbit Newton diverged", {"iteration": iteration, "z": z})
    else:
        raise ConvergenceError("periodic orbit Newton did not converge",
                               {"residual": residual, "iterations": max_iter})
    J = step.jacobian
    trace, det = J[0, 0] + J[1, 1], mp.det(J)
    if abs(det - 1) > mp.mpf(10) ** (-(mp.dps - 15)):
        logger.warning("stroboscopic map not area preserving: det J - 1 = %s", mp.nstr(det - 1, 5))
    disc = trace ** 2 - 4 * det
    if disc <= 0 or trace <= 2:
        raise HypothesisError("fixed point is not hyperbolic", {"trace": trace, "det": det})
    rho_u = (trace + mp.sqrt(disc)) / 2
    rho_s = det / rho_u
    offset = (z[0] - start[0], z[1] - start[1])
    bound = None
    if smap.mu != 0:
        eps, mu = smap.epsilon, abs(smap.mu)
        bound = max(abs(offset[0]) / (mu * eps ** 2), abs(offset[1]) / (mu * eps))
    action = smap.apply(z).action
    result = PeriodicOrbitResult(z, (rho_u, rho_s), (_eigenvector(J, rho_u), _eigenvector(J, rho_s)),
                                 J, residual, iteration, smap.epsilon, smap.mu, action, bound, offset)
    logger.info("periodic orbit at eps=%s: (%s, %s), rho_u=%s", mp.nstr(smap.epsilon, 8),
                mp.nstr(z[0], 8), mp.nstr(z[1], 8), mp.nstr(rho_u, 12))
    return result


def periodic_orbit_bounds(results):
    """Empirical K and log-log slopes of the fixed point offsets against eps."""
    def slope(values):
        pairs = [(float(mp.log(r.epsilon)), float(mp.log(abs(v)))) for r, v in zip(results, values)
                 if v != 0]
        if len(pairs) < 2:
            return None
        xs, ys = zip(*pairs)
        return float(np.polyfit(xs, ys, 1)[0])

    K = max((r.bound_constant for r in results if r.bound_constant is not None), default=None)
    return {"K": K,
            "x_slope": slope([r.offset[0] for r in results]),
            "y_slope": slope([r.offset[1] for r in results])}


# ---------- manifolds ----------
@dataclass
class ManifoldPoint:
    theta: object
    state: tuple
    tangent: tuple
    iterates: int
    local_parameter: object
    actions: list


@dataclass
class ManifoldParametrization:
    """
    P(s) = sum P_n s^n with P(rho s) = G(P(s)); G = F (unstable) or F^-1 (stable).

    Global points: W(theta) = G^k(P(e^theta / rho^k)) with e^theta / rho^k <= s0.
    """
    branch: str
    side: int
    coeffs: list
    rho: object
    s0: object
    residual: object
    action_coeffs: list
    smap: StroboscopicMap
    fixed_point: tuple
    shift: object = 0
    radius: object = None
    sweeps: int = 0
    topology: str = Topology.GRAPH
    separatrix: SeparatrixOrbit = None

    @property
    def inverse(self) -> bool:
        return self.branch == "s"

    @property
    def log_rho(self):
        return mp.log(self.rho)

    def local(self, s):
        return horner([c[0] for c in self.coeffs], s), horner([c[1] for c in self.coeffs], s)

    def local_derivative(self, s):
        return (horner_derivative([c[0] for c in self.coeffs], s),
                horner_derivative([c[1] for c in self.coeffs], s))

    def local_action(self, s):
        """Action of one step of G started at P(s)."""
        return horner(self.action_coeffs, s)

    def iterates_for(self, theta) -> int:
        excess = (theta - mp.log(self.s0)) / self.log_rho
        return max(0, int(mp.ceil(excess - mp.mpf(10) ** (-mp.dps // 2))))

    def global_point(self, theta, *, tangent=False) -> ManifoldPoint:
        k = self.iterates_for(theta)
        s = mp.exp(theta) / self.rho ** k
        state = self.local(s)
        vectors = ()
        if tangent:
            dx, dy = self.local_derivative(s)
            vectors = ((dx * s, dy * s),)
        actions = []
        for _ in range(k):
            step = self.smap.apply(state, inverse=self.inverse, tangent_vectors=vectors)
            state, vectors = step.state, step.tangents
            actions.append(step.action)
        x, y = state
        return ManifoldPoint(theta, (x + self.shift, y), vectors[0] if tangent else None, k, s, actions)

    def apex_value(self, point: ManifoldPoint):
        return self.separatrix.apex_coordinate(*point.state)

    def tail_action(self, s):
        """Sum over the remaining orbit inside the local domain, as a geometric series."""
        total = mp.mpf(0)
        for m, c in enumerate(self.action_coeffs[1:], start=1):
            total += c * s ** m / (self.rho ** m - 1)
        last = abs(self.action_coeffs[-1] * s ** (len(self.action_coeffs) - 1))
        return total, last


def _dft(values, count):
    K = len(values)
    return [mp.fsum(v * mp.expj(-2 * mp.pi * j * n / K) for j, v in enumerate(values)) / K
            for n in range(count)]


def _orientation(separatrix: SeparatrixOrbit, branch):
    """(y-sign of the eigenvector, x-shift of the branch) for the loop of ``separatrix``."""
    side = separatrix.branch
    if branch == "u":
        return side, mp.mpf(0)
    if separatrix.cp.topology == Topology.GRAPH:
        return side, 2 * mp.pi * side
    return -side, mp.mpf(0)


def _residual_at(smap, coeffs, rho, s, inverse):
    worst = mp.mpf(0)
    for sigma in (s, -s):
        state = (horner([c[0] for c in coeffs], sigma), horner([c[1] for c in coeffs], sigma))
        image = smap.apply(state, inverse=inverse).state
        target = (horner([c[0] for c in coeffs], rho * sigma), horner([c[1] for c in coeffs], rho * sigma))
        worst = max(worst, abs(image[0] - target[0]), abs(image[1] - target[1]))
    return worst


def compute_manifold(smap: StroboscopicMap, po: PeriodicOrbitResult, branch="u",
                     order=MANIFOLD_ORDER, tol=None, *, separatrix: SeparatrixOrbit,
                     radius=None, samples=None) -> ManifoldParametrization:
    """
    Taylor coefficients of the conjugacy P(rho s) = G(P(s)) to order ``order``.

    Each sweep samples G(P(sigma)) on |sigma| = 1, reads [G o P]_n from a DFT
    and updates P_n = (rho^n - A)^-1 ([G o P]_n - A P_n), A = DG at the fixed
    point. Order n is exact after n - 1 sweeps; the radius |P_1| is halved when
    the sweeps diverge.
    """
    if branch not in ("u", "s"):
        raise ValueError("branch must be 'u' or 's'")
    tol = tol if tol is not None else mp.mpf(10) ** (-(mp.dps - 10))
    inverse = branch == "s"
    rho = po.multipliers[0] if branch == "u" else 1 / po.multipliers[1]
    A = po.jacobian if branch == "u" else mp.inverse(po.jacobian)
    v = po.eigenvectors[0] if branch == "u" else po.eigenvectors[1]
    sign, shift = _orientation(separatrix, branch)
    if v[1] * sign < 0:
        v = (-v[0], -v[1])
    count = samples if samples is not None else 2 * order + 2
    r = radius if radius is not None else mp.mpf(1) / (2 * rho)
    z0 = po.fixed_point
    sigmas = [mp.expj(2 * mp.pi * j / count) for j in range(count)]

    for halving in range(MAX_HALVINGS):
        coeffs = [(mp.mpc(z0[0]), mp.mpc(z0[1])), (r * v[0], r * v[1])]
        coeffs += [(mp.mpc(0), mp.mpc(0)) for _ in range(order - 1)]
        diverged, sweeps, change = False, 0, None
        for sweeps in range(1, order + 4):
            try:
                steps = [smap.apply((horner([c[0] for c in coeffs], s), horner([c[1] for c in coeffs], s)),
                                    inverse=inverse) for s in sigmas]
            except ConvergenceError:
                diverged = True
                break
            gx = _dft([st.state[0] for st in steps], order + 1)
            gy = _dft([st.state[1] for st in steps], order + 1)
            updated = coeffs[:2]
            for n in range(2, order + 1):
                Pn = mp.matrix([coeffs[n][0], coeffs[n][1]])
                rhs = mp.matrix([gx[n], gy[n]]) - A * Pn
                try:
                    new = mp.lu_solve(rho ** n * mp.eye(2) - A, rhs)
                except ZeroDivisionError as exc:
                    raise ConvergenceError("resonant multiplier in the conjugacy equation",
                                           {"order": n}) from exc
                updated.append((new[0], new[1]))
            change = max(max(abs(a[0] - b[0]), abs(a[1] - b[1])) for a, b in zip(updated, coeffs))
            coeffs = updated
            size = max(max(abs(c[0]), abs(c[1])) for c in coeffs[1:])
            logger.debug("manifold %s sweep %d: change %s", branch, sweeps, mp.nstr(change, 5))
            if size > 10 ** 6:
                diverged = True
                break
            if change <= tol:
                break
        else:
            diverged = True
        if not diverged:
            break
        logger.info("manifold %s sweeps diverged at radius %s; halving", branch, mp.nstr(r, 6))
        r /= 2
    else:
        raise ConvergenceError("manifold parameterization did not converge",
                               {"branch": branch, "radius": r, "change": change})

    imaginary = max(max(abs(mp.im(c[0])), abs(mp.im(c[1]))) for c in coeffs)
    if imaginary > mp.sqrt(tol):
        logger.warning("manifold coefficients have imaginary parts up to %s", mp.nstr(imaginary, 5))
    coeffs = [(mp.re(c[0]), mp.re(c[1])) for c in coeffs]
    actions = [mp.re(c) for c in _dft([st.action for st in steps], order + 1)]

    s0, residual = None, None
    for level in range(16):
        s = mp.mpf(2) ** -level
        residual = _residual_at(smap, coeffs, rho, s, inverse)
        if residual <= tol:
            s0 = s
            break
    if s0 is None:
        raise PrecisionError("conjugacy residual floor above tolerance",
                             {"branch": branch, "residual": residual, "tol": tol})
    manifold = ManifoldParametrization(
        branch=branch, side=separatrix.branch, coeffs=coeffs, rho=rho, s0=s0, residual=residual,
        action_coeffs=actions, smap=smap, fixed_point=z0, shift=shift, radius=r, sweeps=sweeps,
        topology=separatrix.cp.topology, separatrix=separatrix,
    )
    logger.info("manifold %s: order %d, %d sweeps, s0=%s, residual %s", branch, order, sweeps,
                mp.nstr(s0, 5), mp.nstr(residual, 5))
    return manifold


# ---------- Chebyshev helpers ----------
def chebyshev_lobatto(n, lo, hi):
    """n+1 nodes lo..hi (order of increasing cosine argument: hi first)."""
    mid, half = (lo + hi) / 2, (hi - lo) / 2
    return [mid + half * mp.cos(mp.pi * j / n) for j in range(n + 1)]


def barycentric(nodes, values, t):
    """Barycentric interpolation on Chebyshev–Lobatto nodes."""
    n = len(nodes) - 1
    num, den = 0, 0
    for j, (x, f) in enumerate(zip(nodes, values)):
        if t == x:
            return f
        w = (-1) ** j * (mp.mpf(1) / 2 if j in (0, n) else 1) / (t - x)
        num += w * f
        den += w
    return num / den


def clenshaw_curtis_weights(n):
    """Weights on [-1, 1] for the nodes cos(pi j / n), n even."""
    weights = []
    for j in range(n + 1):
        acc = mp.mpf(0)
        for k in range(1, n // 2 + 1):
            b = 1 if 2 * k == n else 2
            acc += b * mp.cos(2 * k * j * mp.pi / n) / (4 * k * k - 1)
        c = 1 if j in (0, n) else 2
        weights.append(c * (1 - acc) / n)
    return weights


# ---------- homoclinic points ----------
@dataclass
class ArcSample:
    manifold: ManifoldParametrization
    nodes: list
    points: list

    def state(self, theta):
        return (barycentric(self.nodes, [p.state[0] for p in self.points], theta),
                barycentric(self.nodes, [p.state[1] for p in self.points], theta))

    def apex(self, theta):
        return self.manifold.separatrix.apex_coordinate(*self.state(theta))

    def solve_apex(self, target):
        """theta on this arc with apex coordinate ``target`` (None when out of range)."""
        values = [self.manifold.apex_value(p) for p in self.points]
        order = sorted(range(len(self.nodes)), key=lambda j: self.nodes[j])
        for a, b in zip(order[:-1], order[1:]):
            if (values[a] - target) * (values[b] - target) <= 0:
                lo, hi = self.nodes[a], self.nodes[b]
                if values[a] == target:
                    return lo
                f = lambda th: self.apex(th) - target
                try:
                    return mp.findroot(f, (lo, hi), solver="anderson")
                except (ValueError, ZeroDivisionError):
                    return mp.findroot(f, (lo, hi), solver="bisect")
        return None


@dataclass
class HomoclinicData:
    points: list
    theta_u: list
    theta_s: list
    angles: list
    W_u: ManifoldParametrization
    W_s: ManifoldParametrization
    arcs: tuple
    gaps: list
    apex_theta: tuple
    tangency: bool = False
    pair: tuple = (0, 1)

    @property
    def angle(self):
        return self.angles[self.pair[0]] if self.angles else mp.mpf(0)


def _transverse(topology, state):
    return state[1] if topology == Topology.GRAPH else state[0]


def _apex_theta(W: ManifoldParametrization):
    """theta where the global manifold crosses the apex coordinate 0."""
    theta = mp.log(W.s0)
    previous = W.apex_value(W.global_point(theta))
    for _ in range(200):
        following = W.apex_value(W.global_point(theta + W.log_rho))
        if previous * following <= 0:
            f = lambda th: W.apex_value(W.global_point(th))
            return mp.findroot(f, (theta, theta + W.log_rho), solver="anderson")
        theta += W.log_rho
        previous = following
    raise ConvergenceError("manifold never reaches the separatrix apex", {"branch": W.branch})


def _sample_arc(W, centre, periods, nodes):
    half = periods * W.log_rho / 2
    thetas = chebyshev_lobatto(nodes, centre - half, centre + half)
    return ArcSample(W, thetas, [W.global_point(t, tangent=True) for t in thetas])


def _refine(W_u, W_s, theta_u, theta_s, tol, max_iter=30):
    for _ in range(max_iter):
        pu = W_u.global_point(theta_u, tangent=True)
        ps = W_s.global_point(theta_s, tangent=True)
        gap = mp.matrix([pu.state[0] - ps.state[0], pu.state[1] - ps.state[1]])
        if max(abs(gap[0]), abs(gap[1])) <= tol:
            return theta_u, theta_s, pu, ps
        J = mp.matrix([[pu.tangent[0], -ps.tangent[0]], [pu.tangent[1], -ps.tangent[1]]])
        step = mp.lu_solve(J, -gap)
        theta_u += step[0]
        theta_s += step[1]
    raise ConvergenceError("homoclinic Newton did not converge", {"gap": gap})


def _angle(tu, ts):
    cross = tu[0] * ts[1] - tu[1] * ts[0]
    dot = tu[0] * ts[0] + tu[1] * ts[1]
    angle = mp.atan2(abs(cross), dot)
    return min(angle, mp.pi - angle)


def find_homoclinic_points(W_u: ManifoldParametrization, W_s: ManifoldParametrization, *,
                           nodes=ARC_NODES, periods=SEARCH_PERIODS, tol=None) -> HomoclinicData:
    """
    Primary homoclinic points near the apex of the separatrix loop.

    Both manifolds are sampled over ``periods`` fundamental domains around
    their apex crossing. The gap in the transverse coordinate at equal apex
    coordinate brackets the intersections, which Newton then refines on the
    pair (theta_u, theta_s).
    """
    tol = tol if tol is not None else mp.mpf(10) ** (-(mp.dps - 12))
    topology = W_u.topology
    apex = (_apex_theta(W_u), _apex_theta(W_s))
    arc_u = _sample_arc(W_u, apex[0], periods, nodes)
    arc_s = _sample_arc(W_s, apex[1], periods, nodes)
    gaps = []
    for theta, point in sorted(zip(arc_u.nodes, arc_u.points), key=lambda p: p[0]):
        match = arc_s.solve_apex(W_u.apex_value(point))
        if match is None:
            continue
        gaps.append((theta, match, _transverse(topology, point.state)
                     - _transverse(topology, arc_s.state(match))))
    scale = max((abs(g) for _, _, g in gaps), default=mp.mpf(0))
    found = []
    # mu = 0: the gaps are round-off and their signs carry no information
    brackets = zip(gaps[:-1], gaps[1:]) if W_u.smap.mu != 0 else ()
    for (t1, s1, g1), (t2, s2, g2) in brackets:
        if g1 == 0 or g1 * g2 < 0:
            w = g1 / (g1 - g2) if g1 != g2 else 0
            found.append(_refine(W_u, W_s, t1 + w * (t2 - t1), s1 + w * (s2 - s1), tol))
    if not found:
        if scale <= mp.sqrt(tol) or W_u.smap.mu == 0:
            logger.warning("manifolds coincide to %s: tangency, no transversal homoclinic points",
                           mp.nstr(scale, 5))
            return HomoclinicData([], [], [], [], W_u, W_s, (arc_u, arc_s), gaps, apex, tangency=True)
        raise PrecisionError("no homoclinic intersection found in the search window",
                             {"max_gap": scale, "nodes": nodes})
    found.sort(key=lambda f: f[0])
    points = [pu.state for _, _, pu, _ in found]
    angles = [_angle(pu.tangent, ps.tangent) for _, _, pu, ps in found]
    pair = (0, 1)
    if len(found) >= 2:
        best = min(range(len(found) - 1), key=lambda i: abs((found[i][0] + found[i + 1][0]) / 2 - apex[0]))
        pair = (best, best + 1)
    logger.info("%d homoclinic points, splitting angle %s", len(found),
                mp.nstr(angles[pair[0]], 8))
    return HomoclinicData(points, [f[0] for f in found], [f[1] for f in found], angles, W_u, W_s,
                          (arc_u, arc_s), gaps, apex, pair=pair)


# ---------- lobe area ----------
@dataclass
class LobeSample:
    epsilon: object
    mu: object
    area: object
    method: str
    err_est: object
    digits: int
    runtime: float = 0.0
    angle: object = 0
    flagged: bool = False
    cross_check: "LobeSample" = None

    def to_rows(self):
        rows = [self]
        if self.cross_check is not None:
            rows.append(self.cross_check)
        return [{"epsilon": r.epsilon, "mu": r.mu, "digits": r.digits, "area": r.area,
                 "err_est": r.err_est, "method": r.method, "angle": r.angle,
                 "runtime_s": r.runtime, "flagged": r.flagged} for r in rows]


def _homoclinic_action(hom: HomoclinicData, index):
    """Sum over the whole orbit of S(F^j h) - S(z_p), with geometric tails."""
    W_u, W_s = hom.W_u, hom.W_s
    S_p = W_u.action_coeffs[0]
    pu = W_u.global_point(hom.theta_u[index])
    ps = W_s.global_point(hom.theta_s[index])
    tail_u, last_u = W_u.tail_action(pu.local_parameter)
    tail_s, last_s = W_s.tail_action(ps.local_parameter)
    backward = mp.fsum(a - S_p for a in pu.actions) + tail_u
    forward = mp.fsum(-b - S_p for b in ps.actions) - tail_s
    terms = list(pu.actions) + list(ps.actions) + [S_p]
    error = last_u + last_s + W_u.smap.tol * (1 + max(abs(t) for t in terms)) * (len(terms) + 1)
    return backward + forward, error


def _arc_integral(W, lo, hi, n):
    """Integral of y dx along W between theta = lo and hi; Clenshaw–Curtis on n+1 nodes."""
    thetas = chebyshev_lobatto(n, lo, hi)
    weights = clenshaw_curtis_weights(n)
    points = [W.global_point(t, tangent=True) for t in thetas]
    values = [p.state[1] * p.tangent[0] for p in points]
    half = (hi - lo) / 2
    fine = half * mp.fsum(w * f for w, f in zip(weights, values))
    coarse_weights = clenshaw_curtis_weights(n // 2)
    coarse = half * mp.fsum(w * f for w, f in zip(coarse_weights, values[::2]))
    return fine, abs(fine - coarse)


def lobe_area(hom: HomoclinicData, pair=None, *, nodes=AREA_NODES) -> LobeSample:
    """Area between the manifolds and two adjacent homoclinic points, by two methods."""
    started = time.perf_counter()
    smap = hom.W_u.smap
    if hom.tangency:
        zero = LobeSample(smap.epsilon, smap.mu, mp.mpf(0), Method.ACTION, smap.tol, mp.dps)
        zero.cross_check = LobeSample(smap.epsilon, smap.mu, mp.mpf(0), Method.BOUNDARY, smap.tol, mp.dps)
        return zero
    i, j = pair if pair is not None else hom.pair
    if j >= len(hom.points):
        raise ConvergenceError("need two homoclinic points for a lobe", {"found": len(hom.points)})
    action_i, err_i = _homoclinic_action(hom, i)
    action_j, err_j = _homoclinic_action(hom, j)
    area = abs(action_i - action_j)
    err = err_i + err_j

    along_u, err_u = _arc_integral(hom.W_u, hom.theta_u[i], hom.theta_u[j], nodes)
    along_s, err_s = _arc_integral(hom.W_s, hom.theta_s[i], hom.theta_s[j], nodes)
    boundary = abs(along_u - along_s)
    err_b = err_u + err_s
    flagged = abs(area - boundary) > 10 * (err + err_b) + mp.mpf(10) ** (-(mp.dps - 15))
    if flagged:
        logger.warning("lobe area methods disagree at eps=%s: %s vs %s", mp.nstr(smap.epsilon, 6),
                       mp.nstr(area, 15), mp.nstr(boundary, 15))
    runtime = time.perf_counter() - started
    angle = hom.angles[i]
    cross = LobeSample(smap.epsilon, smap.mu, boundary, Method.BOUNDARY, err_b, mp.dps, runtime, angle,
                       flagged)
    sample = LobeSample(smap.epsilon, smap.mu, area, Method.ACTION, err, mp.dps, runtime, angle,
                        flagged, cross)
    logger.info("lobe area at eps=%s mu=%s: %s (boundary %s)", mp.nstr(smap.epsilon, 8),
                mp.nstr(smap.mu, 6), mp.nstr(area, 15), mp.nstr(boundary, 15))
    return sample


# ---------- gap spectrum ----------
@dataclass
class GapSpectrum:
    fraction: float
    gaps: list
    power: list


def _power_spectrum(values):
    """|DFT|^2 of the samples in working precision; gaps far below float range keep their shape."""
    return [abs(c) ** 2 for c in _dft(values, len(values))]


def gap_spectrum(hom: HomoclinicData, samples_per_period=16, periods=1) -> GapSpectrum:
    """H0(W^u) - H0(W^s) at equal apex coordinate, uniformly in flight time over whole periods."""
    arc_u, arc_s = hom.arcs
    W_u = hom.W_u
    count = samples_per_period * periods
    start = hom.apex_theta[0] - periods * W_u.log_rho / 2
    gaps = []
    for j in range(count):
        theta = start + periods * W_u.log_rho * j / count
        state_u = arc_u.state(theta)
        match = arc_s.solve_apex(W_u.separatrix.apex_coordinate(*state_u))
        if match is None:
            raise ConvergenceError("gap sample outside the stable arc", {"theta": theta})
        gaps.append(W_u.smap.energy(state_u) - W_u.smap.energy(arc_s.state(match)))
    mean = mp.fsum(gaps) / count
    power = _power_spectrum([g - mean for g in gaps])
    total = mp.fsum(power[1:])
    dominant = power[periods] + power[-periods]
    fraction = float(dominant / total) if total > 0 else 0.0
    logger.info("gap spectrum: %.4f of the energy in the period-2pi*eps mode", fraction)
    return GapSpectrum(fraction, gaps, power)
