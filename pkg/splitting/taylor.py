"""
taylor.py – high-order Taylor integration of Hamiltonian flows

Provides:
- FlowJet: Taylor coefficients of  x' = s*H_y, y' = -s*H_x  for a TrigPolynomial H,
  optionally with tangent vectors (first-order jet transport) and the
  action integral  S' = s*(y*H_y - H)
- TaylorIntegrator: adaptive-step propagation in real or complex time
- Segment: dense output of one accepted step
- horner, step_size: series helpers shared with the inner solver
"""
import logging
from dataclasses import dataclass, field

from mpmath import mp

from .errors import ConvergenceError
from .fourier import TrigPolynomial

logger = logging.getLogger(__name__)

# ---------- knobs ----------
SAFETY       = mp.mpf("0.9")
MIN_ORDER    = 12
MAX_STEPS    = 200000


def default_tolerance():
    return mp.mpf(10) ** (-(mp.dps - 3))


def default_order(tol) -> int:
    """Order minimising work per unit time for a given tolerance."""
    return max(MIN_ORDER, int(mp.ceil(-mp.log(tol) / 2)) + 1)


def horner(coeffs, h):
    acc = coeffs[-1]
    for c in reversed(coeffs[:-1]):
        acc = acc * h + c
    return acc


def horner_derivative(coeffs, h):
    acc = 0
    for n in range(len(coeffs) - 1, 0, -1):
        acc = acc * h + n * coeffs[n]
    return acc


def step_size(norms, tol):
    """
    Step from the last two coefficient norms of an order-K series.

    norms[j] is the magnitude of the coefficient of order len(norms)-2+j.
    """
    order = len(norms) - 2
    best = None
    for j, size in enumerate(norms[-2:]):
        degree = order + j
        if size == 0 or degree == 0:
            continue
        h = (tol / size) ** (mp.mpf(1) / degree)
        best = h if best is None else min(best, h)
    return None if best is None else SAFETY * best


def _conv(a, b, n):
    return mp.fdot(a[: n + 1], b[n::-1])


class _Monomials:
    """Monomial table of one TrigPolynomial, pre-scaled."""

    def __init__(self, poly: TrigPolynomial, factor=1):
        self.items = [(factor * c, k, p, q) for c, k, p, q in poly.monomials()]


class FlowJet:
    """
    Taylor jets of a Hamiltonian flow with time scale ``scale``.

    Time enters only through e^{iq tau}; complex time is handled by a
    unit direction d so that jets are series in a real arclength.
    """

    def __init__(self, hamiltonian: TrigPolynomial, scale=1, *,
                 tangents=False, action=False):
        self.hamiltonian = hamiltonian
        self.scale = scale
        self.tangents = tangents
        self.action = action
        hx, hy = hamiltonian.diff_x(), hamiltonian.diff_y()
        self._polys = {"hx": _Monomials(hx), "hy": _Monomials(hy)}
        if tangents:
            self._polys["hxx"] = _Monomials(hx.diff_x())
            self._polys["hxy"] = _Monomials(hx.diff_y())
            self._polys["hyy"] = _Monomials(hy.diff_y())
        if action:
            y = TrigPolynomial({(0, 1, 0): 1})
            self._polys["lagr"] = _Monomials(y * hy - hamiltonian)
        self._ks = sorted({k for m in self._polys.values() for _, k, _, _ in m.items if k})
        self._ps = max((p for m in self._polys.values() for _, _, p, _ in m.items), default=0)
        self._kq = sorted({(k, q) for m in self._polys.values() for _, k, _, q in m.items})
        self.autonomous = all(q == 0 for _, q in self._kq)

    def expand(self, t0, x0, y0, order, direction=1, tangent_vectors=(), real=False):
        """Return a Jet of the given order at time t0."""
        X, Y = [x0], [y0]
        E = {k: [mp.expj(k * x0)] for k in self._ks}
        P = {0: [mp.mpf(1)] + [mp.mpf(0)] * order}
        for p in range(1, self._ps + 1):
            P[p] = [y0 ** p]
        T = {}
        for _, q in self._kq:
            if q not in T:
                base = mp.expj(q * t0) if q else mp.mpf(1)
                rate = mp.mpc(0, q) * direction
                coeffs = [base]
                for n in range(1, order + 1):
                    coeffs.append(coeffs[-1] * rate / n)
                T[q] = coeffs
        ET = {}
        series = {name: [] for name in self._polys}
        tans = [([u], [w]) for u, w in tangent_vectors]
        S = [mp.mpf(0)]
        speed = self.scale * direction

        for n in range(order):
            if n:
                for k, ek in E.items():
                    ik = mp.mpc(0, k)
                    ek.append(ik / n * mp.fdot([j * X[j] for j in range(1, n + 1)],
                                               ek[n - 1::-1]))
                for p in range(1, self._ps + 1):
                    P[p].append(_conv(P[p - 1], Y, n) if p > 1 else Y[n])
            for k, q in self._kq:
                ek = E[k] if k else P[0]
                if q == 0:
                    ET[(k, q)] = ek
                else:
                    ET.setdefault((k, q), []).append(_conv(ek, T[q], n))
            for name, mono in self._polys.items():
                acc = mp.mpf(0)
                for c, k, p, q in mono.items:
                    et = ET[(k, q)]
                    if p == 0:
                        acc += c * et[n]
                    elif k == 0 and q == 0:
                        acc += c * P[p][n]
                    else:
                        acc += c * _conv(et, P[p], n)
                series[name].append(acc)
            dx = speed * series["hy"][n] / (n + 1)
            dy = -speed * series["hx"][n] / (n + 1)
            if real:
                dx, dy = mp.re(dx), mp.re(dy)
            X.append(dx)
            Y.append(dy)
            for U, W in tans:
                du = speed * (_conv(series["hxy"], U, n) + _conv(series["hyy"], W, n)) / (n + 1)
                dw = -speed * (_conv(series["hxx"], U, n) + _conv(series["hxy"], W, n)) / (n + 1)
                if real:
                    du, dw = mp.re(du), mp.re(dw)
                U.append(du)
                W.append(dw)
            if self.action:
                ds = speed * series["lagr"][n] / (n + 1)
                S.append(mp.re(ds) if real else ds)
        return Jet(t0=t0, direction=direction, x=X, y=Y, tangents=tans,
                   action=S if self.action else None)


@dataclass
class Jet:
    t0: object
    direction: object
    x: list
    y: list
    tangents: list = field(default_factory=list)
    action: list = None

    @property
    def order(self) -> int:
        return len(self.x) - 1

    def state(self, h):
        return horner(self.x, h), horner(self.y, h)

    def velocity(self, h):
        """d(x, y)/dt along the direction, i.e. per unit arclength / direction."""
        return (horner_derivative(self.x, h) / self.direction,
                horner_derivative(self.y, h) / self.direction)

    def tangent_states(self, h):
        return [(horner(U, h), horner(W, h)) for U, W in self.tangents]

    def action_at(self, h):
        return horner(self.action, h) if self.action is not None else None

    def suggested_step(self, tol):
        scale = max(mp.mpf(1), abs(self.x[0]), abs(self.y[0]))
        norms = [max(abs(self.x[n]), abs(self.y[n])) for n in range(len(self.x))]
        return step_size(norms, tol * scale)


@dataclass
class Segment:
    """Dense output: state(t) for t = t0 + direction*s, 0 <= s <= length."""
    t0: object
    direction: object
    length: object
    x: list
    y: list

    def contains(self, t) -> bool:
        s = mp.re((t - self.t0) / self.direction)
        return -mp.eps * 8 <= s <= self.length * (1 + mp.eps * 8)

    def state(self, t):
        s = (t - self.t0) / self.direction
        return horner(self.x, s), horner(self.y, s)


@dataclass
class FlowResult:
    time: object
    state: tuple
    tangents: list
    action: object
    steps: int
    segments: list


class TaylorIntegrator:
    """Adaptive Taylor integration of a FlowJet along straight time segments."""

    def __init__(self, hamiltonian: TrigPolynomial, scale=1, *, tol=None, order=None,
                 tangents=False, action=False, max_steps=MAX_STEPS):
        self.tol = tol if tol is not None else default_tolerance()
        self.order = order if order is not None else default_order(self.tol)
        self.jets = FlowJet(hamiltonian, scale, tangents=tangents, action=action)
        self.max_steps = max_steps

    def jet(self, t, state, direction=1, tangent_vectors=(), real=False) -> Jet:
        return self.jets.expand(t, state[0], state[1], self.order, direction,
                                tangent_vectors, real)

    def propagate(self, t0, state, t1, *, tangent_vectors=(), dense=False, real=None,
                  max_step=None):
        """Integrate from t0 to t1 (complex allowed) along the straight segment."""
        span = t1 - t0
        length = abs(span)
        if length == 0:
            return FlowResult(t1, tuple(state), list(tangent_vectors), mp.mpf(0), 0, [])
        direction = span / length
        if real is None:
            real = (mp.im(direction) == 0 and all(mp.im(v) == 0 for v in state)
                    and all(mp.im(c) == 0 for v in tangent_vectors for c in v))
        if real:
            direction = mp.re(direction)
        s, t = mp.mpf(0), t0
        x, y = state
        tans = list(tangent_vectors)
        action = mp.mpf(0)
        segments = []
        steps = 0
        while s < length:
            if steps >= self.max_steps:
                raise ConvergenceError("Taylor integration exceeded the step limit",
                                       {"t0": t0, "t1": t1, "reached": t})
            jet = self.jet(t, (x, y), direction, tans, real)
            h = jet.suggested_step(self.tol)
            if h is None:
                h = length - s
            if max_step is not None:
                h = min(h, max_step)
            h = min(h, length - s)
            if h <= mp.eps * max(1, length) * 16 and s + h < length:
                raise ConvergenceError("Taylor step underflow (singularity on the path?)",
                                       {"time": t, "step": h})
            x, y = jet.state(h)
            tans = jet.tangent_states(h)
            if jet.action is not None:
                action += jet.action_at(h)
            if dense:
                segments.append(Segment(t, direction, h, jet.x, jet.y))
            s += h
            t = t0 + direction * s
            steps += 1
        logger.debug("propagated %s -> %s in %d steps", mp.nstr(t0, 8), mp.nstr(t1, 8), steps)
        return FlowResult(t1, (x, y), tans, action, steps, segments)

    def propagate_path(self, vertices, state, **kwargs):
        """Integrate along a polygonal path of times, vertex to vertex."""
        result = None
        tangents = kwargs.pop("tangent_vectors", ())
        for t0, t1 in zip(vertices[:-1], vertices[1:]):
            result = self.propagate(t0, state, t1, tangent_vectors=tangents, **kwargs)
            state, tangents = result.state, result.tangents
        return result
