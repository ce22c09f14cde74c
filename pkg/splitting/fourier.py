"""
fourier.py – exact coefficients and Fourier–Taylor polynomials

Provides:
- exact(value): rational conversion of config or user numbers
- ExactComplex: complex number with Fraction parts
- TrigPolynomial: finite sums  c * e^{ikx} * y^p * e^{iq tau}  with mpmath
  coefficients, evaluation, derivatives, products and Poisson brackets
"""
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import mpmath
from mpmath import mp

from .errors import SpecError


def exact(value) -> Fraction:
    """Exact rational for ints, decimal floats, strings like '1/3' and mpf."""
    if isinstance(value, bool):
        raise SpecError(f"boolean is not a coefficient: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        if value != value or value in (float("inf"), float("-inf")):
            raise SpecError(f"non-finite coefficient: {value!r}")
        # repr is the shortest decimal that round-trips; keep what the user wrote
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise SpecError(f"cannot read coefficient {value!r}") from exc
    if isinstance(value, mpmath.mpf):
        if not mp.isfinite(value):
            raise SpecError(f"non-finite coefficient: {value}")
        sign, man, exp, _ = value._mpf_
        frac = Fraction(int(man)) * (Fraction(2) ** exp)
        return -frac if sign else frac
    raise SpecError(f"unsupported coefficient type {type(value).__name__}")


@dataclass(frozen=True)
class ExactComplex:
    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    @classmethod
    def of(cls, re=0, im=0) -> "ExactComplex":
        return cls(exact(re), exact(im))

    @classmethod
    def coerce(cls, value) -> "ExactComplex":
        if isinstance(value, ExactComplex):
            return value
        if isinstance(value, complex):
            return cls(exact(value.real), exact(value.imag))
        if isinstance(value, mpmath.mpc):
            return cls(exact(value.real), exact(value.imag))
        return cls(exact(value), Fraction(0))

    def __add__(self, other):
        other = ExactComplex.coerce(other)
        return ExactComplex(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return ExactComplex(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-ExactComplex.coerce(other))

    def __mul__(self, other):
        other = ExactComplex.coerce(other)
        return ExactComplex(self.re * other.re - self.im * other.im,
                            self.re * other.im + self.im * other.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = exact(other)
        return ExactComplex(self.re / other, self.im / other)

    def conjugate(self) -> "ExactComplex":
        return ExactComplex(self.re, -self.im)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def is_real(self) -> bool:
        return self.im == 0

    def to_mpc(self):
        return mp.mpc(mp.mpf(self.re.numerator) / self.re.denominator,
                      mp.mpf(self.im.numerator) / self.im.denominator)

    def to_pair(self) -> list:
        return [str(self.re), str(self.im)]


def to_mpf(value: Fraction):
    return mp.mpf(value.numerator) / value.denominator


class TrigPolynomial:
    """
    Finite Fourier–Taylor sum  sum c[k,p,q] e^{ikx} y^p e^{iq tau}.

    Coefficients are mpmath numbers at the precision active when the
    polynomial was built; keys are (k, p, q) with p >= 0.
    """

    def __init__(self, terms=None):
        self.terms = {}
        for key, coef in (terms or {}).items():
            if coef != 0:
                self.terms[tuple(int(v) for v in key)] = mp.mpmathify(coef)

    @classmethod
    def from_monomials(cls, monomials) -> "TrigPolynomial":
        acc = {}
        for coef, k, p, q in monomials:
            acc[(k, p, q)] = acc.get((k, p, q), 0) + coef
        return cls(acc)

    def monomials(self):
        """List of (coef, k, p, q), sorted by key."""
        return [(self.terms[key],) + key for key in sorted(self.terms)]

    def __len__(self):
        return len(self.terms)

    def __bool__(self):
        return bool(self.terms)

    def __repr__(self):
        return f"TrigPolynomial({len(self.terms)} terms)"

    # ---------- algebra ----------
    def __add__(self, other):
        acc = dict(self.terms)
        for key, coef in other.terms.items():
            acc[key] = acc.get(key, 0) + coef
        return TrigPolynomial(acc)

    def __neg__(self):
        return TrigPolynomial({key: -c for key, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, factor) -> "TrigPolynomial":
        return TrigPolynomial({key: factor * c for key, c in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, TrigPolynomial):
            return self.scale(other)
        acc = {}
        for (k1, p1, q1), c1 in self.terms.items():
            for (k2, p2, q2), c2 in other.terms.items():
                key = (k1 + k2, p1 + p2, q1 + q2)
                acc[key] = acc.get(key, 0) + c1 * c2
        return TrigPolynomial(acc)

    __rmul__ = scale

    def diff_x(self) -> "TrigPolynomial":
        return TrigPolynomial({(k, p, q): mp.mpc(0, k) * c
                               for (k, p, q), c in self.terms.items() if k})

    def diff_y(self) -> "TrigPolynomial":
        return TrigPolynomial({(k, p - 1, q): p * c
                               for (k, p, q), c in self.terms.items() if p})

    def diff_tau(self) -> "TrigPolynomial":
        return TrigPolynomial({(k, p, q): mp.mpc(0, q) * c
                               for (k, p, q), c in self.terms.items() if q})

    # ---------- structure ----------
    def tau_harmonics(self):
        return sorted({q for (_, _, q) in self.terms})

    def tau_component(self, q: int) -> "TrigPolynomial":
        return TrigPolynomial({key: c for key, c in self.terms.items() if key[2] == q})

    def x_degree(self) -> int:
        return max((abs(k) for (k, _, _) in self.terms), default=0)

    def y_degree(self) -> int:
        return max((p for (_, p, _) in self.terms), default=0)

    # ---------- evaluation ----------
    def evaluate(self, x, y, tau=0):
        """Value at (x, y, tau); complex arguments allowed."""
        ex, ey, et = {}, {}, {}
        total = mp.mpc(0)
        for (k, p, q), c in self.terms.items():
            if k not in ex:
                ex[k] = mp.expj(k * x) if k else mp.mpf(1)
            if p not in ey:
                ey[p] = y ** p if p else mp.mpf(1)
            if q not in et:
                et[q] = mp.expj(q * tau) if q else mp.mpf(1)
            total += c * ex[k] * ey[p] * et[q]
        return total

    def evaluate_real(self, x, y, tau=0):
        return mp.re(self.evaluate(x, y, tau))


def poisson_bracket(f: TrigPolynomial, g: TrigPolynomial) -> TrigPolynomial:
    """{f, g} = f_x g_y - f_y g_x."""
    return f.diff_x() * g.diff_y() - f.diff_y() * g.diff_x()
