"""Scalars: exact elements of Q(sqrt d) and a high-precision float fallback.

Everything else in the package computes over :class:`QuadExt` when ``beta`` and
the digits live in a single real quadratic field (or in Q), and over
:class:`ApproxScalar` otherwise.  Both types support the usual arithmetic and
comparison operators, so downstream code is written once.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import total_ordering
from numbers import Rational
from typing import Union

from mpmath.ctx_mp import MPContext

from .errors import (
    DivisionByZero,
    IncompatibleRadicands,
    NegativeRadicand,
    NonSquareFreeRadicand,
)

__all__ = [
    "QuadExt",
    "ApproxScalar",
    "Scalar",
    "make_quadratic",
    "compare",
    "compare_across",
    "arith",
    "pow_int",
    "to_decimal",
    "as_scalar",
    "backend_of",
    "common_radicand",
    "scalar_to_json",
    "scalar_from_json",
    "FLOAT_TOLERANCE",
    "GOLDEN",
]

FLOAT_TOLERANCE = Fraction(1, 10**18)

# binary128 has a 113-bit significand; keep a margin above it.
_CTX = MPContext()
_CTX.prec = 160


def is_square_free(d: int) -> bool:
    if d < 2:
        return True
    k = 2
    while k * k <= d:
        if d % (k * k) == 0:
            return False
        k += 1
    return True


def _fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, Rational)):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v)
    raise TypeError(f"not a rational: {v!r}")


@total_ordering
class QuadExt:
    """``p + q*sqrt(d)`` with rational ``p``, ``q`` and square-free ``d >= 0``.

    ``d == 0`` encodes a plain rational, and any value with ``q == 0`` is stored
    that way.  Instances are immutable and hashable; equal values hash equal to
    the corresponding ``Fraction`` when rational.
    """

    __slots__ = ("p", "q", "d")
    backend = "exact"

    def __init__(self, p=0, q=0, d: int = 0):
        p = _fraction(p)
        q = _fraction(q)
        d = int(d)
        if d < 0:
            raise NegativeRadicand(f"radicand {d} < 0")
        if d == 1:
            p, q, d = p + q, Fraction(0), 0
        if q == 0 or d == 0:
            if d == 0 and q != 0:
                raise IncompatibleRadicands("q != 0 requires d > 0")
            q, d = Fraction(0), 0
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "d", d)

    @classmethod
    def _raw(cls, p: Fraction, q: Fraction, d: int) -> "QuadExt":
        obj = object.__new__(cls)
        if q == 0:
            d = 0
        object.__setattr__(obj, "p", p)
        object.__setattr__(obj, "q", q if d else Fraction(0))
        object.__setattr__(obj, "d", d)
        return obj

    def __setattr__(self, name, value):
        raise AttributeError("QuadExt is immutable")

    def __reduce__(self):
        return (QuadExt, (self.p, self.q, self.d))

    # -- structure ---------------------------------------------------------

    @property
    def is_rational(self) -> bool:
        return self.d == 0

    def conjugate(self) -> "QuadExt":
        return QuadExt._raw(self.p, -self.q, self.d)

    def norm(self) -> Fraction:
        return self.p * self.p - self.q * self.q * self.d

    def sign(self) -> int:
        """Exact sign via integer comparisons of p**2 and q**2 * d."""
        sp = (self.p > 0) - (self.p < 0)
        sq = (self.q > 0) - (self.q < 0)
        if sq == 0:
            return sp
        if sp == 0 or sp == sq:
            return sq
        # opposite signs: the larger of |p| and |q| sqrt(d) wins
        return sp if self.p * self.p > self.q * self.q * self.d else sq

    # -- coercion ----------------------------------------------------------

    @staticmethod
    def _coerce(other):
        if isinstance(other, QuadExt):
            return other
        if isinstance(other, (int, Fraction)):
            return QuadExt._raw(Fraction(other), Fraction(0), 0)
        return None

    def _radicand(self, other: "QuadExt") -> int:
        if self.d == other.d or other.d == 0:
            return self.d
        if self.d == 0:
            return other.d
        raise IncompatibleRadicands(f"sqrt({self.d}) and sqrt({other.d}) mixed")

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        d = self._radicand(o)
        return QuadExt._raw(self.p + o.p, self.q + o.q, d)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        d = self._radicand(o)
        return QuadExt._raw(self.p - o.p, self.q - o.q, d)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __neg__(self):
        return QuadExt._raw(-self.p, -self.q, self.d)

    def __pos__(self):
        return self

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        d = self._radicand(o)
        if self.d == 0 or o.d == 0:
            return QuadExt._raw(self.p * o.p, self.p * o.q + self.q * o.p, d)
        return QuadExt._raw(
            self.p * o.p + self.q * o.q * d, self.p * o.q + self.q * o.p, d
        )

    __rmul__ = __mul__

    def inverse(self) -> "QuadExt":
        if self.q == 0:
            if self.p == 0:
                raise DivisionByZero("division by zero")
            return QuadExt._raw(1 / self.p, Fraction(0), 0)
        n = self.norm()
        return QuadExt._raw(self.p / n, -self.q / n, self.d)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        self._radicand(o)
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __pow__(self, k):
        if not isinstance(k, int):
            return NotImplemented
        return pow_int(self, k)

    # -- comparison --------------------------------------------------------

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            if isinstance(other, ApproxScalar):
                return NotImplemented
            return False
        if self.d != o.d:
            if self.d and o.d:
                raise IncompatibleRadicands(f"sqrt({self.d}) and sqrt({o.d}) mixed")
            return False
        return self.p == o.p and self.q == o.q

    def __lt__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return (self - o).sign() < 0

    def __hash__(self):
        if self.d == 0:
            return hash(self.p)
        return hash((self.p, self.q, self.d))

    def __bool__(self):
        return self.p != 0 or self.q != 0

    # -- conversion --------------------------------------------------------

    def __floor__(self) -> int:
        if self.d == 0:
            return math.floor(self.p)
        r = self.q * self.q * self.d
        m = math.isqrt(r.numerator * r.denominator) // r.denominator
        g = math.floor(self.p + (m if self.q > 0 else -m))
        while QuadExt(g + 1) <= self:
            g += 1
        while QuadExt(g) > self:
            g -= 1
        return g

    def __float__(self) -> float:
        return float(self.to_mpf())

    def to_mpf(self):
        v = _CTX.mpf(self.p.numerator) / self.p.denominator
        if self.d:
            v += _CTX.mpf(self.q.numerator) / self.q.denominator * _CTX.sqrt(self.d)
        return v

    def __repr__(self):
        if self.d == 0:
            return f"QuadExt({self.p})"
        return f"QuadExt({self.p}, {self.q}, {self.d})"

    def __str__(self):
        if self.d == 0:
            return str(self.p)
        q = self.q
        sign = "-" if q < 0 else "+"
        qa = abs(q)
        qs = "" if qa == 1 else f"{qa}*"
        if self.p == 0:
            return f"{'-' if q < 0 else ''}{qs}sqrt({self.d})"
        return f"{self.p} {sign} {qs}sqrt({self.d})"


@total_ordering
class ApproxScalar:
    """Float fallback: 160-bit mpmath value with a 1e-18 relative equality band.

    Used only when ``beta`` is not quadratic.  Comparisons treat values closer
    than ``FLOAT_TOLERANCE * max(1, |x|, |y|)`` as equal.
    """

    __slots__ = ("v",)
    backend = "float"

    def __init__(self, v):
        if isinstance(v, ApproxScalar):
            v = v.v
        elif isinstance(v, QuadExt):
            v = v.to_mpf()
        elif isinstance(v, Fraction):
            v = _CTX.mpf(v.numerator) / v.denominator
        elif isinstance(v, str):
            v = _CTX.mpf(v)
        else:
            v = _CTX.mpf(v)
        self.v = v

    @staticmethod
    def _val(other):
        if isinstance(other, ApproxScalar):
            return other.v
        if isinstance(other, QuadExt):
            return other.to_mpf()
        if isinstance(other, Fraction):
            return _CTX.mpf(other.numerator) / other.denominator
        if isinstance(other, (int, float)):
            return _CTX.mpf(other)
        return None

    def _cmp(self, other) -> int | None:
        o = self._val(other)
        if o is None:
            return None
        diff = self.v - o
        scale = max(_CTX.mpf(1), abs(self.v), abs(o))
        if abs(diff) <= scale * _CTX.mpf(FLOAT_TOLERANCE.numerator) / FLOAT_TOLERANCE.denominator:
            return 0
        return 1 if diff > 0 else -1

    def sign(self) -> int:
        return self._cmp(0)

    def __eq__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c == 0

    def __lt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c < 0

    def __gt__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c > 0

    def __le__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c <= 0

    def __ge__(self, other):
        c = self._cmp(other)
        return NotImplemented if c is None else c >= 0

    __hash__ = None  # tolerance equality is not transitive

    def _bin(self, other, fn):
        o = self._val(other)
        if o is None:
            return NotImplemented
        return ApproxScalar(fn(self.v, o))

    def __add__(self, other):
        return self._bin(other, lambda a, b: a + b)

    def __radd__(self, other):
        return self._bin(other, lambda a, b: b + a)

    def __sub__(self, other):
        return self._bin(other, lambda a, b: a - b)

    def __rsub__(self, other):
        return self._bin(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._bin(other, lambda a, b: a * b)

    def __rmul__(self, other):
        return self._bin(other, lambda a, b: b * a)

    def __truediv__(self, other):
        o = self._val(other)
        if o is None:
            return NotImplemented
        if o == 0:
            raise DivisionByZero("division by zero")
        return ApproxScalar(self.v / o)

    def __rtruediv__(self, other):
        o = self._val(other)
        if o is None:
            return NotImplemented
        if self.v == 0:
            raise DivisionByZero("division by zero")
        return ApproxScalar(o / self.v)

    def __pow__(self, k):
        if not isinstance(k, int):
            return NotImplemented
        return pow_int(self, k)

    def __neg__(self):
        return ApproxScalar(-self.v)

    def __pos__(self):
        return self

    def __abs__(self):
        return ApproxScalar(abs(self.v))

    def __bool__(self):
        return self.v != 0

    def __float__(self):
        return float(self.v)

    def __floor__(self):
        return int(_CTX.floor(self.v))

    def inverse(self) -> "ApproxScalar":
        return 1 / self

    def to_mpf(self):
        return self.v

    def __repr__(self):
        return f"ApproxScalar({_CTX.nstr(self.v, 30)})"

    __str__ = __repr__


Scalar = Union[QuadExt, ApproxScalar]

GOLDEN = QuadExt(Fraction(1, 2), Fraction(1, 2), 5)


# -- functional API ---------------------------------------------------------


def make_quadratic(p, q, d: int) -> QuadExt:
    """Validated constructor for ``p + q*sqrt(d)``."""
    d = int(d)
    if d < 0:
        raise NegativeRadicand(f"radicand {d} < 0")
    if d > 0 and not is_square_free(d):
        raise NonSquareFreeRadicand(f"radicand {d} is not square-free")
    return QuadExt(p, q, d)


def as_scalar(v) -> Scalar:
    if isinstance(v, (QuadExt, ApproxScalar)):
        return v
    if isinstance(v, (int, Fraction)):
        return QuadExt(v)
    if isinstance(v, str):
        return QuadExt(Fraction(v))
    if isinstance(v, float):
        return ApproxScalar(v)
    raise TypeError(f"cannot interpret {v!r} as a scalar")


def backend_of(*values) -> str:
    return "float" if any(isinstance(v, ApproxScalar) for v in values) else "exact"


def common_radicand(values) -> int:
    d = 0
    for v in values:
        if isinstance(v, QuadExt) and v.d:
            if d and v.d != d:
                raise IncompatibleRadicands(f"sqrt({d}) and sqrt({v.d}) mixed")
            d = v.d
    return d


def compare(x, y) -> int:
    """-1, 0 or 1 according to the sign of ``x - y``."""
    x, y = as_scalar(x), as_scalar(y)
    if isinstance(x, ApproxScalar) or isinstance(y, ApproxScalar):
        return ApproxScalar(x)._cmp(y)
    x._radicand(y)
    return (x - y).sign()


def compare_across(x, y) -> int:
    """Exact sign of ``x - y`` even when the radicands differ.

    Elements of two different quadratic fields coincide only when both are
    rational, so refining precision until the difference separates from zero
    always terminates.
    """
    x, y = as_scalar(x), as_scalar(y)
    if isinstance(x, ApproxScalar) or isinstance(y, ApproxScalar):
        return compare(x, y)
    if x.d == y.d or x.d == 0 or y.d == 0:
        return (x - y).sign()
    ctx = MPContext()
    ctx.prec = 128
    while True:
        def val(z):
            v = ctx.mpf(z.p.numerator) / z.p.denominator
            return v + ctx.mpf(z.q.numerator) / z.q.denominator * ctx.sqrt(z.d)

        diff = val(x) - val(y)
        if abs(diff) > ctx.ldexp(1, -ctx.prec // 2):
            return 1 if diff > 0 else -1
        ctx.prec *= 2


_OPS = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
}


def arith(x, y, op: str) -> Scalar:
    return _OPS[op](as_scalar(x), as_scalar(y))


def pow_int(x, k: int) -> Scalar:
    x = as_scalar(x)
    if k < 0:
        if not x:
            raise DivisionByZero("zero to a negative power")
        return pow_int(x.inverse(), -k)
    result = QuadExt(1) if isinstance(x, QuadExt) else ApproxScalar(1)
    base = x
    while k:
        if k & 1:
            result = result * base
        k >>= 1
        if k:
            base = base * base
    return result


def to_decimal(x, digits: int) -> str:
    """Correctly rounded (half to even) fixed-point decimal with ``digits`` places."""
    if digits < 1:
        raise ValueError("digits must be >= 1")
    x = as_scalar(x)
    if isinstance(x, ApproxScalar):
        scaled = x.v * _CTX.mpf(10) ** digits
        f = int(_CTX.floor(scaled))
        rem = scaled - f
        half = _CTX.mpf(1) / 2
        if rem > half or (rem == half and f % 2):
            f += 1
    else:
        scaled = x * 10**digits
        f = math.floor(scaled)
        c = compare(scaled - f, Fraction(1, 2))
        if c > 0 or (c == 0 and f % 2):
            f += 1
    neg = f < 0
    s = str(abs(f)).rjust(digits + 1, "0")
    return ("-" if neg else "") + s[:-digits] + "." + s[-digits:]


def scalar_to_json(x, digits: int = 30) -> dict:
    x = as_scalar(x)
    if isinstance(x, ApproxScalar):
        return {"float": _CTX.nstr(x.v, 40), "decimal": to_decimal(x, digits)}
    return {
        "p_num": x.p.numerator,
        "p_den": x.p.denominator,
        "q_num": x.q.numerator,
        "q_den": x.q.denominator,
        "d": x.d,
        "decimal": to_decimal(x, digits),
    }


def scalar_from_json(obj: dict) -> Scalar:
    if "float" in obj:
        return ApproxScalar(obj["float"])
    return make_quadratic(
        Fraction(obj["p_num"], obj["p_den"]),
        Fraction(obj["q_num"], obj["q_den"]),
        obj["d"],
    )
