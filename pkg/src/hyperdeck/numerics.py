"""Exact scalars (rationals, multi-radical surds) and directed-rounding intervals."""

from __future__ import annotations

import enum
import functools
import math
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpq, mpz

_MPQ = type(mpq())
_MPZ = type(mpz())
_EXACT = (int, _MPQ, _MPZ, Fraction)

DEFAULT_SCHEDULE = (128, 256, 512, 1024, 2048)


def Q(x) -> mpq:
    """Coerce ints, Fractions, mpq and 'p/q' strings to an exact rational."""
    if isinstance(x, _MPQ):
        return x
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    if isinstance(x, float):
        return mpq(*x.as_integer_ratio())
    if isinstance(x, np.integer):
        return mpq(int(x))
    return mpq(x)


def rat_str(x) -> str:
    x = Q(x)
    return f"{x.numerator}/{x.denominator}"


def parse_rat(s: str) -> mpq:
    return mpq(s)


def is_rational_square(s) -> bool:
    s = Q(s)
    if s < 0:
        return False
    return gmpy2.is_square(s.numerator) and gmpy2.is_square(s.denominator)


def rational_sqrt(s) -> mpq:
    s = Q(s)
    return mpq(gmpy2.isqrt(s.numerator), gmpy2.isqrt(s.denominator))


def sign(x) -> int:
    return (x > 0) - (x < 0)


# ---------------------------------------------------------------------------
# surds

def _mul(c1, c2, rads):
    m = len(rads)
    out = [mpq(0)] * (1 << m)
    for i, a in enumerate(c1):
        if not a:
            continue
        for j, b in enumerate(c2):
            if not b:
                continue
            v = a * b
            common = i & j
            t = 0
            while common:
                if common & 1:
                    v *= rads[t]
                common >>= 1
                t += 1
            out[i ^ j] += v
    return out


def _sign(coeffs, rads) -> int:
    m = len(rads)
    if m == 0:
        return sign(coeffs[0])
    half = 1 << (m - 1)
    A, B = coeffs[:half], coeffs[half:]
    sub = rads[:-1]
    sb = _sign(B, sub)
    sa = _sign(A, sub)
    if sb == 0:
        return sa
    if sa == 0 or sa == sb:
        return sb
    # A + B*sqrt(s) with opposite signs: compare A^2 with s*B^2
    a2 = _mul(A, A, sub)
    b2 = _mul(B, B, sub)
    s = rads[-1]
    diff = [x - s * y for x, y in zip(a2, b2)]
    return sa * _sign(diff, sub)


_SMALL_PRIMES = [p for p in range(2, 1000) if all(p % q for q in range(2, int(p**0.5) + 1))]


@functools.lru_cache(maxsize=4096)
def _radicand(p: int, q: int):
    """sqrt(p/q) = mult * sqrt(t) with t an integer free of small square factors."""
    t = p * q
    mult = mpq(1, q)
    for pr in _SMALL_PRIMES:
        sq = pr * pr
        if sq > t:
            break
        while t % sq == 0:
            t //= sq
            mult *= pr
    if gmpy2.is_square(t):
        r = int(gmpy2.isqrt(t))
        return 1, mult * r
    return t, mult


class SurdScalar:
    """An element sum_S c_S * sqrt(prod_{i in S} s_i) of Q(sqrt s_1, ..., sqrt s_m).

    Coefficients are indexed by bitmasks over the radicand tuple.  The common
    single radical case u + v*sqrt(s) is built with ``SurdScalar.of(u, v, s)``.
    Radicands need not be independent; the sign test stays exact regardless.
    """

    __slots__ = ("rads", "coeffs")

    def __init__(self, rads: Sequence = (), coeffs: Sequence = (0,)):
        self.rads = tuple(Q(r) for r in rads)
        self.coeffs = tuple(Q(c) for c in coeffs)
        if len(self.coeffs) != 1 << len(self.rads):
            raise ValueError("coefficient count must be 2**len(rads)")

    @classmethod
    def of(cls, u, v=0, s=0) -> "SurdScalar":
        s = Q(s)
        if s < 0:
            raise ValueError("negative radicand")
        if v == 0 or s == 0:
            return cls((), (Q(u),))
        t, mult = _radicand(int(s.numerator), int(s.denominator))
        if t == 1:
            return cls((), (Q(u) + Q(v) * mult,))
        return cls((mpq(t),), (Q(u), Q(v) * mult))

    @classmethod
    def sqrt(cls, s) -> "SurdScalar":
        return cls.of(0, 1, s)

    # single-radical views
    @property
    def u(self):
        return self.coeffs[0]

    @property
    def v(self):
        if len(self.rads) > 1:
            raise ValueError("not a single-radical value")
        return self.coeffs[1] if self.rads else mpq(0)

    @property
    def s(self):
        if len(self.rads) > 1:
            raise ValueError("not a single-radical value")
        return self.rads[0] if self.rads else mpq(0)

    def is_rational(self) -> bool:
        return all(c == 0 for c in self.coeffs[1:])

    def rational(self) -> mpq:
        if not self.is_rational():
            raise ValueError("value is irrational")
        return self.coeffs[0]

    def _embed(self, rads):
        pos = [rads.index(r) for r in self.rads]
        out = [mpq(0)] * (1 << len(rads))
        for mask, c in enumerate(self.coeffs):
            if c:
                t = 0
                for i, p in enumerate(pos):
                    if mask >> i & 1:
                        t |= 1 << p
                out[t] += c
        return out

    def _align(self, other):
        other = _as_surd(other)
        if other.rads == self.rads:
            return self.rads, list(self.coeffs), list(other.coeffs)
        rads = list(self.rads)
        for r in other.rads:
            if r not in rads:
                rads.append(r)
        rads = tuple(rads)
        return rads, self._embed(rads), other._embed(rads)

    def __add__(self, other):
        if not isinstance(other, (SurdScalar,) + _EXACT):
            return NotImplemented
        rads, a, b = self._align(other)
        return SurdScalar(rads, [x + y for x, y in zip(a, b)])

    __radd__ = __add__

    def __neg__(self):
        return SurdScalar(self.rads, [-c for c in self.coeffs])

    def __sub__(self, other):
        if not isinstance(other, (SurdScalar,) + _EXACT):
            return NotImplemented
        return self + (-_as_surd(other))

    def __rsub__(self, other):
        return _as_surd(other) - self

    def __mul__(self, other):
        if isinstance(other, _EXACT):
            o = Q(other)
            return SurdScalar(self.rads, [c * o for c in self.coeffs])
        if not isinstance(other, SurdScalar):
            return NotImplemented
        rads, a, b = self._align(other)
        return SurdScalar(rads, _mul(a, b, rads))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, _EXACT):
            o = Q(other)
            return SurdScalar(self.rads, [c / o for c in self.coeffs])
        return NotImplemented

    def __pow__(self, e: int):
        out = SurdScalar((), (1,))
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    def sign(self) -> int:
        return _sign(list(self.coeffs), self.rads)

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __eq__(self, other):
        try:
            return (self - _as_surd(other)).sign() == 0
        except TypeError:
            return NotImplemented

    # equal values can have different representations
    __hash__ = None

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __le__(self, other):
        return (self - other).sign() <= 0

    def __gt__(self, other):
        return (self - other).sign() > 0

    def __ge__(self, other):
        return (self - other).sign() >= 0

    def mpfr(self, prec: int = 200):
        with gmpy2.context(gmpy2.get_context(), precision=prec):
            total = gmpy2.mpfr(0)
            for mask, c in enumerate(self.coeffs):
                if c:
                    r = mpq(1)
                    for i, s in enumerate(self.rads):
                        if mask >> i & 1:
                            r *= s
                    total += gmpy2.mpfr(c) * gmpy2.sqrt(gmpy2.mpfr(r))
            return total

    def __float__(self):
        if self.is_rational():
            return float(self.coeffs[0])
        if self.sign() == 0:
            return 0.0
        # cancellation between huge coefficients: raise precision until the enclosure is tight
        prec = 120
        while True:
            iv = self.interval(prec)
            with gmpy2.context(gmpy2.get_context(), precision=prec + 8):
                mid = (iv.lo + iv.hi) / 2
                tight = iv.hi - iv.lo <= abs(mid) * gmpy2.mpfr(2) ** -60
            if tight or prec > 1 << 20:
                return float(mid)
            prec *= 4

    def floor(self) -> int:
        if self.is_rational():
            return int(gmpy2.floor(self.coeffs[0]))
        g = int(gmpy2.floor(self.mpfr(max(200, 4 * self.bits()))))
        while (self - g).sign() < 0:
            g -= 1
        while (self - (g + 1)).sign() >= 0:
            g += 1
        return g

    def ceil(self) -> int:
        return -((-self).floor())

    def bits(self) -> int:
        b = 1
        for c in self.coeffs:
            if c:
                b = max(b, c.numerator.bit_length(), c.denominator.bit_length())
        return b

    def interval(self, prec: int = 128) -> "IntervalScalar":
        total = IntervalScalar.exact(0, prec)
        for mask, c in enumerate(self.coeffs):
            if c:
                r = mpq(1)
                for i, s in enumerate(self.rads):
                    if mask >> i & 1:
                        r *= s
                total = total + IntervalScalar.exact(c, prec) * IntervalScalar.exact(r, prec).sqrt()
        return total

    def __repr__(self):
        if len(self.rads) <= 1:
            if not self.rads:
                return f"SurdScalar({rat_str(self.u)})"
            return f"SurdScalar({rat_str(self.u)} + {rat_str(self.v)}*sqrt({rat_str(self.s)}))"
        return f"SurdScalar(rads={[rat_str(r) for r in self.rads]}, coeffs={[rat_str(c) for c in self.coeffs]})"

    def to_json(self):
        return {"radicands": [rat_str(r) for r in self.rads],
                "coefficients": [rat_str(c) for c in self.coeffs]}


def _as_surd(x) -> SurdScalar:
    if isinstance(x, SurdScalar):
        return x
    if isinstance(x, _EXACT):
        return SurdScalar((), (Q(x),))
    raise TypeError(f"cannot treat {type(x).__name__} as an exact scalar")


def surd_sign(x) -> int:
    if isinstance(x, SurdScalar):
        return x.sign()
    return sign(x)


# ---------------------------------------------------------------------------
# intervals

def _ctx(prec, rnd):
    return gmpy2.context(gmpy2.get_context(), precision=prec, round=rnd)


class IntervalScalar:
    """Closed interval [lo, hi] with binary endpoints rounded outward."""

    __slots__ = ("lo", "hi", "prec")

    def __init__(self, lo, hi, prec: int = 128):
        with _ctx(prec, gmpy2.RoundDown):
            lo = gmpy2.mpfr(lo)
        with _ctx(prec, gmpy2.RoundUp):
            hi = gmpy2.mpfr(hi)
        if lo > hi:
            raise ValueError("empty interval")
        self.lo, self.hi, self.prec = lo, hi, prec

    @classmethod
    def exact(cls, x, prec: int = 128) -> "IntervalScalar":
        if isinstance(x, IntervalScalar):
            return x
        if isinstance(x, SurdScalar):
            return x.interval(prec)
        x = Q(x) if not isinstance(x, float) else x
        return cls(x, x, prec)

    def _wrap(self, other):
        if isinstance(other, IntervalScalar):
            return other
        return IntervalScalar.exact(other, self.prec)

    def __add__(self, other):
        o = self._wrap(other)
        p = max(self.prec, o.prec)
        with _ctx(p, gmpy2.RoundDown):
            lo = self.lo + o.lo
        with _ctx(p, gmpy2.RoundUp):
            hi = self.hi + o.hi
        return _raw(lo, hi, p)

    __radd__ = __add__

    def __neg__(self):
        # negation is exact, but only at the endpoints' own precision
        with _ctx(self.prec, gmpy2.RoundToNearest):
            return _raw(-self.hi, -self.lo, self.prec)

    def __sub__(self, other):
        return self + (-self._wrap(other))

    def __rsub__(self, other):
        return self._wrap(other) - self

    def __mul__(self, other):
        o = self._wrap(other)
        p = max(self.prec, o.prec)
        pairs = [(self.lo, o.lo), (self.lo, o.hi), (self.hi, o.lo), (self.hi, o.hi)]
        with _ctx(p, gmpy2.RoundDown):
            lo = min(a * b for a, b in pairs)
        with _ctx(p, gmpy2.RoundUp):
            hi = max(a * b for a, b in pairs)
        return _raw(lo, hi, p)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._wrap(other)
        if o.lo <= 0 <= o.hi:
            raise ZeroDivisionError("divisor interval contains zero")
        p = max(self.prec, o.prec)
        with _ctx(p, gmpy2.RoundDown):
            inv_lo = 1 / o.hi
        with _ctx(p, gmpy2.RoundUp):
            inv_hi = 1 / o.lo
        return self * _raw(inv_lo, inv_hi, p)

    def __abs__(self):
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        with _ctx(self.prec, gmpy2.RoundToNearest):
            return _raw(gmpy2.mpfr(0), max(-self.lo, self.hi), self.prec)

    def sqrt(self):
        if self.lo < 0:
            raise ValueError("sqrt of negative interval")
        with _ctx(self.prec, gmpy2.RoundDown):
            lo = gmpy2.sqrt(self.lo)
        with _ctx(self.prec, gmpy2.RoundUp):
            hi = gmpy2.sqrt(self.hi)
        return _raw(lo, hi, self.prec)

    def contains(self, x) -> bool:
        x = Q(x)
        return self.lo <= x <= self.hi

    def width(self):
        return self.hi - self.lo

    def __repr__(self):
        return f"[{self.lo}, {self.hi}]"

    def to_str(self) -> str:
        return f"[{float(self.lo):.17g}, {float(self.hi):.17g}]"


def _raw(lo, hi, prec):
    out = IntervalScalar.__new__(IntervalScalar)
    out.lo, out.hi, out.prec = lo, hi, prec
    return out


# ---------------------------------------------------------------------------
# polynomial evaluation and certification

def eval_poly(f: Sequence, x):
    """Horner evaluation of sum f[j] x^j; exact for rationals/surds, enclosing for intervals."""
    if isinstance(x, IntervalScalar):
        acc = IntervalScalar.exact(0, x.prec)
        for c in reversed(f):
            acc = acc * x + IntervalScalar.exact(Q(c), x.prec)
        return acc
    if isinstance(x, SurdScalar):
        return _eval_surd(f, x)
    x = Q(x)
    acc = mpq(0)
    for c in reversed(f):
        acc = acc * x + Q(c)
    return acc


def _eval_surd(f, x: SurdScalar) -> SurdScalar:
    if len(x.rads) == 1:
        # fast path for u + v sqrt(s)
        u, v, s = x.coeffs[0], x.coeffs[1], x.rads[0]
        a, b = mpq(0), mpq(0)
        for c in reversed(f):
            a, b = a * u + b * v * s + Q(c), a * v + b * u
        return SurdScalar((s,), (a, b))
    acc = SurdScalar((), (0,))
    for c in reversed(f):
        acc = acc * x + Q(c)
    return acc


class Decision(str, enum.Enum):
    GT = "GT"
    LE = "LE"
    UNDECIDED = "UNDECIDED"


def compare_intervals(a: IntervalScalar, b: IntervalScalar) -> Decision:
    if a.lo > b.hi:
        return Decision.GT
    if a.hi <= b.lo:
        return Decision.LE
    return Decision.UNDECIDED


def certify_strict_gt(a, b, refine: Iterable[int] | None = None) -> Decision:
    """Decide a > b.

    ``a`` and ``b`` are intervals or callables mapping a precision in bits to an
    interval.  Callables are re-evaluated along the precision schedule
    ``refine`` (default 128 doubling to 2048) until the comparison is decided.
    """
    if not callable(a) and not callable(b):
        return compare_intervals(a, b)
    schedule = DEFAULT_SCHEDULE if refine is None else tuple(refine)
    out = Decision.UNDECIDED
    for prec in schedule:
        ia = a(prec) if callable(a) else a
        ib = b(prec) if callable(b) else b
        out = compare_intervals(ia, ib)
        if out is not Decision.UNDECIDED:
            return out
    return out


def isqrt_floor(x) -> int:
    """floor(sqrt(x)) for a nonnegative rational."""
    x = Q(x)
    r = int(gmpy2.isqrt(x.numerator // x.denominator))
    while (r + 1) ** 2 <= x:
        r += 1
    while r * r > x:
        r -= 1
    return r


def pi_upper() -> mpq:
    """Rational upper bound of pi with relative error below 1e-6."""
    return mpq(355, 113)


def pi_lower() -> mpq:
    return mpq(103993, 33102)


def comb(n: int, k: int) -> int:
    """Binomial coefficient that is zero outside 0 <= k <= n."""
    if k < 0 or n < 0 or k > n:
        return 0
    return math.comb(n, k)
