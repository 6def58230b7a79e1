"""Closed real intervals with numpy-vectorized endpoints.

An :class:`Interval` holds ``lo`` and ``hi`` that are either floats or
equally-shaped arrays, so the same code evaluates one box or a whole
batch of boxes.  Rounding is plain floating point; no directed rounding.
"""

from __future__ import annotations

import numpy as np

HALF_PI = 0.5 * np.pi
TWO_PI = 2.0 * np.pi


class DomainError(ValueError):
    """Raised when an operation leaves the domain of a function."""


def _as_float(v):
    if np.ndim(v) == 0:
        return float(v)
    return np.asarray(v, dtype=float)


class Interval:
    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        if hi is None:
            hi = lo
        lo = _as_float(lo)
        hi = _as_float(hi)
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise DomainError("interval endpoint is NaN")
        if np.any(lo > hi):
            raise ValueError(f"invalid interval: lo > hi ({lo!r}, {hi!r})")
        self.lo = lo
        self.hi = hi

    @classmethod
    def _raw(cls, lo, hi):
        # Skips validation; callers guarantee lo <= hi.
        obj = cls.__new__(cls)
        obj.lo = lo
        obj.hi = hi
        return obj

    def __repr__(self):
        return f"Interval({self.lo!r}, {self.hi!r})"

    def __eq__(self, other):
        if not isinstance(other, Interval):
            return NotImplemented
        return bool(np.all(self.lo == other.lo) and np.all(self.hi == other.hi))

    __hash__ = None

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def mid(self):
        return 0.5 * (self.lo + self.hi)

    @property
    def mag(self):
        """Largest absolute value attained in the interval."""
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def contains(self, x):
        return (self.lo <= x) & (x <= self.hi)

    def contains_zero(self):
        return (self.lo <= 0.0) & (self.hi >= 0.0)

    def subset_of(self, other: Interval):
        return (other.lo <= self.lo) & (self.hi <= other.hi)

    def hull(self, other: Interval) -> Interval:
        return Interval._raw(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def inflate(self, rel: float) -> Interval:
        if rel == 0.0:
            return self
        pad = rel * np.maximum(1.0, self.mag)
        return Interval._raw(self.lo - pad, self.hi + pad)

    # arithmetic -------------------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        return Interval._raw(self.lo + other.lo, self.hi + other.hi)

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        return Interval._raw(self.lo - other.hi, self.hi - other.lo)

    def __rsub__(self, other):
        return _coerce(other) - self

    def __neg__(self):
        return Interval._raw(-self.hi, -self.lo)

    def __mul__(self, other):
        other = _coerce(other)
        p = (self.lo * other.lo, self.lo * other.hi, self.hi * other.lo, self.hi * other.hi)
        return Interval._raw(
            np.minimum(np.minimum(p[0], p[1]), np.minimum(p[2], p[3])),
            np.maximum(np.maximum(p[0], p[1]), np.maximum(p[2], p[3])),
        )

    __rmul__ = __mul__

    def reciprocal(self) -> Interval:
        if np.any(self.contains_zero()):
            raise DomainError("division by an interval containing zero")
        return Interval._raw(1.0 / self.hi, 1.0 / self.lo)

    def __truediv__(self, other):
        return self * _coerce(other).reciprocal()

    def __rtruediv__(self, other):
        return _coerce(other) * self.reciprocal()

    def __pow__(self, p):
        return ipow(self, p)


def _coerce(v) -> Interval:
    if isinstance(v, Interval):
        return v
    v = _as_float(v)
    return Interval._raw(v, v)


def ipow(x: Interval, p) -> Interval:
    """``x**p``; integer ``p`` uses the tight even/odd rules, real ``p`` needs ``x >= 0``."""
    if float(p).is_integer():
        p = int(p)
        if p == 0:
            one = np.ones_like(x.lo) if np.ndim(x.lo) else 1.0
            return Interval._raw(one, one)
        if p < 0:
            return ipow(x, -p).reciprocal()
        a = x.lo**p
        b = x.hi**p
        if p % 2 == 1:
            return Interval._raw(a, b)
        lo = np.where(x.contains_zero(), 0.0, np.minimum(a, b))
        return Interval._raw(_as_float(lo), np.maximum(a, b))
    if np.any(x.lo < 0.0):
        raise DomainError("real power of a negative base")
    # monotone on [0, inf): increasing for p > 0, decreasing for p < 0
    if p < 0 and np.any(x.lo == 0.0):
        raise DomainError("negative real power at zero")
    a = x.lo**p
    b = x.hi**p
    return Interval._raw(np.minimum(a, b), np.maximum(a, b))


def iexp(x: Interval) -> Interval:
    return Interval._raw(np.exp(x.lo), np.exp(x.hi))


def ilog(x: Interval) -> Interval:
    if np.any(x.lo <= 0.0):
        raise DomainError("log of a non-positive interval")
    return Interval._raw(np.log(x.lo), np.log(x.hi))


def isqrt(x: Interval) -> Interval:
    if np.any(x.lo < 0.0):
        raise DomainError("sqrt of a negative interval")
    return Interval._raw(np.sqrt(x.lo), np.sqrt(x.hi))


def iatan(x: Interval) -> Interval:
    return Interval._raw(np.arctan(x.lo), np.arctan(x.hi))


def _hits(lo, hi, phase):
    # is there an integer k with lo <= phase + 2*pi*k <= hi ?
    return np.ceil((lo - phase) / TWO_PI) <= np.floor((hi - phase) / TWO_PI)


def _periodic(x: Interval, f, max_phase, min_phase) -> Interval:
    a = f(x.lo)
    b = f(x.hi)
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    full = (x.hi - x.lo) >= TWO_PI
    hi = np.where(full | _hits(x.lo, x.hi, max_phase), 1.0, hi)
    lo = np.where(full | _hits(x.lo, x.hi, min_phase), -1.0, lo)
    return Interval._raw(_as_float(lo), _as_float(hi))


def isin(x: Interval) -> Interval:
    return _periodic(x, np.sin, HALF_PI, -HALF_PI)


def icos(x: Interval) -> Interval:
    return _periodic(x, np.cos, 0.0, np.pi)


def iabs(x: Interval) -> Interval:
    a = np.abs(x.lo)
    b = np.abs(x.hi)
    lo = np.where(x.contains_zero(), 0.0, np.minimum(a, b))
    return Interval._raw(_as_float(lo), np.maximum(a, b))


def isign(x: Interval) -> Interval:
    return Interval._raw(np.sign(x.lo), np.sign(x.hi))


def imin(a: Interval, b: Interval) -> Interval:
    return Interval._raw(np.minimum(a.lo, b.lo), np.minimum(a.hi, b.hi))


def imax(a: Interval, b: Interval) -> Interval:
    return Interval._raw(np.maximum(a.lo, b.lo), np.maximum(a.hi, b.hi))


def iselect(a: Interval, b: Interval, then: Interval, other: Interval) -> Interval:
    """Range of ``then if a < b else other`` over the boxes.

    Where the order of ``a`` and ``b`` is undecided the hull of both
    branches is returned.
    """
    surely_less = a.hi < b.lo
    surely_geq = a.lo >= b.hi
    both = then.hull(other)
    lo = np.where(surely_less, then.lo, np.where(surely_geq, other.lo, both.lo))
    hi = np.where(surely_less, then.hi, np.where(surely_geq, other.hi, both.hi))
    return Interval._raw(_as_float(lo), _as_float(hi))


class IntervalVector:
    """A sequence of intervals, e.g. the enclosure of a gradient over a box."""

    def __init__(self, components):
        self.components = list(components)

    def __len__(self):
        return len(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def mags(self):
        return np.stack([np.asarray(c.mag, dtype=float) for c in self.components], axis=-1)
