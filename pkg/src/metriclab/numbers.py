"""Exact numbers used for metric values.

Word metrics and their additive perturbations take rational values, so most of
the package runs on :class:`fractions.Fraction`.  The concave perturbation
``t + sqrt(t)`` leaves the rationals; its values (and sums and differences of
them) live in :class:`Surd`, a finite sum ``sum_m c_m * sqrt(m)`` over distinct
squarefree integers ``m`` with rational ``c_m``.  Square roots of distinct
squarefree integers are linearly independent over Q, so a surd is zero iff all
coefficients vanish and every comparison is decidable.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Union

Number = Union[int, Fraction, "Surd"]


@lru_cache(maxsize=4096)
def _split_square(n: int) -> tuple[int, int]:
    """Write n = s*s*m with m squarefree; return (s, m)."""
    s, m = 1, 1
    p = 2
    while p * p <= n:
        while n % (p * p) == 0:
            n //= p * p
            s *= p
        if n % p == 0:
            n //= p
            m *= p
        p += 1 if p == 2 else 2
    return s, m * n


def sqrt(q) -> Number:
    """Exact square root of a non-negative rational."""
    q = Fraction(q)
    if q < 0:
        raise ValueError(f"square root of negative number {q}")
    if q == 0:
        return Fraction(0)
    num, den = q.numerator, q.denominator
    s, m = _split_square(num * den)
    coef = Fraction(s, den)
    if m == 1:
        return coef
    return Surd({m: coef})


def _lift(x) -> dict[int, Fraction]:
    if isinstance(x, Surd):
        return x._terms
    if isinstance(x, (int, Fraction)) or isinstance(x, Rational):
        x = Fraction(x)
        return {1: x} if x else {}
    raise TypeError(f"cannot combine Surd with {type(x).__name__}")


def _make(terms: dict[int, Fraction]) -> Number:
    terms = {m: c for m, c in terms.items() if c}
    if not terms:
        return Fraction(0)
    if set(terms) == {1}:
        return terms[1]
    return Surd(terms)


class Surd:
    """Element of the additive group generated by square roots of rationals."""

    __slots__ = ("_terms", "_approx")

    def __init__(self, terms: dict[int, Fraction]):
        self._terms = {m: Fraction(c) for m, c in sorted(terms.items()) if c}
        self._approx = math.fsum(float(c) * math.sqrt(m) for m, c in self._terms.items())

    @property
    def terms(self) -> dict[int, Fraction]:
        return dict(self._terms)

    @property
    def rational_part(self) -> Fraction:
        return self._terms.get(1, Fraction(0))

    def __add__(self, other):
        try:
            b = _lift(other)
        except TypeError:
            return NotImplemented
        out = dict(self._terms)
        for m, c in b.items():
            out[m] = out.get(m, 0) + c
        return _make(out)

    __radd__ = __add__

    def __neg__(self):
        return Surd({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        try:
            b = _lift(other)
        except TypeError:
            return NotImplemented
        out = dict(self._terms)
        for m, c in b.items():
            out[m] = out.get(m, 0) - c
        return _make(out)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Surd):
            return NotImplemented
        try:
            k = Fraction(other)
        except TypeError:
            return NotImplemented
        return _make({m: c * k for m, c in self._terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Surd):
            return NotImplemented
        k = Fraction(other)
        return _make({m: c / k for m, c in self._terms.items()})

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __float__(self):
        return self._approx

    def sign(self) -> int:
        """Exact sign, filtered through the float approximation first."""
        if not self._terms:
            return 0
        # float error is far below this bound for the magnitudes used here
        err = 1e-9 * (1.0 + sum(abs(float(c)) * math.sqrt(m) for m, c in self._terms.items()))
        if self._approx > err:
            return 1
        if self._approx < -err:
            return -1
        bits = 64
        while True:
            lo = hi = Fraction(0)
            scale = 1 << bits
            for m, c in self._terms.items():
                if m == 1:
                    lo += c
                    hi += c
                    continue
                r = math.isqrt(m * scale * scale)
                a, b = Fraction(r, scale), Fraction(r + 1, scale)
                if c > 0:
                    lo += c * a
                    hi += c * b
                else:
                    lo += c * b
                    hi += c * a
            if lo > 0:
                return 1
            if hi < 0:
                return -1
            bits *= 2

    def _cmp(self, other) -> int:
        try:
            return _sign(self - other)
        except TypeError:
            return NotImplemented

    def __eq__(self, other):
        try:
            return _sign(self - other) == 0
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash(tuple(self._terms.items()))

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __repr__(self):
        return f"Surd({format_number(self)})"


def _sign(x) -> int:
    if isinstance(x, Surd):
        return x.sign()
    return (x > 0) - (x < 0)


def sign(x: Number) -> int:
    return _sign(x)


def is_rational(x) -> bool:
    return not isinstance(x, Surd)


def format_number(x: Number) -> str:
    """Render as ``p/q`` (rationals) or ``p/q+p/q*sqrt(m)`` (surds)."""
    if isinstance(x, Surd):
        parts = []
        for m, c in x._terms.items():
            body = f"{c.numerator}/{c.denominator}"
            parts.append(body if m == 1 else f"{body}*sqrt({m})")
        return "+".join(parts).replace("+-", "-")
    q = Fraction(x)
    return f"{q.numerator}/{q.denominator}"


def parse_fraction(text: str) -> Fraction:
    return Fraction(text.strip())
