"""Exact sawtooth / Dedekind-sum arithmetic and high-precision special functions.

Everything with a closed rational form is computed in ``fractions.Fraction``;
the irrational pieces (harmonic extension, the boundary kernel function f)
are returned as :class:`HighPrecisionReal` values carrying an error bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

Rational = Fraction

#: Working decimal precision for all mpmath evaluations.  40 digits leaves
#: ~90 bits of headroom over the 1e-12 target tolerance.
_DPS = 40

#: Default absolute error bound attached to mpmath-evaluated quantities.
_MP_ERR = 1e-30


@dataclass(frozen=True)
class HighPrecisionReal:
    """A real value together with a bound on its absolute error."""

    value: mpmath.mpf
    err: float

    def __post_init__(self):
        if not (self.err >= 0 and math.isfinite(self.err)):
            raise ValueError(f"error bound must be finite and nonnegative: {self.err}")

    def __float__(self) -> float:
        return float(self.value)

    def __add__(self, other: "HighPrecisionReal") -> "HighPrecisionReal":
        return HighPrecisionReal(self.value + other.value, self.err + other.err)

    def scale(self, c) -> "HighPrecisionReal":
        with mpmath.workdps(_DPS):
            cm = mpmath.mpf(c.numerator) / c.denominator if isinstance(c, Fraction) else mpmath.mpf(c)
            return HighPrecisionReal(self.value * cm, self.err * abs(float(cm)) + _MP_ERR)

    def agrees_with(self, other: "HighPrecisionReal", tol: float = 0.0) -> bool:
        return abs(float(self.value - other.value)) <= self.err + other.err + tol

    @staticmethod
    def exact(x) -> "HighPrecisionReal":
        with mpmath.workdps(_DPS):
            if isinstance(x, Fraction):
                return HighPrecisionReal(mpmath.mpf(x.numerator) / x.denominator, 0.0)
            return HighPrecisionReal(mpmath.mpf(x), 0.0)


def sawtooth(x: Fraction) -> Fraction:
    """((x)): 0 at integers, else x - floor(x) - 1/2."""
    x = Fraction(x)
    if x.denominator == 1:
        return Fraction(0)
    return x - math.floor(x) - Fraction(1, 2)


def eta_circle(x: Fraction) -> Fraction:
    """Circle propagator value at argument x; antisymmetric sawtooth."""
    return sawtooth(x)


def dedekind_sum_direct(q: int, p: int) -> Fraction:
    """s(q,p) by the defining sum over k = 0..p-1, exact."""
    _check_lens_pair(q, p)
    total = Fraction(0)
    for k in range(p):
        total += sawtooth(Fraction(k, p)) * sawtooth(Fraction(q * k, p))
    return total


def dedekind_sum_fast(q: int, p: int) -> Fraction:
    """s(q,p) by Euclid-style reduction through the reciprocity law, O(log p)."""
    _check_lens_pair(q, p)
    sign = Fraction(1)
    q %= p
    total = Fraction(0)
    # Invariant: answer = sign * s(q, p) + total.
    while q > 1:
        # s(q,p) = -1/4 + (1/12)(p/q + q/p + 1/(pq)) - s(p mod q, q)
        total += sign * (Fraction(-1, 4) + Fraction(p * p + q * q + 1, 12 * p * q))
        sign = -sign
        p, q = q, p % q
    if q == 1 and p > 1:
        # s(1,p) = -1/4 + (p^2 + 2)/(12 p)  (closed form of the last step)
        total += sign * (Fraction(-1, 4) + Fraction(p * p + 2, 12 * p))
    return total


def dedekind_direct_row(p: int) -> dict[int, Fraction]:
    """All s(q,p) for q coprime to p, by the defining sum vectorized over k.

    The sum is computed in scaled integers: for 0 < k < p the sawtooth is
    (2k-p)/(2p), so 4*p^2*s(q,p) is an integer dot product.  int64 is safe
    for p <= 50000.
    """
    if p < 1:
        raise ValueError("p must be positive")
    if p == 1:
        return {0: Fraction(0)}
    ks = np.arange(p, dtype=np.int64)
    w = 2 * ks - p
    w[0] = 0
    out: dict[int, Fraction] = {}
    for q in range(1, p):
        if math.gcd(q, p) != 1:
            continue
        r = (q * ks) % p
        s4 = int(np.dot(w, w[r]))
        out[q] = Fraction(s4, 4 * p * p)
    return out


def _check_lens_pair(q: int, p: int) -> None:
    if p < 1:
        raise ValueError(f"p must be a positive integer, got {p}")
    if math.gcd(q, p) != 1:
        raise ValueError(f"gcd(q, p) must be 1, got gcd({q}, {p}) = {math.gcd(q, p)}")


def harmonic_real(x) -> HighPrecisionReal:
    """Analytic extension of the harmonic numbers, H_x = digamma(x+1) + gamma.

    Defined for x > -1 (poles at negative integers).
    """
    if x <= -1:
        raise ValueError(f"harmonic extension requires x > -1, got {x}")
    with mpmath.workdps(_DPS):
        if isinstance(x, Fraction):
            xm = mpmath.mpf(x.numerator) / x.denominator
        else:
            xm = mpmath.mpf(x)
        val = mpmath.digamma(xm + 1) + mpmath.euler
        return HighPrecisionReal(val, _MP_ERR)


def f_theta(x: Fraction) -> HighPrecisionReal:
    """Boundary kernel function on the circle.

    f(x) = cos(2 pi x) ((x)) - (1/pi) sin(2 pi x) log(2 |sin(pi x)|) for
    non-integer x, and f = 0 at integers.
    """
    x = Fraction(x)
    if x.denominator == 1:
        return HighPrecisionReal.exact(0)
    s = sawtooth(x)
    with mpmath.workdps(_DPS):
        xm = mpmath.mpf(x.numerator) / x.denominator
        sm = mpmath.mpf(s.numerator) / s.denominator
        val = mpmath.cos(2 * mpmath.pi * xm) * sm
        val -= mpmath.sin(2 * mpmath.pi * xm) * mpmath.log(2 * abs(mpmath.sin(mpmath.pi * xm))) / mpmath.pi
        return HighPrecisionReal(val, _MP_ERR)
