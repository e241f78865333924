"""Exact arithmetic, prime selection and exponential sums.

Rationals are :class:`fractions.Fraction` throughout (arbitrary precision,
always reduced).  Exponential sums follow two sign conventions on purpose:
complete sums use ``e(-a/q * P(r))`` while :func:`weyl_sum` uses the plus sign.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from sympy import primerange

from .errors import NotReduced, WindowExhausted

TWO_PI = 2.0 * math.pi


def as_fraction(x) -> Fraction:
    """Exact conversion; floats map to their exact dyadic value."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(x)


def fsum_complex(values: Iterable[complex]) -> complex:
    vals = np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=complex)
    return complex(math.fsum(vals.real), math.fsum(vals.imag))


def unit_phases(num: np.ndarray, den: int) -> np.ndarray:
    """e(-num/den) for integer residues ``num`` in [0, den)."""
    theta = (-TWO_PI / den) * np.asarray(num, dtype=float)
    return np.cos(theta) + 1j * np.sin(theta)


@dataclass(frozen=True)
class ReducedRational:
    """A reduced point a/q of the circle, 0 <= a < q."""

    a: int
    q: int

    def __post_init__(self):
        if self.q < 1 or not 0 <= self.a < self.q:
            raise ValueError(f"need 0 <= a < q, got {self.a}/{self.q}")
        if math.gcd(self.a, self.q) != 1:
            raise NotReduced(f"{self.a}/{self.q} is not reduced")

    @property
    def value(self) -> Fraction:
        return Fraction(self.a, self.q)

    def __str__(self):
        return f"{self.a}/{self.q}"


@dataclass(frozen=True)
class PolynomialSpec:
    """Integer polynomial, constant term first."""

    coefficients: tuple

    def __post_init__(self):
        coeffs = tuple(int(c) for c in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if len(coeffs) < 2 or coeffs[-1] == 0:
            raise ValueError("need degree >= 1 with a nonzero leading coefficient")

    @classmethod
    def monomial(cls, d: int) -> "PolynomialSpec":
        return cls((0,) * d + (1,))

    @classmethod
    def parse(cls, text: str) -> "PolynomialSpec":
        return cls(tuple(int(t) for t in text.replace(" ", "").split(",")))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, n: int) -> int:
        acc = 0
        for c in reversed(self.coefficients):
            acc = acc * n + c
        return acc

    def values_mod(self, n: np.ndarray, q: int) -> np.ndarray:
        """P(n) mod q for an integer array; exact for q < 2**31."""
        n = np.asarray(n, dtype=np.int64) % q
        acc = np.zeros_like(n)
        for c in reversed(self.coefficients):
            acc = (acc * n + (c % q)) % q
        return acc

    def __str__(self):
        return ",".join(str(c) for c in self.coefficients)


# ---------------------------------------------------------------- primes


def _ceil_root_power(N: int, num: int, den: int) -> int:
    """Smallest integer c >= 1 with c**den >= N**num."""
    target = N ** num
    c = max(1, int(round(N ** (num / den))))
    while c > 1 and (c - 1) ** den >= target:
        c -= 1
    while c ** den < target:
        c += 1
    return c


def default_prime_count(N: int, eps) -> int:
    """ceil(N ** (eps/2)), computed exactly."""
    eps = as_fraction(eps)
    return _ceil_root_power(N, eps.numerator, 2 * eps.denominator)


def ceil_power(N: int, exponent) -> int:
    """ceil(N ** exponent) for a positive rational exponent."""
    e = as_fraction(exponent)
    return _ceil_root_power(N, e.numerator, e.denominator)


def select_primes(N: int, eps, window: Sequence[int], count: int | None = None) -> list[int]:
    """The ``count`` smallest primes in ``window`` (inclusive) not dividing N."""
    if N < 1:
        raise ValueError("N must be positive")
    eps = as_fraction(eps)
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    lo, hi = int(window[0]), int(window[1])
    if lo > hi:
        raise ValueError("empty window")
    if count is None:
        count = default_prime_count(N, eps)
    out = []
    for p in primerange(max(lo, 2), hi + 1):
        if N % p:
            out.append(int(p))
            if len(out) == count:
                return out
    raise WindowExhausted(f"only {len(out)} of {count} primes in [{lo}, {hi}] avoid N={N}")


# ----------------------------------------------------- complete exponential sums


def _check_reduced(a: int, q: int):
    if q < 1:
        raise ValueError("q must be positive")
    if math.gcd(a, q) != 1:
        raise NotReduced(f"gcd({a}, {q}) != 1")


def gauss_sum(a: int, q: int) -> complex:
    """(1/q) * sum_{r=1..q} e(-(a/q) r^2), summed directly with exact residues."""
    _check_reduced(a, q)
    if q < 2 ** 31:
        r = np.arange(1, q + 1, dtype=np.int64)
        resid = ((a % q) * ((r * r) % q)) % q
    else:
        resid = np.array([(a * x * x) % q for x in range(1, q + 1)], dtype=float)
    return fsum_complex(unit_phases(resid, q)) / q


@lru_cache(maxsize=4096)
def gauss_sums(q: int) -> np.ndarray:
    """S(a/q) for every residue a in [0, q), via one DFT of the square-count table.

    Entries with gcd(a, q) != 1 are still the normalised sums, just not Gauss sums
    of a reduced fraction.
    """
    r = np.arange(q, dtype=np.int64)
    counts = np.bincount((r * r) % q, minlength=q).astype(float)
    out = np.fft.fft(counts) / q
    out.setflags(write=False)
    return out


def poly_exp_sum(P: PolynomialSpec, a: int, q: int) -> complex:
    """(1/q) * sum_{r=1..q} e(-(a/q) P(r))."""
    _check_reduced(a, q)
    vals = P.values_mod(np.arange(1, q + 1), q)
    resid = ((a % q) * vals) % q
    return fsum_complex(unit_phases(resid, q)) / q


# ------------------------------------------------------------- Weyl sums


def _phase_numerators(coeffs: Sequence[Fraction], N: int) -> tuple[list[int], int]:
    D = 1
    for c in coeffs:
        D = D * c.denominator // math.gcd(D, c.denominator)
    ints = [0] + [int(c * D) % D for c in coeffs]  # constant term 0
    if D < 2 ** 31:
        n = np.arange(1, N + 1, dtype=np.int64) % D
        acc = np.zeros(N, dtype=np.int64)
        for c in reversed(ints):
            acc = (acc * n + c) % D
        return acc, D
    out = []
    for n in range(1, N + 1):
        acc = 0
        for c in reversed(ints):
            acc = (acc * n + c) % D
        out.append(acc)
    return out, D


def weyl_sum(coeffs: Sequence, N: int) -> complex:
    """sum_{n=1..N} e(a_d n^d + ... + a_1 n) for coefficients a_1..a_d.

    Phases are reduced mod 1 exactly (floats are taken at their exact dyadic
    value), so the only rounding is in cos/sin and the compensated sum.
    """
    if len(coeffs) < 1:
        raise ValueError("need at least one coefficient")
    if N < 1:
        raise ValueError("N must be positive")
    fr = [as_fraction(c) for c in coeffs]
    nums, D = _phase_numerators(fr, N)
    if isinstance(nums, list):
        theta = np.array([TWO_PI * Fraction(t, D) for t in nums], dtype=float)
    else:
        theta = (TWO_PI / D) * nums.astype(float)
    return complex(math.fsum(np.cos(theta)), math.fsum(np.sin(theta)))


# ------------------------------------------------------- Dirichlet approximation


def continued_fraction(x: Fraction) -> list[int]:
    terms = []
    num, den = x.numerator, x.denominator
    while den:
        a, r = divmod(num, den)
        terms.append(a)
        num, den = den, r
    return terms


def convergents(x: Fraction):
    p0, q0, p1, q1 = 1, 0, 0, 1
    for a in continued_fraction(x):
        p0, q0, p1, q1 = a * p0 + p1, a * q0 + q1, p0, q0
        yield p0, q0


def _nearest_numerator(alpha: Fraction, q: int) -> int:
    t = alpha * q
    lo = math.floor(t)
    # ties go to the smaller numerator
    return lo if t - lo <= Fraction(1, 2) else lo + 1


def dirichlet_approx(alpha, L: int) -> tuple[Fraction, Fraction]:
    """Smallest-denominator a/q (q <= L) with |alpha - a/q| <= 1/(q L).

    The minimal such q is always a continued-fraction convergent denominator,
    so only O(log L) candidates are examined.  Returns (a/q, |alpha - a/q|).
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    alpha = as_fraction(alpha)
    for _, q in convergents(alpha):
        if q > L:
            break
        a = _nearest_numerator(alpha, q)
        err = abs(alpha - Fraction(a, q))
        if err * q * L <= 1:
            return Fraction(a, q), err
    raise AssertionError("unreachable: Dirichlet's theorem guarantees some q <= L")


def reduced_rationals(s: int) -> list[ReducedRational]:
    """The dyadic block: reduced a/q in [0,1) with 2^(s-1) <= q < 2^s."""
    out = []
    for q in range(2 ** (s - 1), 2 ** s):
        for a in range(q):
            if math.gcd(a, q) == 1:
                out.append(ReducedRational(a, q))
    return out
