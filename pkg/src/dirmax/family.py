"""Arithmetic-independent direction families and their integer rescaling.

Vector i has exact coordinates ``v_i = 2^e_i * (P_i / B) * (m_i, n_i)`` where
``P_i`` is the product of a kappa-subset of a pool of large primes, ``B`` is the
base scale (the prime-window lower end to the power kappa) and ``2^e_i`` is the
dyadic correction bringing ``|v_i|`` near 1.  ``L0 = j * B * L1`` clears every
denominator, so ``L0 * v_i`` is an integer vector of length about ``A``.
"""
from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import ConstraintSearchExhausted, InsufficientPool, ScaleWindowEmpty
from .number_theory import as_fraction, ceil_power, default_prime_count, select_primes

FORMAT_VERSION = "dirmax-family/1"
A_BAND = (Fraction(1, 100), Fraction(100))
L0_BAND = (Fraction(1, 50), Fraction(50))


def compute_kappa(pool_size: int, N: int) -> int:
    """Smallest kappa >= 1 with C(pool_size, kappa) >= N."""
    if pool_size < 1:
        raise ValueError("pool_size must be >= 1")
    for kappa in range(1, pool_size // 2 + 2):
        if math.comb(pool_size, kappa) >= N:
            return kappa
    best = math.comb(pool_size, pool_size // 2)
    raise InsufficientPool(f"max_kappa C({pool_size}, kappa) = {best} < N = {N}")


@dataclass
class FamilyParams:
    N: int
    eps: Fraction = Fraction(1)
    M: int = 1
    pool_size: int | None = None
    A: int | None = None
    annulus_band: tuple = (Fraction(1, 2), Fraction(2))
    seed: int = 0
    base: int | None = None
    attempts: int = 10000
    prime_sets: list | None = None  # explicit kappa-subsets, bypasses the random assignment

    def __post_init__(self):
        self.eps = as_fraction(self.eps)
        self.annulus_band = tuple(as_fraction(c) for c in self.annulus_band)
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if not 0 < self.annulus_band[0] < self.annulus_band[1]:
            raise ValueError("need 0 < c_lo < c_hi")
        if self.pool_size is None:
            self.pool_size = default_prime_count(self.N, self.eps)

    @property
    def window(self) -> tuple[int, int]:
        lo = ceil_power(self.N, Fraction(self.M) / self.eps)
        return lo, 10 * lo

    def to_json(self) -> dict:
        d = asdict(self)
        d["eps"] = str(self.eps)
        d["annulus_band"] = [str(c) for c in self.annulus_band]
        for key in ("A", "base"):
            d[key] = None if d[key] is None else str(d[key])
        if self.prime_sets is not None:
            d["prime_sets"] = [[str(p) for p in ps] for ps in self.prime_sets]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "FamilyParams":
        d = dict(d)
        d["eps"] = Fraction(d["eps"])
        d["annulus_band"] = tuple(Fraction(c) for c in d["annulus_band"])
        for key in ("A", "base"):
            if d.get(key) is not None:
                d[key] = int(d[key])
        if d.get("prime_sets") is not None:
            d["prime_sets"] = [tuple(int(p) for p in ps) for ps in d["prime_sets"]]
        return cls(**d)


@dataclass(frozen=True)
class DirectionVector:
    m: int
    n: int
    prime_set: tuple
    q_exponent: int
    v: tuple  # (Fraction, Fraction)
    rescaled: tuple  # (int, int)


@dataclass
class DirectionFamily:
    params: FamilyParams
    kappa_primes: int
    primes: list
    base: int
    vectors: list = field(default_factory=list)
    L0: int = 1
    L1: int = 1
    A: int = 1

    def __len__(self):
        return len(self.vectors)

    def lattice_vectors(self) -> list[tuple[int, int]]:
        return [dv.rescaled for dv in self.vectors]

    def unit_vectors(self) -> list[tuple[Fraction, Fraction]]:
        return [dv.v for dv in self.vectors]

    def to_json(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "params": self.params.to_json(),
            "kappa_primes": self.kappa_primes,
            "primes": [str(p) for p in self.primes],
            "base": str(self.base),
            "L0": str(self.L0),
            "L1": str(self.L1),
            "A": str(self.A),
            "vectors": [
                {
                    "m": str(dv.m),
                    "n": str(dv.n),
                    "prime_set": [str(p) for p in dv.prime_set],
                    "q_exponent": str(dv.q_exponent),
                    "v": [str(c) for c in dv.v],
                    "rescaled": [str(c) for c in dv.rescaled],
                }
                for dv in self.vectors
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> "DirectionFamily":
        if d.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported family format {d.get('version')!r}")
        vectors = [
            DirectionVector(
                int(x["m"]), int(x["n"]), tuple(int(p) for p in x["prime_set"]), int(x["q_exponent"]),
                tuple(Fraction(c) for c in x["v"]), tuple(int(c) for c in x["rescaled"]),
            )
            for x in d["vectors"]
        ]
        return cls(FamilyParams.from_json(d["params"]), int(d["kappa_primes"]), [int(p) for p in d["primes"]],
                   int(d["base"]), vectors, int(d["L0"]), int(d["L1"]), int(d["A"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "DirectionFamily":
        return cls.from_json(json.loads(text))


def _norm2(x) -> Fraction:
    return Fraction(x[0]) ** 2 + Fraction(x[1]) ** 2


def _in_band(norm2: Fraction, target, band) -> bool:
    t2 = Fraction(target) ** 2
    return band[0] ** 2 * t2 <= norm2 <= band[1] ** 2 * t2


def _product_L1(q_exponents: Sequence[int]) -> int:
    """Product of the distinct 2^-e over exponents with 2^e <= 1."""
    return 1 << sum(-e for e in set(q_exponents) if e <= 0)


def compute_rescaling(q_exponents: Sequence[int], A: int, base: int) -> tuple[int, int]:
    """(L0, L1) with L0 = j * base * L1, j the smallest positive integer putting L0 in [A/50, 50A]."""
    L1 = _product_L1(q_exponents)
    step = base * L1
    lo, hi = L0_BAND[0] * A, L0_BAND[1] * A
    j = max(1, math.ceil(lo / step))
    if j * step > hi:
        raise ScaleWindowEmpty(f"no multiple of {step} in [{lo}, {hi}]")
    return j * step, L1


def _assign_prime_sets(rng: random.Random, primes: list, kappa: int, N: int) -> list[tuple]:
    total = math.comb(len(primes), kappa)
    if total <= 200000:
        return [tuple(c) for c in rng.sample(list(itertools.combinations(primes, kappa)), N)]
    chosen, seen = [], set()
    while len(chosen) < N:
        s = tuple(sorted(rng.sample(primes, kappa)))
        if s not in seen:
            seen.add(s)
            chosen.append(s)
    return chosen


def _dyadic_exponent(scale: Fraction) -> int:
    """e with 2^e * scale closest to 1 on a log scale."""
    lg = math.log2(scale.numerator) - math.log2(scale.denominator)
    return -round(lg)


def build_family(params: FamilyParams) -> DirectionFamily:
    N = params.N
    rng = random.Random(params.seed)
    lo, hi = params.window

    if params.prime_sets is not None:
        sets = [tuple(sorted(int(p) for p in ps)) for ps in params.prime_sets]
        if len(sets) != N:
            raise ValueError(f"prime_sets has {len(sets)} entries, N = {N}")
        kappa = len(sets[0])
        primes = sorted({p for ps in sets for p in ps})
    else:
        kappa = compute_kappa(params.pool_size, N)
        primes = select_primes(N, params.eps, (lo, hi), params.pool_size)
        sets = _assign_prime_sets(rng, primes, kappa, N)
    base = params.base if params.base is not None else lo ** kappa

    R = 100 * N * N
    c_lo, c_hi = params.annulus_band
    m_lo = max(1, math.ceil(c_lo * R * 2 / math.sqrt(5)) - 1)
    m_hi = math.floor(c_hi * R)
    used_dirs: set = set()
    mn = []
    for i in range(N):
        for _ in range(params.attempts):
            m = rng.randint(m_lo, m_hi)
            n = rng.randint(max(1, -(-m // 4)), max(1, m // 2))
            if not (4 * n >= m and 2 * n <= m):
                continue
            if not _in_band(_norm2((m, n)), R, params.annulus_band):
                continue
            g = math.gcd(m, n)
            if (m // g, n // g) in used_dirs:
                continue
            used_dirs.add((m // g, n // g))
            mn.append((m, n))
            break
        else:
            raise ConstraintSearchExhausted(
                "annulus, ratio and non-parallel constraints",
                f"vector {i}: no admissible (m, n) in {params.attempts} attempts",
            )

    exps, coords = [], []
    for (m, n), ps in zip(mn, sets):
        P = math.prod(ps)
        scale = Fraction(P, base) * Fraction(math.isqrt(m * m + n * n) or 1)
        e = _dyadic_exponent(scale)
        c = Fraction(2) ** e * Fraction(P, base)
        v = (c * m, c * n)
        if not _in_band(_norm2(v), 1, params.annulus_band):
            raise ConstraintSearchExhausted("unit band", f"|v| outside band for (m, n) = {(m, n)}")
        exps.append(e)
        coords.append(v)

    A = params.A if params.A is not None else base * _product_L1(exps)
    L0, L1 = compute_rescaling(exps, A, base)
    vectors = []
    for (m, n), ps, e, v in zip(mn, sets, exps, coords):
        r = (v[0] * L0, v[1] * L0)
        vectors.append(DirectionVector(m, n, ps, e, v, (int(r[0]), int(r[1]))))
    return DirectionFamily(params, kappa, primes, base, vectors, L0, L1, A)


@dataclass(frozen=True)
class Violation:
    bullet: str
    indices: tuple
    detail: str = ""


def validate_family(family: DirectionFamily) -> list[Violation]:
    """Every violated construction constraint with offending indices; empty iff valid."""
    out: list[Violation] = []
    p = family.params
    N, kappa, V = p.N, family.kappa_primes, family.vectors
    R = 100 * N * N
    if len(V) != N:
        out.append(Violation("family size", (), f"{len(V)} vectors, N = {N}"))
    pool = set(family.primes)
    q_lo = Fraction(1, N * N) / Fraction(2) ** (100 * kappa)
    q_hi = Fraction(1, N * N) * Fraction(2) ** (100 * kappa)
    for i, dv in enumerate(V):
        if not (dv.m > 0 and dv.n > 0 and 4 * dv.n >= dv.m and 2 * dv.n <= dv.m):
            out.append(Violation("ratio 1/4 <= n/m <= 1/2", (i,)))
        if not _in_band(_norm2((dv.m, dv.n)), R, p.annulus_band):
            out.append(Violation("annulus |(m, n)| ~ 100 N^2", (i,)))
        if len(dv.prime_set) != kappa or len(set(dv.prime_set)) != kappa:
            out.append(Violation("kappa distinct primes", (i,)))
        if not set(dv.prime_set) <= pool:
            out.append(Violation("primes from the pool", (i,)))
        Q = Fraction(2) ** dv.q_exponent
        if not q_lo <= Q <= q_hi:
            out.append(Violation("dyadic Q range", (i,), f"Q = 2^{dv.q_exponent}"))
        c = Q * Fraction(math.prod(dv.prime_set), family.base)
        if dv.v != (c * dv.m, c * dv.n):
            out.append(Violation("coordinate form", (i,)))
        if not _in_band(_norm2(dv.v), 1, p.annulus_band):
            out.append(Violation("unit band |v| ~ 1", (i,)))
        r = (dv.v[0] * family.L0, dv.v[1] * family.L0)
        if any(x.denominator != 1 for x in r) or tuple(int(x) for x in r) != tuple(dv.rescaled):
            out.append(Violation("rescaled integrality", (i,)))
        if not _in_band(_norm2(r), family.A, A_BAND):
            out.append(Violation("rescaled length in [A/100, 100A]", (i,)))
    for i, j in itertools.combinations(range(len(V)), 2):
        if V[i].m * V[j].n - V[i].n * V[j].m == 0:
            out.append(Violation("pairwise non-parallel", (i, j)))
        if sorted(V[i].prime_set) == sorted(V[j].prime_set):
            out.append(Violation("distinct prime sets", (i, j)))
    L0, L1 = family.L0, family.L1
    if L1 != _product_L1([dv.q_exponent for dv in V]) or L0 % (family.base * L1) != 0:
        out.append(Violation("L0 = j * B * L1", ()))
    if not L0_BAND[0] * family.A <= L0 <= L0_BAND[1] * family.A:
        out.append(Violation("L0 in [A/50, 50A]", ()))
    return out


def angular_separation(family: DirectionFamily) -> float:
    """Measured c with |angle(v_i) - angle(v_j)| >= c / N^2 for all i != j."""
    if len(family.vectors) < 2:
        return math.inf
    ang = sorted(math.atan2(dv.n, dv.m) for dv in family.vectors)
    gap = min(b - a for a, b in zip(ang, ang[1:]))
    return gap * len(family.vectors) ** 2


def parallel_baseline(family: DirectionFamily) -> list[tuple[int, int]]:
    """N copies of the first rescaled vector: the all-parallel comparison family."""
    return [family.vectors[0].rescaled] * len(family.vectors)


def planted_prime_sets(primes: Sequence[int], K: int, N: int) -> tuple[list[tuple], list[tuple[int, int]]]:
    """kappa = 2 prime sets with K planted pairs sharing a private prime.

    Pair j is vectors (2j, 2j+1) with sets {p_j, a_j} and {p_j, b_j}; none of
    p_j, a_j, b_j appears anywhere else.  The remaining N - 2K vectors use
    distinct pairs of the leftover primes.  Returns (sets, planted index pairs).
    """
    primes = sorted(primes)
    if 3 * K > len(primes) or 2 * K > N:
        raise InsufficientPool(f"{len(primes)} primes cannot host {K} planted pairs among {N} vectors")
    sets, planted = [], []
    for j in range(K):
        p, a, b = primes[3 * j:3 * j + 3]
        sets += [(a, p) if a < p else (p, a), (p, b)]
        planted.append((2 * j, 2 * j + 1))
    rest = primes[3 * K:]
    fillers = list(itertools.combinations(rest, 2))
    if len(fillers) < N - 2 * K:
        raise InsufficientPool(f"{len(rest)} leftover primes give {len(fillers)} filler sets < {N - 2 * K}")
    sets += [tuple(c) for c in fillers[:N - 2 * K]]
    return sets, planted
