"""Exact geometry of arithmetic combs and their incidence counts.

A comb for direction v, modulus r and thickness tau is the union of strips
``|v . beta - b/r| <= tau`` (b an integer), minus the open ball ``|beta| < rho0``.
Membership is decided in floats when the margin is safe and in exact
rationals otherwise, so every reported count is exact.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import BudgetExceeded, DegeneratePair
from .number_theory import as_fraction

FLOAT_MARGIN = 1e-9


def _vec(v) -> tuple[Fraction, Fraction]:
    return (as_fraction(v[0]), as_fraction(v[1]))


@dataclass(frozen=True)
class Comb:
    v: tuple
    r: int
    s: int
    tau: Fraction
    rho0: Fraction
    ambient: str = "torus"  # or "dilated"

    def __post_init__(self):
        object.__setattr__(self, "v", _vec(self.v))
        object.__setattr__(self, "tau", as_fraction(self.tau))
        object.__setattr__(self, "rho0", as_fraction(self.rho0))
        if self.v == (0, 0):
            raise ValueError("comb direction must be nonzero")
        if self.tau <= 0 or self.rho0 <= 0:
            raise ValueError("need tau > 0 and rho0 > 0")
        if not 2 ** (self.s - 1) <= self.r < 2 ** self.s:
            raise ValueError(f"r = {self.r} outside the block [2^{self.s - 1}, 2^{self.s})")
        if self.ambient not in ("torus", "dilated"):
            raise ValueError("ambient must be 'torus' or 'dilated'")

    def to_json(self) -> dict:
        return {"v": [str(c) for c in self.v], "r": self.r, "s": self.s, "tau": str(self.tau),
                "rho0": str(self.rho0), "ambient": self.ambient}

    @classmethod
    def from_json(cls, d: dict) -> "Comb":
        return cls(tuple(Fraction(c) for c in d["v"]), int(d["r"]), int(d["s"]), Fraction(d["tau"]),
                   Fraction(d["rho0"]), d.get("ambient", "torus"))


def default_rho0(A: int, ambient: str) -> Fraction:
    return Fraction(1, A) if ambient == "dilated" else Fraction(1, A * A)


def default_C1(s: int) -> int:
    """Smallest C1 with 2^(-C1 s) <= (1/8) * 2^(-2s), an eighth of the closest spacing of block fractions."""
    C1 = 1
    while Fraction(1, 2 ** (C1 * s)) > Fraction(1, 8 * 4 ** s):
        C1 += 1
    return C1


def block_combs(directions, s: int, tau=None, rho0=Fraction(1, 10 ** 6), ambient: str = "torus",
                C1: int | None = None) -> list[Comb]:
    """All combs (v, r) over the directions and the dyadic block 2^(s-1) <= r < 2^s."""
    if tau is None:
        tau = Fraction(1, 2 ** ((C1 or default_C1(s)) * s))
    return [Comb(v, r, s, tau, rho0, ambient) for v in directions for r in range(2 ** (s - 1), 2 ** s)]


def comb_distance(comb: Comb, beta) -> tuple[Fraction, bool]:
    """(distance from v . beta to (1/r) Z, membership)."""
    beta = _vec(beta)
    t = (comb.v[0] * beta[0] + comb.v[1] * beta[1]) * comb.r
    b = math.floor(t + Fraction(1, 2))
    dist = abs(t - b) / comb.r
    outside_ball = beta[0] ** 2 + beta[1] ** 2 >= comb.rho0 ** 2
    return dist, dist <= comb.tau and outside_ball


@dataclass(frozen=True)
class Box:
    x0: Fraction
    x1: Fraction
    y0: Fraction
    y1: Fraction

    def __post_init__(self):
        for k in ("x0", "x1", "y0", "y1"):
            object.__setattr__(self, k, as_fraction(getattr(self, k)))
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError("empty box")

    def contains(self, p) -> bool:
        return self.x0 <= p[0] <= self.x1 and self.y0 <= p[1] <= self.y1

    def corners(self):
        return [(self.x0, self.y0), (self.x1, self.y0), (self.x1, self.y1), (self.x0, self.y1)]

    def edges(self):
        c = self.corners()
        return [(c[i], c[(i + 1) % 4]) for i in range(4)]

    def to_json(self) -> dict:
        return {k: str(getattr(self, k)) for k in ("x0", "x1", "y0", "y1")}


@dataclass(frozen=True)
class Lattice:
    base: tuple
    g1: tuple
    g2: tuple

    def point(self, a: int, b: int):
        return (self.base[0] + a * self.g1[0] + b * self.g2[0], self.base[1] + a * self.g1[1] + b * self.g2[1])


def _perp(v):
    return (-v[1], v[0])


def _dot(u, w):
    return u[0] * w[0] + u[1] * w[1]


def pair_intersection_lattice(c1: Comb, c2: Comb) -> Lattice:
    """Lattice of intersections of the center lines v1.beta = a/r1 and v2.beta = b/r2.

    The point for (a, b) is a*g1 + b*g2 with g1 = v2^perp / (r1 <v1, v2^perp>)
    and g2 = v1^perp / (r2 <v2, v1^perp>): the dual basis of (v1, v2) scaled by 1/r.
    """
    d = _dot(c1.v, _perp(c2.v))
    if d == 0:
        raise DegeneratePair(f"parallel directions {c1.v} and {c2.v}")
    p1, p2 = _perp(c2.v), _perp(c1.v)
    k1 = 1 / (c1.r * d)
    k2 = 1 / (c2.r * _dot(c2.v, p2))
    return Lattice((Fraction(0), Fraction(0)), (p1[0] * k1, p1[1] * k1), (p2[0] * k2, p2[1] * k2))


# ----------------------------------------------------------------- evaluation


def _count_exact(combs: Sequence[Comb], p) -> int:
    return sum(1 for c in combs if comb_distance(c, p)[1])


def _count_points(combs: Sequence[Comb], points: list) -> np.ndarray:
    """Exact membership counts at rational points, float-filtered."""
    if not points:
        return np.zeros(0, dtype=np.int64)
    P = np.array([[float(x), float(y)] for x, y in points])
    counts = np.zeros(len(points), dtype=np.int64)
    ball = [float(c.rho0) for c in combs]
    r2 = (P ** 2).sum(axis=1)
    for ci, c in enumerate(combs):
        t = c.r * (float(c.v[0]) * P[:, 0] + float(c.v[1]) * P[:, 1])
        dist = np.abs(t - np.round(t)) / c.r
        tol = FLOAT_MARGIN * (1.0 + np.abs(t)) / c.r
        tau = float(c.tau)
        sure_in = (dist < tau - tol) & (r2 > ball[ci] ** 2 * (1 + 1e-9) + 1e-300)
        sure_out = (dist > tau + tol) | (r2 < ball[ci] ** 2 * (1 - 1e-9))
        counts += sure_in
        for i in np.nonzero(~(sure_in | sure_out))[0]:
            counts[i] += comb_distance(c, points[i])[1]
    return counts


def _solve(v1, t1, v2, t2):
    d = v1[0] * v2[1] - v1[1] * v2[0]
    return ((t1 * v2[1] - t2 * v1[1]) / d, (v1[0] * t2 - v2[0] * t1) / d)


def _range_on_box(v, box: Box):
    vals = [v[0] * x + v[1] * y for x, y in box.corners()]
    return min(vals), max(vals)


def _lines(comb: Comb, box: Box, offsets) -> list[Fraction]:
    """Levels t with v.beta = t for center (offset 0) or boundary lines meeting the box."""
    lo, hi = _range_on_box(comb.v, box)
    out = []
    for off in offsets:
        for b in range(math.ceil((lo - off) * comb.r), math.floor((hi - off) * comb.r) + 1):
            out.append(Fraction(b, comb.r) + off)
    return out


def _edge_points(combs: Sequence[Comb], box: Box) -> list:
    """Breakpoints of the membership count along each box edge (an exact 1D sweep)."""
    pts = list(box.corners())
    for p0, p1 in box.edges():
        dx, dy = p1[0] - p0[0], p1[1] - p0[1]
        for c in combs:
            c0 = c.v[0] * p0[0] + c.v[1] * p0[1]
            c1 = c.v[0] * dx + c.v[1] * dy
            if c1 == 0:
                continue
            for t in _lines(c, box, (-c.tau, c.tau)):
                u = (t - c0) / c1
                if 0 <= u <= 1:
                    pts.append((p0[0] + u * dx, p0[1] + u * dy))
    return pts


def candidate_points(combs: Sequence[Comb], box: Box, budget: int = 2_000_000) -> list:
    """Vertices of the strip arrangement inside the box, plus center-lattice points and edge breakpoints.

    The maximum of a sum of closed-strip indicators over a box is attained at a
    vertex of the arrangement cell where it is maximal, so this set is complete
    away from the exclusion circle.
    """
    groups: dict = {}
    for c in combs:
        groups.setdefault(c.v, []).append(c)
    levels = {}
    for c in combs:
        levels[c] = _lines(c, box, (-c.tau, Fraction(0), c.tau))
    total = 0
    for (va, ca), (vb, cb) in itertools.combinations(groups.items(), 2):
        if va[0] * vb[1] - va[1] * vb[0] == 0:
            continue
        total += sum(len(levels[x]) for x in ca) * sum(len(levels[y]) for y in cb)
    if total > budget:
        raise BudgetExceeded(f"{total} candidate vertices exceed the budget {budget}")
    pts = set()
    for (va, ca), (vb, cb) in itertools.combinations(groups.items(), 2):
        if va[0] * vb[1] - va[1] * vb[0] == 0:
            continue
        ta = sorted({t for x in ca for t in levels[x]})
        tb = sorted({t for y in cb for t in levels[y]})
        for t1 in ta:
            for t2 in tb:
                p = _solve(va, t1, vb, t2)
                if box.contains(p):
                    pts.add(p)
    # single comb cells and parallel-only cells have their vertices on the box boundary
    pts.update(_edge_points(combs, box))
    for c in combs:
        for t in _lines(c, box, (Fraction(0),)):
            pts.update(_line_box_samples(c.v, t, box))
    return sorted(pts)


def _line_box_samples(v, t, box: Box):
    """Endpoints and midpoint of the segment {v.beta = t} inside the box."""
    hits = []
    for p0, p1 in box.edges():
        dx, dy = p1[0] - p0[0], p1[1] - p0[1]
        c0 = v[0] * p0[0] + v[1] * p0[1]
        c1 = v[0] * dx + v[1] * dy
        if c1 == 0:
            if c0 == t:
                hits += [p0, p1]
            continue
        u = (t - c0) / c1
        if 0 <= u <= 1:
            hits.append((p0[0] + u * dx, p0[1] + u * dy))
    if not hits:
        return []
    a, b = min(hits), max(hits)
    return [a, b, ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2)]


def _count_chunk(args):
    combs, points = args
    return _count_points(combs, points)


@dataclass
class IncidenceReport:
    value: int
    argmax: tuple
    method: str
    params: dict = field(default_factory=dict)
    points_evaluated: int = 0

    def to_json(self) -> dict:
        return {"value": self.value, "argmax": [str(c) for c in self.argmax] if self.argmax else None,
                "method": self.method, "params": self.params, "points_evaluated": self.points_evaluated}


def _grid_spacing(combs) -> Fraction:
    tau = min(c.tau for c in combs)
    h = Fraction(1)
    while h > tau / 4:
        h /= 2
    return h


def _grid_counts(combs: Sequence[Comb], box: Box, h: Fraction, row_chunk: int = 64):
    """Exact counts on the grid box.x0 + i h, box.y0 + j h, by integer arithmetic."""
    nx = int((box.x1 - box.x0) / h) + 1
    ny = int((box.y1 - box.y0) / h) + 1
    D = math.lcm(box.x0.denominator, box.y0.denominator, h.denominator)
    X0, Y0, H = int(box.x0 * D), int(box.y0 * D), int(h * D)
    xs = X0 + H * np.arange(nx, dtype=object)
    ys = Y0 + H * np.arange(ny, dtype=object)
    coord_max = max(abs(X0), abs(Y0), abs(X0 + H * nx), abs(Y0 + H * ny))
    best_val, best_pt = -1, None
    for i0 in range(0, nx, row_chunk):
        X = xs[i0:i0 + row_chunk][:, None]
        Y = ys[None, :]
        counts = None
        for c in combs:
            d = math.lcm(c.v[0].denominator, c.v[1].denominator)
            a, b = int(c.v[0] * d), int(c.v[1] * d)
            S = d * D
            tn, td = c.tau.numerator, c.tau.denominator
            big = (abs(a) + abs(b)) * coord_max * c.r * 4 + S > 2 ** 62 or tn * c.r * S > 2 ** 62 \
                or 2 * coord_max ** 2 * c.rho0.denominator ** 2 > 2 ** 62
            dt = object if big else np.int64
            Xc, Yc = X.astype(dt), Y.astype(dt)
            T = c.r * (a * Xc + b * Yc)
            near = (2 * T + S) // (2 * S)
            resid = np.abs(T - near * S)
            inside = resid * td <= tn * c.r * S
            rn, rd = c.rho0.numerator, c.rho0.denominator
            inside &= (Xc * Xc + Yc * Yc) * rd * rd >= rn * rn * D * D
            inside = inside.astype(np.int64)
            counts = inside if counts is None else counts + inside
        flat = int(np.argmax(counts))
        val = int(counts.ravel()[flat])
        if val > best_val:
            i, j = divmod(flat, ny)
            best_val, best_pt = val, (box.x0 + (i0 + i) * h, box.y0 + j * h)
    return best_val, best_pt, nx * ny


def incidence_count(combs: Sequence[Comb], domain: Box, method: str = "candidate", budget: int = 2_000_000,
                    workers: int = 1, spacing: Fraction | None = None) -> IncidenceReport:
    """sup over the domain of the number of combs containing beta.

    ``grid`` scans an exact dyadic grid of spacing <= tau/4; ``candidate``
    evaluates the arrangement vertices.  Ties go to the lexicographically
    smallest point, so the reported argmax is independent of ``workers``.
    """
    combs = list(combs)
    if not combs:
        raise ValueError("empty comb set")
    params = {"n_combs": len(combs), "domain": domain.to_json(),
              "tau_min": str(min(c.tau for c in combs)), "rho0": str(min(c.rho0 for c in combs))}
    if method == "grid":
        h = as_fraction(spacing) if spacing is not None else _grid_spacing(combs)
        n = (int((domain.x1 - domain.x0) / h) + 1) * (int((domain.y1 - domain.y0) / h) + 1)
        if n > budget:
            raise BudgetExceeded(f"{n} grid points exceed the budget {budget}")
        val, pt, n = _grid_counts(combs, domain, h)
        params["spacing"] = str(h)
        return IncidenceReport(val, pt, "grid", params, n)
    if method != "candidate":
        raise ValueError(f"unknown method {method!r}")
    pts = candidate_points(combs, domain, budget)
    if workers > 1 and len(pts) > 1000:
        size = -(-len(pts) // workers)
        chunks = [(combs, pts[i:i + size]) for i in range(0, len(pts), size)]
        with ProcessPoolExecutor(workers) as ex:
            counts = np.concatenate(list(ex.map(_count_chunk, chunks)))
    else:
        counts = _count_points(combs, pts)
    if len(pts) == 0:
        return IncidenceReport(0, None, "candidate", params, 0)
    best = int(np.argmax(counts))  # first maximum in sorted order
    return IncidenceReport(int(counts[best]), pts[best], "candidate", params, len(pts))


# ------------------------------------------------------------------ pigeonhole


@dataclass
class PairingReport:
    pairs: list  # [((i, j), prime)]
    count: int
    target: int

    @property
    def met(self) -> bool:
        return self.count >= self.target

    def to_json(self) -> dict:
        return {"pairs": [[list(ij), str(p)] for ij, p in self.pairs], "count": self.count,
                "target": self.target, "met": self.met}


def _prime_sets(family_or_sets) -> list[tuple]:
    vecs = getattr(family_or_sets, "vectors", None)
    if vecs is not None:
        return [tuple(dv.prime_set) for dv in vecs]
    return [tuple(ps) for ps in family_or_sets]


def check_pair_pigeonhole(family, subset: Sequence[int], target: int) -> PairingReport:
    """Greedy disjoint pairs, each sharing a prime not used by an earlier pair.

    Primes are visited in increasing order and each pairs the first two unused
    vectors carrying it; one pass suffices since the unused set only shrinks.
    """
    sets = _prime_sets(family)
    subset = sorted(set(int(i) for i in subset))
    for i in subset:
        if not 0 <= i < len(sets):
            raise IndexError(f"index {i} out of range")
    used: set = set()
    pairs = []
    for p in sorted({p for i in subset for p in sets[i]}):
        carriers = [i for i in subset if i not in used and p in sets[i]]
        if len(carriers) >= 2:
            i, j = carriers[:2]
            used.update((i, j))
            pairs.append(((i, j), p))
    return PairingReport(pairs, len(pairs), target)


def validate_pairing(report: PairingReport, family, subset: Sequence[int]) -> list[str]:
    """Independent check: pairs disjoint and inside the subset, primes distinct and shared."""
    sets = _prime_sets(family)
    sub = set(subset)
    problems = []
    seen_idx, seen_p = set(), set()
    for (i, j), p in report.pairs:
        if i == j or i not in sub or j not in sub:
            problems.append(f"pair {(i, j)} not two distinct subset members")
        if i in seen_idx or j in seen_idx:
            problems.append(f"pair {(i, j)} overlaps an earlier pair")
        if p in seen_p:
            problems.append(f"prime {p} used twice")
        if p not in sets[i] or p not in sets[j]:
            problems.append(f"prime {p} not shared by {(i, j)}")
        seen_idx.update((i, j))
        seen_p.add(p)
    if report.count != len(report.pairs):
        problems.append("count does not match the pair list")
    return problems


def max_prime_matching(family, subset: Sequence[int]) -> int:
    """Exhaustive optimum of the pairing problem (small inputs only)."""
    sets = _prime_sets(family)
    subset = sorted(subset)

    def best(avail: tuple, primes_used: frozenset) -> int:
        if len(avail) < 2:
            return 0
        i, rest = avail[0], avail[1:]
        out = best(rest, primes_used)
        for j in rest:
            for p in set(sets[i]) & set(sets[j]):
                if p not in primes_used:
                    out = max(out, 1 + best(tuple(x for x in rest if x != j), primes_used | {p}))
        return out

    return best(tuple(subset), frozenset())


# ------------------------------------------------------------- reduced combs


def reduced_comb_member(v, beta, q: int, tau) -> bool:
    """Is dist(v . beta, {a/q : gcd(a, q) = 1}) <= tau?  Exact."""
    t = (as_fraction(v[0]) * as_fraction(beta[0]) + as_fraction(v[1]) * as_fraction(beta[1])) * q
    a = math.floor(t + Fraction(1, 2))
    tau = as_fraction(tau)
    for b in (a - 1, a, a + 1):
        if math.gcd(b, q) == 1 and abs(t - b) <= tau * q:
            return True
    return False


def reduced_block_indicator_sum(v, beta, s: int, tau) -> int:
    """Number of moduli q in the block 2^(s-1) <= q < 2^s whose reduced comb contains beta."""
    return sum(reduced_comb_member(v, beta, q, tau) for q in range(2 ** (s - 1), 2 ** s))


def reduced_comb_mask(Q: int, v, q: int, tau) -> np.ndarray:
    """Boolean mask of frequencies xi in Z_Q^2 with v.xi/Q in the reduced comb of modulus q."""
    xi = np.arange(Q, dtype=np.int64)
    dot = np.add.outer((int(v[0]) % Q) * xi, (int(v[1]) % Q) * xi) % Q
    tau = as_fraction(tau)
    # |dot/Q - a/q| <= tau  <=>  |q dot - a Q| <= tau q Q
    a = (2 * q * dot + Q) // (2 * Q)
    mask = np.zeros((Q, Q), dtype=bool)
    for b in (a - 1, a, a + 1):
        coprime = np.gcd(b, q) == 1
        close = np.abs(q * dot - b * Q) * tau.denominator <= tau.numerator * q * Q
        mask |= coprime & close
    return mask
