"""Major-arc approximation of the quadratic multiplier.

    khat_k(alpha)   = sum_n phi_k(n) e(-alpha n^2)
    V_k(xi)         = int phi(t) e(-2^(2k) t^2 xi) dt
    L_{k,s}(alpha)  = sum_{a/q, 2^(s-1) <= q < 2^s} S(a/q) V_k(alpha - a/q) chi(2^((2-eps1)k) (alpha - a/q))
    L_k             = sum_{s <= eps0 k} L_{k,s}

Sample points are carried as ``num/den + offset`` with an exact rational part
and a float offset, so phases n^2 alpha are reduced mod 1 without the loss a
plain float product would suffer at n^2 ~ 2^32.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.integrate import quad

from .bump import chi, phi, sample_bump
from .errors import ArcOverlap, QuadratureBudgetExceeded
from .number_theory import ReducedRational, as_fraction, fsum_complex, gauss_sum, reduced_rationals
from .operators import GridFunction, frequency_dot, lattice_directions

EPS0 = Fraction(1, 10)
EPS1 = Fraction(1, 20)
CHI_PLATEAU = 1.0
TRAPEZOID_CAP = 1e5
ADAPTIVE_CAP = 2e4


@dataclass
class Samples:
    """alpha_i = num_i / den_i + offset_i."""

    num: np.ndarray
    den: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        self.num = np.asarray(self.num, dtype=np.int64)
        self.den = np.asarray(self.den, dtype=np.int64)
        self.offset = np.asarray(self.offset, dtype=float)

    @classmethod
    def of(cls, alpha) -> "Samples":
        """From floats, Fractions, (Fraction, offset) pairs or a list mixing them."""
        items = alpha if isinstance(alpha, (list, tuple, np.ndarray)) and not _is_pair(alpha) else [alpha]
        nums, dens, offs = [], [], []
        for a in items:
            if _is_pair(a):
                c, off = as_fraction(a[0]), float(a[1])
            elif isinstance(a, (Fraction, int, np.integer)):
                c, off = Fraction(int(a)) if not isinstance(a, Fraction) else a, 0.0
            else:
                c, off = Fraction(0), float(a)
            nums.append(c.numerator)
            dens.append(c.denominator)
            offs.append(off)
        return cls(nums, dens, offs)

    def __len__(self):
        return len(self.offset)

    def floats(self) -> np.ndarray:
        return self.num / self.den + self.offset


def _is_pair(a) -> bool:
    return isinstance(a, tuple) and len(a) == 2 and isinstance(a[0], (Fraction, int)) and isinstance(a[1], float)


def _frac_products(n2: np.ndarray, x: np.ndarray, k: int) -> np.ndarray:
    """frac(n^2 * x) for float x, splitting x into chunks whose products with n^2 are exact."""
    bits = max(1, 52 - int(n2.max()).bit_length()) if n2.size else 52
    out = np.zeros((len(x), len(n2)))
    rest = x.copy()
    scale = 1.0
    for _ in range(4):
        scale *= 2.0 ** bits
        chunk = np.round(rest * scale) / scale
        rest = rest - chunk
        prod = np.outer(chunk, n2.astype(float))
        out += prod - np.floor(prod)
        if not np.any(rest):
            break
    prod = np.outer(rest, n2.astype(float))
    out += prod - np.floor(prod)
    return out - np.floor(out)


def _phase(n: np.ndarray, S: Samples, k: int) -> np.ndarray:
    n2 = n.astype(np.int64) ** 2
    out = _frac_products(n2, S.offset, k)
    if np.any(S.num % S.den):
        if int(S.den.max()) < 2 ** 31:
            d = S.den[:, None]
            rat = ((n2[None, :] % d) * (S.num[:, None] % d)) % d
            out += rat / d
        else:
            for i in range(len(S)):
                num, den = int(S.num[i]), int(S.den[i])
                out[i] += np.array([(int(m) * num) % den for m in n2.tolist()]) / den
        out -= np.floor(out)
    return out


def khat(k: int, alpha, bump: str = "exp", block: int = 32):
    """sum_n phi_k(n) e(-alpha n^2); scalar input gives a complex, sequences give an array."""
    S = alpha if isinstance(alpha, Samples) else Samples.of(alpha)
    sl = sample_bump(bump, k)
    half = len(sl.n) // 2
    n, w = sl.n[half:], sl.weights[half:].copy()
    w[1:] *= 2.0  # even in n
    out = np.empty(len(S), dtype=complex)
    for i0 in range(0, len(S), block):
        sub = Samples(S.num[i0:i0 + block], S.den[i0:i0 + block], S.offset[i0:i0 + block])
        theta = (-2.0 * math.pi) * _phase(n, sub, k)
        out[i0:i0 + block] = (w * np.cos(theta)).sum(axis=1) + 1j * (w * np.sin(theta)).sum(axis=1)
    scalar = not isinstance(alpha, (Samples, list, np.ndarray)) or _is_pair(alpha)
    return complex(out[0]) if scalar else out


def khat_direct(k: int, alpha: Fraction, bump: str = "exp") -> complex:
    """Slow exact-phase oracle for rational alpha."""
    alpha = as_fraction(alpha)
    n, w = sample_bump(bump, k).nonzero()
    terms = []
    for ni, wi in zip(n.tolist(), w.tolist()):
        t = (alpha * ni * ni) % 1
        terms.append(wi * complex(math.cos(2 * math.pi * t), -math.sin(2 * math.pi * t)))
    return fsum_complex(terms)


# ------------------------------------------------------------- V_k


@lru_cache(maxsize=8)
def _trap_nodes(bump: str, M: int):
    t = np.linspace(0.0, 1.0, M + 1)
    w = phi(t, bump) * (2.0 / M)  # 2 * int_0^1
    w[0] *= 0.5
    w[-1] *= 0.5
    return t * t, w


def v0(lam, method: str = "trapezoid", bump: str = "exp"):
    """V_0(lambda) = int_{-1}^{1} phi(t) e(-lambda t^2) dt."""
    lam_arr = np.atleast_1d(np.asarray(lam, dtype=float))
    top = float(np.abs(lam_arr).max()) if lam_arr.size else 0.0
    if method == "trapezoid":
        if top > TRAPEZOID_CAP:
            raise QuadratureBudgetExceeded(f"|lambda| = {top:.3g} above the cap {TRAPEZOID_CAP:g}")
        M = max(1024, 64 * int(math.ceil(top)))
        t2, w = _trap_nodes(bump, M)
        theta = (-2.0 * math.pi) * np.outer(lam_arr, t2)
        out = np.cos(theta) @ w + 1j * (np.sin(theta) @ w)
    elif method == "adaptive":
        if top > ADAPTIVE_CAP:
            raise QuadratureBudgetExceeded(f"|lambda| = {top:.3g} above the cap {ADAPTIVE_CAP:g}")
        out = np.array([_v0_adaptive(float(x), bump) for x in lam_arr])
    else:
        raise ValueError(f"unknown method {method!r}")
    return complex(out[0]) if np.ndim(lam) == 0 else out


def _v0_adaptive(lam: float, bump: str) -> complex:
    """Adaptive quadrature between consecutive half-periods of the phase."""
    cuts = int(math.floor(2 * abs(lam)))
    pts = [0.0] + [math.sqrt(j / (2 * abs(lam))) for j in range(1, cuts + 1)] + [1.0]
    re, im = [], []
    for a, b in zip(pts, pts[1:]):
        if b <= a:
            continue
        f = lambda t: float(phi(t, bump))
        re.append(quad(lambda t: f(t) * math.cos(2 * math.pi * lam * t * t), a, b, epsabs=1e-14, epsrel=1e-12, limit=100)[0])
        im.append(quad(lambda t: -f(t) * math.sin(2 * math.pi * lam * t * t), a, b, epsabs=1e-14, epsrel=1e-12, limit=100)[0])
    return complex(2 * math.fsum(re), 2 * math.fsum(im))


def vk(k: int, xi, method: str = "trapezoid", bump: str = "exp"):
    """V_k(xi) = V_0(2^(2k) xi)."""
    return v0(np.asarray(xi, dtype=float) * 4.0 ** k, method, bump)


# ----------------------------------------------------------- major arcs


@dataclass
class MajorArcSystem:
    k: int
    eps0: Fraction = EPS0
    eps1: Fraction = EPS1
    centers: list = field(default_factory=list)  # ReducedRational
    half_width: float = 0.0

    @classmethod
    def build(cls, k: int, eps0=EPS0, eps1=EPS1) -> "MajorArcSystem":
        eps0, eps1 = as_fraction(eps0), as_fraction(eps1)
        smax = math.floor(eps0 * k)
        centers = [c for s in range(1, smax + 1) for c in reduced_rationals(s)]
        centers.sort(key=lambda c: c.value)
        sys = cls(k, eps0, eps1, centers, 2.0 ** (float(eps1 - 2) * k))
        sys.validate()
        return sys

    @property
    def s_max(self) -> int:
        return math.floor(self.eps0 * self.k)

    @property
    def support_half_width(self) -> float:
        return 2 * CHI_PLATEAU * self.half_width

    def validate(self):
        """Cutoff supports must be pairwise disjoint on the circle."""
        if len(self.centers) < 2:
            return
        vals = [c.value for c in self.centers] + [self.centers[0].value + 1]
        reach = Fraction(2 * self.support_half_width)
        for a, b in zip(vals, vals[1:]):
            if b - a <= reach:
                raise ArcOverlap(f"supports around {a} and {b} meet at k={self.k}")

    def nearest(self, S: Samples):
        """Index of the nearest center and the signed offset alpha - a/q (wrapped to [-1/2, 1/2))."""
        if not self.centers:
            return np.full(len(S), -1), np.full(len(S), np.inf)
        best_i = np.full(len(S), -1)
        best_d = np.full(len(S), np.inf)
        for ci, c in enumerate(self.centers):
            d = _offset_from(S, c)
            better = np.abs(d) < np.abs(best_d)
            best_i[better], best_d[better] = ci, d[better]
        return best_i, best_d

    def on_arc(self, S: Samples) -> np.ndarray:
        _, d = self.nearest(S)
        return np.abs(d) <= self.half_width


def _offset_from(S: Samples, c: ReducedRational) -> np.ndarray:
    """alpha - a/q wrapped to [-1/2, 1/2); exact when the rational part equals a/q."""
    same = S.num * c.q == c.a * S.den
    coarse = S.num / S.den - c.a / c.q
    out = np.where(same, S.offset, coarse + S.offset)
    wrap = (out < -0.5) | (out >= 0.5)  # wrapping tiny offsets would round them
    out[wrap] = (out[wrap] + 0.5) % 1.0 - 0.5
    return out


class ApproximantL:
    """Evaluator for L_{k,s} and L_k on a fixed arc system."""

    def __init__(self, arcs: MajorArcSystem, bump: str = "exp"):
        self.arcs = arcs
        self.bump = bump
        self.gauss = {(c.a, c.q): gauss_sum(c.a, c.q) for c in arcs.centers}

    def _terms(self, S: Samples, block_s: int | None):
        k, a = self.arcs.k, self.arcs
        out = np.zeros(len(S), dtype=complex)
        scale = 2.0 ** (float(2 - a.eps1) * k)
        for c in a.centers:
            if block_s is not None and not 2 ** (block_s - 1) <= c.q < 2 ** block_s:
                continue
            d = _offset_from(S, c)
            live = np.abs(d) < a.support_half_width
            if live.any():
                dd = d[live]
                out[live] += self.gauss[(c.a, c.q)] * vk(k, dd, bump=self.bump) * chi(scale * dd, CHI_PLATEAU)
        return out

    def Ls(self, s: int, alpha):
        if not 1 <= s <= self.arcs.s_max:
            raise ValueError(f"s must lie in [1, {self.arcs.s_max}]")
        S = alpha if isinstance(alpha, Samples) else Samples.of(alpha)
        return self._terms(S, s)

    def L(self, alpha):
        S = alpha if isinstance(alpha, Samples) else Samples.of(alpha)
        return self._terms(S, None)


def build_L(k: int, eps0=EPS0, eps1=EPS1, bump: str = "exp") -> ApproximantL:
    return ApproximantL(MajorArcSystem.build(k, eps0, eps1), bump)


# ------------------------------------------------------------------ scans


@dataclass
class DecayFitReport:
    ks: list
    sup_error: list
    on_arc_max: list
    off_arc_max: list
    n_samples: list
    slope: float
    intercept: float
    eps0: Fraction = EPS0
    eps1: Fraction = EPS1

    def on_arc_bound(self, k: int) -> float:
        return 2.0 ** (float(2 * self.eps1 - 1) * k)

    def to_json(self) -> dict:
        return {"ks": self.ks, "sup_error": self.sup_error, "on_arc_max": self.on_arc_max,
                "off_arc_max": self.off_arc_max, "n_samples": self.n_samples, "slope": self.slope,
                "intercept": self.intercept, "eps0": str(self.eps0), "eps1": str(self.eps1)}


PROFILE_COLUMNS = ["k", "alpha_num", "alpha_den", "alpha_offset", "re_khat", "im_khat", "re_L", "im_L",
                   "abs_err", "on_arc"]


ARC_OFFSETS = (1.0, 0.999, 0.75, 0.5, 0.25, 0.125)
TRANSITION_OFFSETS = (1.25, 1.5, 1.9)


def scan_samples(arcs: MajorArcSystem, n_random: int, rng: np.random.Generator, transition: bool = False) -> Samples:
    """Arc centers, edges and interior points, then uniform minor-arc points.

    ``transition`` adds points in the cutoff ramp w < |alpha - a/q| < 2w.
    """
    w = arcs.half_width
    offsets = ARC_OFFSETS + (TRANSITION_OFFSETS if transition else ())
    pts = []
    for c in arcs.centers:
        cf = Fraction(c.a, c.q)
        pts.append((cf, 0.0))
        for t in offsets:
            pts += [(cf, t * w), (cf, -t * w)]
    on = Samples.of(pts) if pts else Samples([], [], [])
    rand = []
    while len(rand) < n_random:
        x = rng.random(n_random)
        S = Samples(np.zeros(len(x), np.int64), np.ones(len(x), np.int64), x)
        keep = ~arcs.on_arc(S) if arcs.centers else np.ones(len(x), bool)
        rand += x[keep].tolist()
    rand = np.array(rand[:n_random])
    return Samples(np.concatenate([on.num, np.zeros(n_random, np.int64)]),
                   np.concatenate([on.den, np.ones(n_random, np.int64)]),
                   np.concatenate([on.offset, rand]))


def approx_error_scan(ks: Sequence[int], samples: int = 10_000, eps0=EPS0, eps1=EPS1, seed: int = 0,
                      bump: str = "exp", profile: list | None = None, transition: bool = False) -> DecayFitReport:
    """Sampled sup |khat_k - L_k| per k with a least-squares fit of log2(sup) against k."""
    sups, ons, offs, counts = [], [], [], []
    for k in ks:
        L = build_L(k, eps0, eps1, bump)
        rng = np.random.default_rng([seed, k])
        S = scan_samples(L.arcs, samples, rng, transition)
        K = khat(k, S, bump)
        Lv = L.L(S)
        err = np.abs(K - Lv)
        on = L.arcs.on_arc(S)
        sups.append(float(err.max()))
        ons.append(float(err[on].max()) if on.any() else 0.0)
        offs.append(float(err[~on].max()) if (~on).any() else 0.0)
        counts.append(len(S))
        if profile is not None:
            for i in range(len(S)):
                profile.append([k, int(S.num[i]), int(S.den[i]), repr(float(S.offset[i])), repr(float(K[i].real)),
                                repr(float(K[i].imag)), repr(float(Lv[i].real)), repr(float(Lv[i].imag)),
                                repr(float(err[i])), int(on[i])])
    ks = list(ks)
    if len(ks) >= 2:
        slope, intercept = np.polyfit(np.array(ks, float), np.log2(np.array(sups)), 1)
    else:
        slope, intercept = float("nan"), float(np.log2(sups[0])) if sups else float("nan")
    return DecayFitReport(ks, sups, ons, offs, counts, float(slope), float(intercept),
                          as_fraction(eps0), as_fraction(eps1))


def profile_csv(rows: list) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(PROFILE_COLUMNS)
    wr.writerows(rows)
    return buf.getvalue()


# --------------------------------------------------------- arc-localised operator


def ls_multiplier(Q: int, v, L: ApproximantL, s: int, reduced_only: bool = False, tau=None) -> np.ndarray:
    """xi -> L_{k,s}(v . xi / Q) on Z_Q^2, optionally restricted to the block's reduced combs."""
    t = np.arange(Q, dtype=np.int64)
    table = L.Ls(s, Samples(t, np.full(Q, Q, np.int64), np.zeros(Q)))
    dot = frequency_dot(Q, v)
    m = table[dot]
    if reduced_only:
        from .incidence import reduced_comb_mask

        width = as_fraction(tau) if tau is not None else Fraction(2 * L.arcs.support_half_width)
        mask = np.zeros((Q, Q), dtype=bool)
        for q in range(2 ** (s - 1), 2 ** s):
            mask |= reduced_comb_mask(Q, v, q, width)
        m = np.where(mask, m, 0)
    return m


def apply_Ls_max(f: GridFunction, directions, k: int, s: int, eps0=EPS0, eps1=EPS1, bump: str = "exp",
                 reduced_only: bool = False) -> GridFunction:
    """sup_v |T_v f| with T_v the multiplier L_{k,s}(v . xi / Q)."""
    L = build_L(k, eps0, eps1, bump)
    fhat = np.fft.fft2(f.values)
    out = np.zeros(f.values.shape)
    for v in dict.fromkeys(lattice_directions(directions, f.Q)):
        m = ls_multiplier(f.Q, v, L, s, reduced_only)
        np.maximum(out, np.abs(np.fft.ifft2(m * fhat)), out=out)
    return GridFunction(out)
