"""Directional averages, maximal and singular operators on the torus Z_Q x Z_Q.

Arrays are indexed ``values[x, y]``.  Every translation-invariant piece has two
evaluation routes: a spatial one (sums of exact modular shifts) and a spectral
one (``ifft2(multiplier * fft2(f))``).  On the finite torus the second route is
an exact diagonalisation, so the two agree up to floating-point roundoff.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .bump import sample_bump
from .errors import IoFailure, ZeroDirection
from .number_theory import PolynomialSpec

LINEAR = PolynomialSpec((0, 1))


@dataclass
class GridFunction:
    values: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError("grid functions live on a square Q x Q torus")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function has non-finite values")

    @property
    def Q(self) -> int:
        return self.values.shape[0]

    @classmethod
    def random(cls, Q: int, seed: int = 0, real: bool = False) -> "GridFunction":
        rng = np.random.default_rng(seed)
        vals = rng.standard_normal((Q, Q))
        if not real:
            vals = vals + 1j * rng.standard_normal((Q, Q))
        return cls(vals, seed=seed)

    @classmethod
    def point_mass(cls, Q: int, at=(0, 0)) -> "GridFunction":
        vals = np.zeros((Q, Q), dtype=complex)
        vals[at[0] % Q, at[1] % Q] = 1.0
        return cls(vals)

    @classmethod
    def constant(cls, Q: int, c: complex = 1.0) -> "GridFunction":
        return cls(np.full((Q, Q), c, dtype=complex))

    @classmethod
    def plane_wave(cls, Q: int, xi) -> "GridFunction":
        x = np.arange(Q)
        phase = (np.outer(x * xi[0], np.ones(Q, dtype=np.int64)) + np.outer(np.ones(Q, dtype=np.int64), x * xi[1])) % Q
        return cls(np.exp(2j * np.pi * phase / Q))

    def norm(self) -> float:
        return math.sqrt(math.fsum(np.abs(self.values.ravel()) ** 2))

    def translate(self, x0) -> "GridFunction":
        """(x -> f(x - x0))."""
        return GridFunction(np.roll(self.values, (x0[0] % self.Q, x0[1] % self.Q), axis=(0, 1)))

    # raw little-endian interleaved float64 (re, im) plus a JSON sidecar
    def save(self, path) -> None:
        path = Path(path)
        try:
            self.values.astype("<c16").tofile(path)
            sidecar = {"Q": self.Q, "dtype": "complex128-le-interleaved", "seed": self.seed}
            path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, sort_keys=True) + "\n")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "GridFunction":
        path = Path(path)
        try:
            meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
            raw = np.fromfile(path, dtype="<f8")
        except OSError as exc:
            raise IoFailure(str(exc)) from exc
        Q = int(meta["Q"])
        if raw.size != 2 * Q * Q:
            raise IoFailure(f"{path}: expected {2 * Q * Q} doubles, found {raw.size}")
        vals = (raw[0::2] + 1j * raw[1::2]).reshape(Q, Q)
        return cls(vals, seed=meta.get("seed"))


def _as_vector(v) -> tuple[int, int]:
    v = (int(v[0]), int(v[1]))
    if v == (0, 0):
        raise ZeroDirection("direction (0, 0)")
    return v


def _shift_weights(Q: int, v, k: int, P: PolynomialSpec, bump: str) -> dict:
    """Total bump weight landing on each torus shift P(n) v mod Q."""
    n, w = sample_bump(bump, k).nonzero()
    acc = defaultdict(list)
    for ni, wi in zip(n.tolist(), w.tolist()):
        pn = P(ni)
        acc[((pn * v[0]) % Q, (pn * v[1]) % Q)].append(wi)
    return {s: math.fsum(ws) for s, ws in acc.items()}


def apply_directional_avg(f: GridFunction, v, k: int, P: PolynomialSpec | None = None,
                          bump: str = "exp") -> GridFunction:
    """x -> sum_n f(x - P(n) v) phi_k(n), spatially."""
    v = _as_vector(v)
    P = P or LINEAR
    out = np.zeros_like(f.values)
    for shift, w in sorted(_shift_weights(f.Q, v, k, P, bump).items()):
        out += w * np.roll(f.values, shift, axis=(0, 1))
    return GridFunction(out)


def frequency_dot(Q: int, v) -> np.ndarray:
    """(v . xi) mod Q on the frequency grid."""
    xi = np.arange(Q, dtype=np.int64)
    return (np.add.outer((v[0] % Q) * xi, (v[1] % Q) * xi)) % Q


def directional_multiplier(Q: int, v, k: int, P: PolynomialSpec | None = None,
                           bump: str = "exp") -> np.ndarray:
    """xi -> sum_n phi_k(n) e(-P(n) (v . xi) / Q)."""
    v = _as_vector(v)
    P = P or LINEAR
    n, w = sample_bump(bump, k).nonzero()
    residues = np.array([P(int(ni)) % Q for ni in n], dtype=np.int64)
    table = np.fft.fft(np.bincount(residues, weights=w, minlength=Q))
    return table[frequency_dot(Q, v)]


def multiplier_transform(f: GridFunction, multiplier) -> GridFunction:
    """Inverse DFT of multiplier * DFT(f); ``multiplier`` is an array or a callable (xi0, xi1)."""
    if callable(multiplier):
        xi = np.arange(f.Q)
        multiplier = multiplier(*np.meshgrid(xi, xi, indexing="ij"))
    multiplier = np.broadcast_to(np.asarray(multiplier), (f.Q, f.Q))
    return GridFunction(np.fft.ifft2(multiplier * np.fft.fft2(f.values)))


def lattice_directions(directions, Q: int | None = None) -> list[tuple[int, int]]:
    """Integer directions from a family (rescaled vectors) or an explicit list."""
    vecs = getattr(directions, "lattice_vectors", None)
    vecs = vecs() if callable(vecs) else directions
    out = [(int(a), int(b)) for a, b in vecs]
    if Q is not None:
        out = [(a % Q, b % Q) for a, b in out]
    return out


def _dedupe(items):
    seen, out = set(), []
    for it in items:
        if it not in seen:
            seen.add(it)
            out.append(it)
    return out


def apply_family_max(f: GridFunction, directions, k_set: Sequence[int], P: PolynomialSpec | None = None,
                     bump: str = "exp", route: str = "spectral") -> GridFunction:
    """Pointwise sup over (v, k) of |A_{v,k} f|."""
    if not k_set:
        raise ValueError("k_set must be nonempty")
    dirs = _dedupe(lattice_directions(directions, f.Q))
    out = np.zeros(f.values.shape)
    fhat = np.fft.fft2(f.values) if route == "spectral" else None
    for v in dirs:
        for k in sorted(set(k_set)):
            if route == "spectral":
                vals = np.fft.ifft2(directional_multiplier(f.Q, v, k, P, bump) * fhat)
            else:
                vals = apply_directional_avg(f, v, k, P, bump).values
            np.maximum(out, np.abs(vals), out=out)
    return GridFunction(out)


# ------------------------------------------------------------ singular operator


def singular_truncation_limit(Q: int, directions, P: PolynomialSpec | None = None) -> int:
    """Largest m_max whose kernel support never wraps around the torus."""
    P = P or LINEAR
    vmax = max(max(abs(a), abs(b)) for a, b in directions) or 1
    m = 1
    while max(abs(P(m + 1)), m + 1) * vmax < Q / 2 and max(abs(P(-(m + 1))), m + 1) * vmax < Q / 2:
        m += 1
    return m


def discarded_tail(m_max: int, limit: int) -> float:
    """l1 mass of the kernel between the truncation and the wrap limit."""
    return 2.0 * math.fsum(1.0 / m for m in range(m_max + 1, limit + 1))


def apply_directional_singular(f: GridFunction, assignment, directions, P: PolynomialSpec | None = None,
                               m_range=(1, 8)) -> GridFunction:
    """(x, y) -> sum_{m_min <= |m| <= m_max} f(x - v1 m, y - v2 P(m)) / m with v = v(x, y)."""
    m_min, m_max = int(m_range[0]), int(m_range[1])
    if not 1 <= m_min <= m_max:
        raise ValueError("need 1 <= m_min <= m_max")
    P = P or LINEAR
    Q = f.Q
    dirs = [tuple(int(c) for c in v) for v in directions]
    assign = np.broadcast_to(np.asarray(assignment, dtype=np.int64), (Q, Q))
    out = np.zeros_like(f.values)
    for idx in np.unique(assign):
        v1, v2 = dirs[int(idx)]
        acc = np.zeros_like(f.values)
        for m in range(m_min, m_max + 1):
            for mm in (m, -m):
                shift = ((v1 * mm) % Q, (v2 * P(mm)) % Q)
                acc += np.roll(f.values, shift, axis=(0, 1)) / mm
        mask = assign == idx
        out[mask] = acc[mask]
    return GridFunction(out)


# ------------------------------------------------------------- norm estimation


class MultiplierOperator:
    """Linear operator with a known multiplier on the frequency grid."""

    def __init__(self, multiplier: np.ndarray):
        self.multiplier = np.asarray(multiplier, dtype=complex)
        self.Q = self.multiplier.shape[0]

    def __call__(self, f: GridFunction) -> GridFunction:
        return multiplier_transform(f, self.multiplier)

    def adjoint_normal(self, f: GridFunction) -> GridFunction:
        return multiplier_transform(f, np.abs(self.multiplier) ** 2)

    def peak_frequencies(self, count: int = 4):
        flat = np.argsort(-np.abs(self.multiplier).ravel(), kind="stable")[:count]
        return [tuple(int(c) for c in np.unravel_index(i, self.multiplier.shape)) for i in flat]

    def sup_multiplier(self) -> float:
        return float(np.abs(self.multiplier).max())


class MaximalOperator:
    """f -> sup_j |T_j f| for multiplier operators T_j (directions x scales, or any list)."""

    def __init__(self, multipliers: Sequence[np.ndarray]):
        self.multipliers = [np.asarray(m, dtype=complex) for m in multipliers]
        if not self.multipliers:
            raise ValueError("need at least one multiplier")
        self.Q = self.multipliers[0].shape[0]

    @classmethod
    def directional(cls, Q: int, directions, k_set: Sequence[int], P: PolynomialSpec | None = None,
                    bump: str = "exp") -> "MaximalOperator":
        dirs = _dedupe(lattice_directions(directions, Q))
        return cls([directional_multiplier(Q, v, k, P, bump) for v in dirs for k in sorted(set(k_set))])

    def components(self, f: GridFunction) -> np.ndarray:
        fhat = np.fft.fft2(f.values)
        return np.stack([np.fft.ifft2(m * fhat) for m in self.multipliers])

    def __call__(self, f: GridFunction) -> GridFunction:
        return GridFunction(np.abs(self.components(f)).max(axis=0))

    def power_step(self, f: GridFunction) -> GridFunction:
        """T*T f for the linearisation T that picks the maximising component pointwise."""
        comps = self.components(f)
        sel = np.abs(comps).argmax(axis=0)
        acc = np.zeros((self.Q, self.Q), dtype=complex)
        for j, m in enumerate(self.multipliers):
            g = np.where(sel == j, comps[j], 0)
            acc += np.conj(m) * np.fft.fft2(g)
        return GridFunction(np.fft.ifft2(acc))

    def peak_frequencies(self, count: int = 4):
        energy = sum(np.abs(m) ** 2 for m in self.multipliers)
        flat = np.argsort(-energy.ravel(), kind="stable")[:count]
        return [tuple(int(c) for c in np.unravel_index(i, energy.shape)) for i in flat]


@dataclass
class NormEstimate:
    lower_bound: float
    witness: GridFunction
    strategy: str
    history: list = field(default_factory=list)


def _ratio(op, f: GridFunction) -> float:
    nf = f.norm()
    return op(f).norm() / nf if nf else 0.0


def estimate_opnorm(op: Callable, Q: int, trials: int = 4, seed: int = 0, strategy: str = "gaussian",
                    frequencies: Iterable | None = None, iterations: int = 15) -> NormEstimate:
    """Certified lower bound for ||op||_{l2 -> l2} from explicit witnesses.

    strategy: ``gaussian`` (random complex fields), ``frequency`` (plane waves at
    ``frequencies`` or the operator's peak frequencies), ``reweight`` (power
    iteration on the pointwise linearisation, started from a point mass and
    random fields), or ``all``.
    """
    rng = np.random.default_rng(seed)
    candidates: list[tuple[str, GridFunction]] = []
    history: list[float] = []

    def gaussian(i):
        return GridFunction.random(Q, seed=int(rng.integers(2 ** 63)))

    if strategy in ("gaussian", "all"):
        candidates += [("gaussian", gaussian(i)) for i in range(trials)]
    if strategy in ("frequency", "all"):
        freqs = list(frequencies) if frequencies is not None else (
            op.peak_frequencies(trials) if hasattr(op, "peak_frequencies") else [(0, 0)])
        candidates += [("frequency", GridFunction.plane_wave(Q, xi)) for xi in freqs]
    if strategy in ("reweight", "all"):
        starts = [GridFunction.point_mass(Q)] + [gaussian(i) for i in range(max(trials - 1, 0))]
        for f0 in starts:
            f = f0
            best_f, best = f, _ratio(op, f)
            step = getattr(op, "power_step", None) or getattr(op, "adjoint_normal", None)
            for _ in range(iterations if step else 0):
                g = step(f)
                ng = g.norm()
                if ng == 0:
                    break
                f = GridFunction(g.values / ng)
                r = _ratio(op, f)
                history.append(r)
                if r > best:
                    best_f, best = f, r
            candidates.append(("reweight", best_f))
    if not candidates:
        raise ValueError(f"unknown strategy {strategy!r}")

    best_name, best_f, best = None, None, -1.0
    for name, f in candidates:
        r = _ratio(op, f)
        history.append(r)
        if r > best:
            best_name, best_f, best = name, f, r
    certified = _ratio(op, best_f)
    return NormEstimate(certified, best_f, best_name, history)


def multiscale_domination_ratio(f: GridFunction, directions, k_set: Sequence[int],
                                P: PolynomialSpec | None = None, bump: str = "exp") -> float:
    """||sup_{v,k} |A_{v,k} f| ||_2 / ||(sum_v |A_{v,k_min} f|^2)^(1/2)||_2 for the enlarged bump.

    The enlarged bump is the cosine-squared profile at scale k_min, which
    dominates a constant multiple of every coarser exponential bump.
    """
    top = apply_family_max(f, directions, k_set, P, bump).norm()
    dirs = _dedupe(lattice_directions(directions, f.Q))
    kmin = min(k_set)
    sq = sum(np.abs(apply_directional_avg(f, v, kmin, P, "cos2").values) ** 2 for v in dirs)
    return top / math.sqrt(math.fsum(sq.ravel()))
