"""Bump functions phi, their integer samples phi_k, and the plateau cutoff chi."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

KINDS = ("exp", "cos2")


def _raw(kind: str, t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1
    if kind == "exp":
        out[inside] = np.exp(1.0 / (t[inside] ** 2 - 1.0))
    elif kind == "cos2":
        out[inside] = np.cos(0.5 * math.pi * t[inside]) ** 2
    else:
        raise ValueError(f"unknown bump kind {kind!r}; expected one of {KINDS}")
    return out


@lru_cache(maxsize=None)
def normalizer(kind: str) -> float:
    """1 / integral of the raw profile, by adaptive quadrature."""
    val, _ = quad(lambda t: float(_raw(kind, t)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 1.0 / val


def phi(t, kind: str = "exp"):
    """Even, nonnegative, smooth, supported in [-1, 1], unit integral."""
    return normalizer(kind) * _raw(kind, t)


@dataclass(frozen=True)
class BumpSlice:
    """Samples phi_k(n) = 2^-k phi(2^-k n) for |n| <= 2^k."""

    kind: str
    k: int
    n: np.ndarray
    weights: np.ndarray

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    def nonzero(self):
        keep = self.weights != 0
        return self.n[keep], self.weights[keep]


@lru_cache(maxsize=64)
def sample_bump(kind: str = "exp", k: int = 0) -> BumpSlice:
    if k < 0:
        raise ValueError("k must be >= 0")
    half = 2 ** k
    n = np.arange(-half, half + 1, dtype=np.int64)
    w = 2.0 ** (-k) * phi(n * 2.0 ** (-k), kind)
    w = 0.5 * (w + w[::-1])  # exact evenness
    n.setflags(write=False)
    w.setflags(write=False)
    return BumpSlice(kind, k, n, w)


def _smoothstep(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.asarray(x, dtype=float)
    a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def chi(x, c: float = 1.0):
    """Smooth even plateau: 1 on |x| <= c, 0 on |x| >= 2c."""
    ax = np.abs(np.asarray(x, dtype=float))
    return 1.0 - _smoothstep(ax / c - 1.0)
