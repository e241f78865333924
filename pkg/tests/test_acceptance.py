"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the terminal summary (see conftest.py) and also when
this file is run directly with ``python3 tests/test_acceptance.py``.
"""
import json
import math
import random
import time
from fractions import Fraction as F
from math import gcd

import numpy as np

from dirmax.circle_method import EPS0, EPS1, approx_error_scan
from dirmax.family import FamilyParams, build_family, planted_prime_sets, validate_family
from dirmax.harness import run_experiment
from dirmax.incidence import (
    Box, _count_exact, block_combs, check_pair_pigeonhole, incidence_count, reduced_block_indicator_sum,
    validate_pairing,
)
from dirmax.number_theory import gauss_sum, select_primes
from dirmax.operators import (
    GridFunction, MaximalOperator, apply_directional_avg, directional_multiplier, estimate_opnorm,
    multiplier_transform,
)

RESULTS: dict = {}


def record(n: int, ok: bool, detail: str, t0: float, limit: float | None):
    took = time.time() - t0
    within = limit is None or took <= limit
    RESULTS[n] = f"criterion {n:2d}: {'PASS' if ok and within else 'FAIL'}  {detail}  ({took:.1f}s" + (
        f" / {limit:.0f}s)" if limit else ")")
    assert ok, RESULTS[n]
    assert within, RESULTS[n]


def test_criterion_01_gauss_sum_law():
    t0 = time.time()
    worst_odd = worst_2mod4 = worst_ratio = 0.0
    for q in range(1, 1000):
        for a in range(q):
            if gcd(a, q) != 1:
                continue
            m = abs(gauss_sum(a, q))
            if q % 2:
                worst_odd = max(worst_odd, abs(m - q ** -0.5))
            elif q % 4 == 2:
                worst_2mod4 = max(worst_2mod4, m)
            worst_ratio = max(worst_ratio, m * math.sqrt(q))
    ok = worst_odd <= 1e-10 and worst_2mod4 <= 1e-12 and worst_ratio <= math.sqrt(2) * (1 + 1e-12)
    record(1, ok, f"odd dev {worst_odd:.1e}, q=2 mod 4 max {worst_2mod4:.1e}, max sqrt(q)|S| {worst_ratio:.6f}",
           t0, 60)


def test_criterion_02_multiplier_identity():
    t0 = time.time()
    Q = 256
    fam = build_family(FamilyParams(N=8, pool_size=6, seed=0))
    dirs = fam.lattice_vectors()
    assert len(dirs) == 8
    worst = 0.0
    for seed in range(20):
        f = GridFunction.random(Q, seed)
        for k in (4, 6, 8):
            for v in dirs:
                a = apply_directional_avg(f, v, k).values
                b = multiplier_transform(f, directional_multiplier(Q, v, k)).values
                worst = max(worst, np.linalg.norm(a - b) / np.linalg.norm(a))
    record(2, worst <= 1e-8, f"max relative l2 error {worst:.2e}", t0, 300)


def test_criterion_03_major_arc_decay():
    t0 = time.time()
    ks = list(range(8, 17))
    rep = approx_error_scan(ks, samples=10_000, eps0=EPS0, eps1=EPS1, seed=0)
    on_ok = all(on <= 10 * rep.on_arc_bound(k) for k, on in zip(ks, rep.on_arc_max))
    ok = rep.slope <= -0.25 and on_ok
    record(3, ok, f"slope {rep.slope:.3f}, on-arc max/bound {max(o / rep.on_arc_bound(k) for k, o in zip(ks, rep.on_arc_max)):.2e}",
           t0, 1800)


SMALL_DIRS = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2), (3, 1), (1, 3)]


def test_criterion_04_incidence_oracle():
    t0 = time.time()
    bad = 0
    for seed in range(50):
        rng = random.Random(seed)
        dirs = rng.sample(SMALL_DIRS, rng.randint(1, 8))
        s = rng.randint(1, 3)
        tau = F(1, 2 ** rng.randint(10, 12))
        cs = block_combs(dirs, s, tau=tau, rho0=F(1, 1000))
        x0, y0 = F(rng.randint(-16, 15), 16), F(rng.randint(-16, 15), 16)
        box = Box(x0, x0 + F(1, 16), y0, y0 + F(1, 16))
        g = incidence_count(cs, box, "grid")
        c = incidence_count(cs, box, "candidate")
        consistent = _count_exact(cs, g.argmax) == g.value and _count_exact(cs, c.argmax) == c.value
        bad += not (g.value == c.value and consistent)
    record(4, bad == 0, f"{50 - bad}/50 comb sets agree", t0, 600)


def test_criterion_05_construction_validity():
    t0 = time.time()
    failures = []
    for seed in range(100):
        fam = build_family(FamilyParams(N=32, pool_size=12, seed=seed))
        v = validate_family(fam)
        if v:
            failures.append((seed, v[0].bullet))
    record(5, not failures, f"{100 - len(failures)}/100 families valid" + (f", first {failures[0]}" if failures else ""),
           t0, 120)


def test_criterion_06_pigeonhole():
    t0 = time.time()
    N, K = 24, 4
    primes = select_primes(N, 1, (N, 10 * N), 20)
    sets, planted = planted_prime_sets(primes, K, N)
    fam = build_family(FamilyParams(N=N, prime_sets=sets, seed=0))
    rng = random.Random(0)
    planted_idx = {i for p in planted for i in p}
    others = [i for i in range(N) if i not in planted_idx]
    low, problems = None, 0
    for _ in range(100):
        subset = sorted(planted_idx | set(rng.sample(others, rng.randint(0, len(others)))))
        rep = check_pair_pigeonhole(fam, subset, K)
        problems += bool(validate_pairing(rep, fam, subset))
        low = rep.count if low is None else min(low, rep.count)
    record(6, low >= K and problems == 0, f"min pairs {low} (planted {K}), invalid reports {problems}", t0, 60)


def test_criterion_07_separation():
    t0 = time.time()
    C1, s = 90, 2
    tau = F(1, 2 ** (C1 * s))
    box = Box(F(-1, 2), F(1, 2), F(-1, 2), F(1, 2))
    parts, ok = [], True
    for N in (16, 32):
        fam = build_family(FamilyParams(N=N, pool_size=12, seed=0))
        vecs = fam.unit_vectors()
        rho0 = F(1, fam.A)
        ours = incidence_count(block_combs(vecs, s, tau, rho0, "dilated"), box).value
        base = incidence_count(block_combs([vecs[0]] * N, s, tau, rho0, "dilated"), box).value
        ok &= 2 * ours <= base
        parts.append(f"N={N}: {ours} vs {base}")
    record(7, ok, ", ".join(parts), t0, 600)


def test_criterion_08_unit_scale_norm():
    t0 = time.time()
    parts, ok = [], True
    for N, Q in ((16, 64), (64, 128)):
        dirs = [(1, j) for j in range(N)]  # every direction meets the same orbit through 0
        op = MaximalOperator.directional(Q, dirs, [0])
        est = estimate_opnorm(op, Q, trials=4, seed=0, strategy="all")
        ratio = est.lower_bound / math.sqrt(N)
        ok &= 0.5 <= ratio <= 2
        parts.append(f"N={N}: bound {est.lower_bound:.3f}, sqrt(N) {math.sqrt(N):.1f}")
    record(8, ok, ", ".join(parts), t0, 600)


def test_criterion_09_reduced_comb_partition():
    t0 = time.time()
    fam = build_family(FamilyParams(N=8, pool_size=6, seed=0))
    rng = random.Random(0)
    worst = 0
    for _ in range(10_000):
        beta = (F(rng.randrange(2 ** 40), 2 ** 40), F(rng.randrange(2 ** 40), 2 ** 40))
        for v in fam.lattice_vectors():
            for s in (1, 2, 3, 4):
                worst = max(worst, reduced_block_indicator_sum(v, beta, s, F(1, 2 ** (2 * s + 2))))
    record(9, worst <= 1, f"max block sum {worst}", t0, 60)


def test_criterion_10_determinism(tmp_path):
    t0 = time.time()
    cfg = {"version": 1, "seed": 3, "experiments": [
        {"kind": "primes", "name": "primes", "params": {"N": 16, "window": [16, 160], "count": 8}},
        {"kind": "family", "name": "family", "params": {"N": 8, "pool_size": 6}},
        {"kind": "separation", "name": "sep", "params": {"N": 8, "pool_size": 6, "s": 1}},
        {"kind": "expsum", "name": "gauss", "params": {"type": "gauss", "q": [3, 5, 7]}},
        {"kind": "operator", "name": "op", "params": {"Q": 32, "directions": [[1, 0], [1, 1]], "k_set": [2, 3]}},
        {"kind": "opnorm", "name": "norm", "params": {"Q": 16, "directions": [[1, 0], [0, 1]], "trials": 2}},
        {"kind": "approx-scan", "name": "scan", "params": {"k_min": 8, "k_max": 10, "samples": 200}},
    ]}
    first = run_experiment(cfg, tmp_path / "a")
    second = run_experiment(json.loads(json.dumps(first.config)), tmp_path / "b")
    csvs = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*.csv"))
    same = all((tmp_path / "a" / p).read_bytes() == (tmp_path / "b" / p).read_bytes() for p in csvs)
    ok = first.ok and second.ok and bool(csvs) and same
    record(10, ok, f"{len(csvs)} CSVs byte-identical: {same}", t0, None)


if __name__ == "__main__":
    import sys

    import pytest

    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)
