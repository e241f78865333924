import dataclasses
import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from dirmax.errors import InsufficientPool, ScaleWindowEmpty
from dirmax.family import (
    DirectionFamily, DirectionVector, FamilyParams, angular_separation, build_family, compute_kappa,
    compute_rescaling, validate_family,
)


def test_kappa_examples():
    assert compute_kappa(10, 100) == 3
    assert compute_kappa(5, 5) == 1
    with pytest.raises(InsufficientPool):
        compute_kappa(4, 16)


@given(pool=st.integers(1, 30), N=st.integers(1, 5000))
def test_kappa_minimal(pool, N):
    try:
        k = compute_kappa(pool, N)
    except InsufficientPool:
        assert max(math.comb(pool, j) for j in range(pool + 1)) < N
        return
    assert math.comb(pool, k) >= N and all(math.comb(pool, j) < N for j in range(1, k))


def test_rescaling_examples():
    assert compute_rescaling([0], 100, 8) == (8, 1)
    with pytest.raises(ScaleWindowEmpty):
        compute_rescaling([0], 3, 8 * 200)
    L0, L1 = compute_rescaling([-3, -3, -5, 2], 10 ** 6, 7)
    assert L1 == 2 ** 8 and L0 % (7 * L1) == 0
    assert Fraction(10 ** 6, 50) <= L0 <= 50 * 10 ** 6


def test_toy_family_valid():
    fam = build_family(FamilyParams(N=6, pool_size=5, seed=42))
    assert len(fam) == 6 and fam.kappa_primes == 2
    assert validate_family(fam) == []


def test_single_vector_family():
    fam = build_family(FamilyParams(N=1, seed=3))
    assert len(fam) == 1 and validate_family(fam) == []


def test_error_propagates():
    with pytest.raises(InsufficientPool):
        build_family(FamilyParams(N=16, pool_size=4))


@settings(max_examples=15, deadline=None)
@given(N=st.integers(6, 24), seed=st.integers(0, 2 ** 32))
def test_built_families_valid_and_integral(N, seed):
    fam = build_family(FamilyParams(N=N, pool_size=8, seed=seed))
    assert validate_family(fam) == []
    for dv in fam.vectors:
        x, y = dv.v[0] * fam.L0, dv.v[1] * fam.L0
        assert x.denominator == 1 and y.denominator == 1
        assert (int(x), int(y)) == dv.rescaled
    assert angular_separation(fam) > 0


def test_determinism():
    p = FamilyParams(N=12, pool_size=8, seed=99)
    assert build_family(p).dumps() == build_family(dataclasses.replace(p)).dumps()


def test_json_round_trip():
    fam = build_family(FamilyParams(N=9, pool_size=7, seed=5, A=10 ** 40))
    again = DirectionFamily.loads(fam.dumps())
    assert again == fam and again.dumps() == fam.dumps()


def test_explicit_A_band():
    fam = build_family(FamilyParams(N=4, pool_size=4, seed=1, A=10 ** 60))
    assert validate_family(fam) == []
    assert Fraction(10 ** 60, 50) <= fam.L0 <= 50 * 10 ** 60


def _replace_vector(fam, i, **kw):
    vecs = list(fam.vectors)
    vecs[i] = dataclasses.replace(vecs[i], **kw)
    return dataclasses.replace(fam, vectors=vecs)


def test_duplicate_prime_sets_flagged():
    fam = build_family(FamilyParams(N=4, pool_size=5, seed=0))
    dv0 = fam.vectors[0]
    bad = _replace_vector(fam, 1, prime_set=dv0.prime_set)
    bullets = {v.bullet for v in validate_family(bad)}
    assert "distinct prime sets" in bullets


def test_parallel_pair_flagged():
    fam = build_family(FamilyParams(N=2, pool_size=4, seed=0))
    a, b = fam.vectors
    fam2 = dataclasses.replace(fam, vectors=[dataclasses.replace(a, m=4, n=1), dataclasses.replace(b, m=8, n=2)])
    viol = validate_family(fam2)
    assert any(v.bullet == "pairwise non-parallel" and v.indices == (0, 1) for v in viol)


def test_broken_integrality_flagged():
    fam = build_family(FamilyParams(N=3, pool_size=4, seed=2))
    bad = _replace_vector(fam, 0, rescaled=(fam.vectors[0].rescaled[0] + 1, fam.vectors[0].rescaled[1]))
    assert {v.bullet for v in validate_family(bad)} == {"rescaled integrality"}
