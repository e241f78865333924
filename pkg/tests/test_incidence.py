import random
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dirmax.errors import BudgetExceeded, DegeneratePair
from dirmax.family import FamilyParams, build_family, planted_prime_sets
from dirmax.incidence import (
    Box, Comb, _count_exact, block_combs, check_pair_pigeonhole, comb_distance, default_C1, incidence_count,
    max_prime_matching, pair_intersection_lattice, reduced_block_indicator_sum, reduced_comb_mask,
    reduced_comb_member, validate_pairing,
)
from dirmax.number_theory import select_primes
from oracles import brute_comb_distance

SMALL_DIRS = [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)]


def comb(v, r, s, tau=F(1, 1024), rho0=F(1, 1000)):
    return Comb(v, r, s, tau, rho0)


def test_comb_distance_examples():
    c = comb((F(3, 2), F(1, 3)), 3, 2)
    beta = (F(2, 9), F(0))  # v.beta = 1/3
    assert comb_distance(c, beta) == (0, True)
    assert comb_distance(c, (F(0), F(0)))[1] is False


@given(vx=st.fractions(-3, 3, max_denominator=7), vy=st.fractions(-3, 3, max_denominator=7),
       bx=st.fractions(-2, 2, max_denominator=50), by=st.fractions(-2, 2, max_denominator=50),
       r=st.integers(4, 7))
def test_comb_distance_matches_enumeration(vx, vy, bx, by, r):
    if vx == 0 and vy == 0:
        return
    c = comb((vx, vy), r, 3)
    d, member = comb_distance(c, (bx, by))
    assert d == brute_comb_distance((vx, vy), (bx, by), r, bound=20)
    assert member == (d <= c.tau and bx * bx + by * by >= c.rho0 ** 2)


def test_comb_validation():
    with pytest.raises(ValueError):
        comb((1, 0), 4, 2)
    with pytest.raises(ValueError):
        Comb((1, 0), 2, 2, F(0), F(1))


def test_lattice_axis_case():
    lat = pair_intersection_lattice(comb((1, 0), 1, 1), comb((0, 1), 1, 1))
    assert {lat.g1, lat.g2} == {(1, 0), (0, 1)}


def test_lattice_points_on_both_combs():
    c1 = comb((F(7, 5), F(2, 3)), 5, 3)
    c2 = comb((F(-1, 2), F(9, 4)), 6, 3)
    lat = pair_intersection_lattice(c1, c2)
    for a in range(-4, 5):
        for b in range(-4, 5):
            p = lat.point(a, b)
            if p == (0, 0):
                continue
            assert comb_distance(c1, p) == (0, True)
            assert comb_distance(c2, p) == (0, True)


def test_lattice_degenerate():
    with pytest.raises(DegeneratePair):
        pair_intersection_lattice(comb((1, 2), 2, 2), comb((2, 4), 3, 2))


def test_single_direction_full_block():
    s = 3
    cs = block_combs([(F(3, 4), F(1, 4))], s, tau=F(1, 4096), rho0=F(1, 100))
    beta = (F(4, 3), F(0))  # v.beta = 1
    assert _count_exact(cs, beta) == 2 ** (s - 1)
    rep = incidence_count(cs, Box(1, F(3, 2), 0, F(1, 8)), "candidate")
    assert rep.value == 2 ** (s - 1)


def test_orthogonal_pair_grid_equals_candidate():
    cs = block_combs([(1, 0), (0, 1)], 2, tau=F(1, 1024), rho0=F(1, 1000))
    box = Box(F(1, 8), F(1, 4), F(1, 16), F(3, 16))
    g = incidence_count(cs, box, "grid")
    c = incidence_count(cs, box, "candidate")
    assert g.value == c.value
    assert _count_exact(cs, g.argmax) == g.value and _count_exact(cs, c.argmax) == c.value


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_grid_candidate_equivalence(seed):
    rng = random.Random(seed)
    dirs = rng.sample(SMALL_DIRS, rng.randint(1, 8))
    cs = block_combs(dirs, rng.randint(1, 3), tau=F(1, 2 ** rng.randint(10, 11)), rho0=F(1, 1000))
    x0, y0 = F(rng.randint(-16, 15), 16), F(rng.randint(-16, 15), 16)
    box = Box(x0, x0 + F(1, 32), y0, y0 + F(1, 32))
    g = incidence_count(cs, box, "grid")
    c = incidence_count(cs, box, "candidate")
    assert g.value == c.value
    assert _count_exact(cs, g.argmax) == g.value == _count_exact(cs, c.argmax)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_tau_monotone(seed):
    rng = random.Random(seed)
    dirs = rng.sample(SMALL_DIRS, 4)
    box = Box(F(1, 8), F(1, 4), F(1, 8), F(1, 4))
    vals = [incidence_count(block_combs(dirs, 2, tau=F(1, 2 ** e), rho0=F(1, 100)), box).value for e in (12, 10, 8)]
    assert vals == sorted(vals)


def test_constructed_below_parallel_baseline():
    fam = build_family(FamilyParams(N=8, pool_size=6, seed=4))
    tau, rho0 = F(1, 2 ** 180), F(1, fam.A)
    box = Box(F(-1, 2), F(1, 2), F(-1, 2), F(1, 2))
    vecs = fam.unit_vectors()
    ours = incidence_count(block_combs(vecs, 2, tau, rho0, "dilated"), box).value
    base = incidence_count(block_combs([vecs[0]] * 8, 2, tau, rho0, "dilated"), box).value
    assert ours <= base and base == 8 * 2


def test_workers_do_not_change_result():
    cs = block_combs(SMALL_DIRS[:6], 3, tau=F(1, 1024), rho0=F(1, 1000))
    box = Box(F(1, 4), F(1, 2), F(1, 4), F(1, 2))
    a = incidence_count(cs, box, workers=1)
    b = incidence_count(cs, box, workers=2)
    assert (a.value, a.argmax) == (b.value, b.argmax)


def test_budget():
    cs = block_combs(SMALL_DIRS, 3, tau=F(1, 4096), rho0=F(1, 1000))
    with pytest.raises(BudgetExceeded):
        incidence_count(cs, Box(0, 1, 0, 1), "candidate", budget=100)
    with pytest.raises(BudgetExceeded):
        incidence_count(cs, Box(0, 1, 0, 1), "grid", budget=100)


def test_default_C1():
    for s in range(1, 8):
        C1 = default_C1(s)
        assert F(1, 2 ** (C1 * s)) <= F(1, 8 * 4 ** s) < F(1, 2 ** ((C1 - 1) * s))


def test_comb_json_round_trip():
    c = Comb((F(2, 3), F(-5, 7)), 3, 2, F(1, 2 ** 40), F(1, 10 ** 20), "dilated")
    assert Comb.from_json(c.to_json()) == c


# ------------------------------------------------------------------ pigeonhole


def test_pigeonhole_singleton():
    rep = check_pair_pigeonhole([(2, 3), (5, 7)], [0], 1)
    assert rep.count == 0 and not rep.met


def test_pigeonhole_one_common_prime():
    sets = [(3, 11), (3, 13), (3, 17), (3, 19)]
    rep = check_pair_pigeonhole(sets, range(4), 1)
    assert rep.count == 1 and validate_pairing(rep, sets, range(4)) == []


def test_pigeonhole_planted():
    primes = select_primes(24, 1, (24, 240), 20)
    sets, planted = planted_prime_sets(primes, 4, 24)
    fam = build_family(FamilyParams(N=24, prime_sets=sets, seed=0))
    rep = check_pair_pigeonhole(fam, range(24), 4)
    assert rep.count >= 4 and validate_pairing(rep, fam, range(24)) == []
    assert max_prime_matching(sets, list(range(10))) >= 4


@settings(max_examples=40)
@given(st.lists(st.sets(st.sampled_from([2, 3, 5, 7, 11, 13]), min_size=2, max_size=2), min_size=1, max_size=8))
def test_pigeonhole_valid_and_maximal(raw):
    sets = [tuple(sorted(s)) for s in raw]
    idx = list(range(len(sets)))
    rep = check_pair_pigeonhole(sets, idx, 0)
    assert validate_pairing(rep, sets, idx) == []
    opt = max_prime_matching(sets, idx)
    assert 2 * rep.count >= opt >= rep.count


def test_validate_pairing_catches_errors():
    from dirmax.incidence import PairingReport

    sets = [(3, 5), (3, 7), (5, 7)]
    bad = PairingReport([((0, 1), 3), ((1, 2), 7)], 2, 2)
    problems = validate_pairing(bad, sets, [0, 1, 2])
    assert any("overlaps" in p for p in problems)
    bad = PairingReport([((0, 2), 3)], 1, 1)
    assert any("not shared" in p for p in validate_pairing(bad, sets, [0, 1, 2]))


# --------------------------------------------------------------- reduced combs


def test_reduced_comb_member():
    assert reduced_comb_member((1, 0), (F(1, 3), 0), 3, F(1, 100))
    assert not reduced_comb_member((1, 0), (F(0), 0), 3, F(1, 100))  # 0/3 is not reduced
    assert reduced_comb_member((1, 0), (F(0), 0), 1, F(1, 100))


def test_reduced_block_sum_at_most_one():
    rng = random.Random(0)
    s = 4
    tau = F(1, 2 ** (3 * s))
    for _ in range(300):
        v = (rng.randint(-10 ** 6, 10 ** 6), rng.randint(-10 ** 6, 10 ** 6))
        beta = (F(rng.randint(0, 2 ** 20), 2 ** 20), F(rng.randint(0, 2 ** 20), 2 ** 20))
        assert reduced_block_indicator_sum(v, beta, s, tau) <= 1


def test_reduced_mask_matches_member():
    Q, v, q, tau = 40, (3, 7), 5, F(1, 80)
    mask = reduced_comb_mask(Q, v, q, tau)
    for x in range(Q):
        for y in range(Q):
            assert mask[x, y] == reduced_comb_member(v, (F(x, Q), F(y, Q)), q, tau)
