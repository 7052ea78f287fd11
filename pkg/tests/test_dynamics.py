import math
import random
from fractions import Fraction

import numpy as np
import pytest

from oracles import brute_min_norm, circle_norm
from recurlab.corners import L_table
from recurlab.dynamics import (
    CommutingPair,
    CyclicShift,
    InsufficientDepth,
    MissingCertificate,
    NotCommuting,
    PrecisionError,
    ProductMap,
    RealParam,
    cat_map,
    cf_of_fraction,
    commute,
    convergents,
    doubling,
    identity,
    iterate,
    map_from_json,
    pair_weighted_profile,
    parse_map,
    parse_real,
    quadratic_cf,
    recurrence_constant,
    recurrence_profile,
    rotation,
    rotation_oracle,
    simultaneous_recurrence,
    weighted_liminf_profile,
)
from recurlab.spaces import PowerFunction, SpaceSpec, distance

F = Fraction


def test_iterate_examples():
    assert iterate(rotation(F(1, 4)), 0, 4) == (0,)
    assert iterate(CyclicShift(10, 3), 9, 1) == (2,)
    # cat map by hand: (x, y) -> (2x + y, x + y) mod 1
    x = (F(1, 2), F(1, 2))
    for _ in range(2):
        x = ((2 * x[0] + x[1]) % 1, (x[0] + x[1]) % 1)
    assert iterate(cat_map(), (F(1, 2), F(1, 2)), 2) == x
    assert iterate(cat_map(), (F(1, 3), F(1, 5)), 0) == (F(1, 3), F(1, 5))


def test_iterate_precision_budget():
    coarse = rotation(RealParam.from_cf([0, 1, 1, 1, 1], terminal=False))
    assert coarse.step_error() > 0
    with pytest.raises(PrecisionError):
        iterate(coarse, 0, 10)
    with pytest.raises(ValueError):
        iterate(rotation(F(1, 3)), 0, -1)


def test_recurrence_constant_examples():
    assert recurrence_constant(identity(SpaceSpec.torus(1)), F(1, 7), 50) == 0
    half = rotation(F(1, 2))
    assert recurrence_constant(half, 0, 1) == 1
    assert recurrence_constant(half, 0, 2) == 0
    golden = rotation(RealParam.golden())
    value = recurrence_constant(golden, 0, 10)
    assert value == 2 * circle_norm(8 * RealParam.golden().approx)
    assert abs(float(value) - 2 * abs(8 * (math.sqrt(5) - 1) / 2 - 5)) < 1e-12


def test_rotation_recurrence_independent_of_start():
    rng = random.Random(0)
    alpha = F(17, 101)
    m = rotation(alpha)
    base = recurrence_profile(m, 0, 60).running_min
    for _ in range(20):
        x = F(rng.randrange(1000), 1000)
        assert recurrence_profile(m, x, 60).running_min == base


def test_running_min_nonincreasing():
    prof = recurrence_profile(doubling(), F(1, 7), 12)
    assert all(b <= a for a, b in zip(prof.running_min, prof.running_min[1:]))
    assert prof.value == min(prof.distances)


def test_simultaneous_recurrence_examples():
    ident = identity(SpaceSpec.torus(1))
    assert simultaneous_recurrence(CommutingPair(ident, ident), F(1, 3), 5) == 0
    pair = CommutingPair(rotation(F(1, 3)), rotation(F(2, 3)))
    assert simultaneous_recurrence(pair, 0, 3) == 0
    pair = CommutingPair(rotation(F(1, 4)), rotation(F(1, 6)))
    assert simultaneous_recurrence(pair, 0, 12) == 0
    brute = min(max(2 * circle_norm(n * F(1, 4)), 2 * circle_norm(n * F(1, 6))) for n in range(1, 12))
    assert simultaneous_recurrence(pair, 0, 11) == brute


def test_simultaneous_dominates_each_constant():
    rng = random.Random(1)
    for _ in range(50):
        a, b = F(rng.randrange(1, 97), 97), F(rng.randrange(1, 89), 89)
        pair = CommutingPair(rotation(a), rotation(b))
        N = rng.randint(1, 40)
        x = F(rng.randrange(100), 100)
        s = simultaneous_recurrence(pair, x, N)
        assert s >= recurrence_constant(pair.S, x, N) and s >= recurrence_constant(pair.R, x, N)


def test_weighted_profile():
    ident = identity(SpaceSpec.torus(1))
    rows = weighted_liminf_profile(ident, 0, PowerFunction(1), [10, 20], [1, 5])
    assert {(r.K, r.N) for r in rows} == {(1, 10), (5, 10), (1, 20), (5, 20)}
    assert all(r.value == 0 for r in rows)
    rows = weighted_liminf_profile(rotation(F(3, 11) + F(1, 1000)), 0, PowerFunction(1), [50, 100], [1, 10, 40])
    by = {(r.K, r.N): r.value for r in rows}
    # larger K: fewer terms; larger N: more terms
    assert by[(1, 50)] <= by[(10, 50)] <= by[(40, 50)]
    assert by[(10, 100)] <= by[(10, 50)]


def test_pair_profile():
    ident = identity(SpaceSpec.torus(1))
    L = L_table(8)
    rows = pair_weighted_profile(CommutingPair(ident, ident), 0, PowerFunction(1), 8, [1, 4], L)
    assert all(r.value_lowerL == 0 == r.value_upperL for r in rows)
    pair = CommutingPair(rotation(RealParam.golden()), rotation(RealParam.sqrt2_minus_1()))
    rows = pair_weighted_profile(pair, 0, PowerFunction(1), 8, [1, 2, 4], L)
    assert all(r.value_lowerL >= r.value_upperL for r in rows)
    with pytest.raises(MissingCertificate):
        pair_weighted_profile(pair, 0, PowerFunction(1), 9, [1], L)


def test_rotation_oracle_examples():
    res = rotation_oracle(F(1, 3), 5)
    assert res.min_norm == 0 and res.argmin == 3
    gold = rotation_oracle(RealParam.golden(), 10**4)
    fib = [1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377, 610, 987, 1597, 2584, 4181, 6765]
    assert list(gold.denominators) == fib
    approx = RealParam.golden().approx
    assert gold.min_norm == brute_min_norm(approx, 10**4)
    with pytest.raises(InsufficientDepth):
        rotation_oracle(RealParam.golden(), 10**9, depth=5)


def test_rotation_oracle_matches_scan():
    rng = random.Random(2)
    for _ in range(100):
        q = rng.randint(2, 5000)
        alpha = F(rng.randint(1, q - 1), q)
        N = rng.randint(1, 1000)
        assert rotation_oracle(alpha, N).min_norm == brute_min_norm(alpha, N)


def test_continued_fractions():
    assert cf_of_fraction(F(415, 93)) == [4, 2, 6, 7]
    assert quadratic_cf(-1, 5, 2, 6) == [0, 1, 1, 1, 1, 1]
    assert quadratic_cf(-1, 2, 1, 5) == [0, 2, 2, 2, 2]
    assert list(convergents([0, 1, 1, 1]))[-1] == (2, 3)
    for x in (F(7, 3), F(1, 99), F(355, 113)):
        p, q = list(convergents(cf_of_fraction(x)))[-1]
        assert F(p, q) == x


def test_parse_real_and_json_round_trip():
    assert parse_real("1/3").approx == F(1, 3)
    assert abs(float(parse_real("sqrt:3")) - (math.sqrt(3) - 1)) < 1e-15
    assert abs(float(parse_real("golden")) - (math.sqrt(5) - 1) / 2) < 1e-15
    assert parse_real("cf:0,2,3").approx == F(3, 7)
    for text in ("rotation:golden", "rotation:sqrt2-1", "rotation:sqrt:7", "rotation:2/5", "cat", "doubling",
                 "shift:12:5", "product:shift:3:1|shift:4:3"):
        m = parse_map(text)
        assert map_from_json(m.to_json()) == m
    with pytest.raises(ValueError):
        parse_map("tent")


def test_commuting_pairs():
    assert commute(CyclicShift(12, 1), CyclicShift(12, 5))
    assert commute(rotation(RealParam.golden()), rotation(F(1, 3)))
    with pytest.raises(NotCommuting):
        CommutingPair(CyclicShift(12, 1), CyclicShift(10, 1))
    assert not commute(cat_map(), rotation([F(1, 3), F(1, 5)]))
    with pytest.raises(NotCommuting):
        CommutingPair(cat_map(), rotation([F(1, 3), F(1, 5)]))
    assert commute(cat_map(), cat_map())


def test_measure_preservation():
    for m in (CyclicShift(9, 4), ProductMap((CyclicShift(3, 1), CyclicShift(4, 3)))):
        pts = m.space.points()
        assert sorted(m.apply(p) for p in pts) == sorted(pts)
        inv = m.inverse()
        assert all(inv.apply(m.apply(p)) == p for p in pts)
    rng = np.random.default_rng(3)
    for m in (doubling(), cat_map(), rotation(RealParam.golden())):
        d = m.space.dim
        xs = rng.random((200_000, d))
        lo, hi = 0.2, 0.55
        preimage = np.all((m.apply_array(xs) >= lo) & (m.apply_array(xs) < hi), axis=1).mean()
        assert abs(preimage - (hi - lo) ** d) < 0.01


def test_inverse_maps():
    c = cat_map()
    x = (F(2, 7), F(3, 11))
    assert c.inverse().apply(c.apply(x)) == x
    r = rotation(F(2, 9))
    assert r.inverse().apply(r.apply((F(1, 5),))) == (F(1, 5),)
    assert distance(SpaceSpec.torus(1), r.apply((F(0),))[0], F(2, 9)) == 0
