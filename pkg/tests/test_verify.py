import math
import random
from fractions import Fraction

import numpy as np
import pytest

from oracles import brute_Y_pair, brute_Y_single
from recurlab.corners import Corner, DensityCertificate, certified_L
from recurlab.dynamics import CommutingPair, CyclicShift, MissingCertificate, RealParam, identity, rotation
from recurlab.spaces import PowerFunction, Region, SpaceSpec, box_counting_premeasure
from recurlab.verify import (
    FunctionIntegrator,
    IdentityIntegrator,
    NonReturningSet,
    Sampler,
    StepFunction,
    StepIntegrator,
    UnsupportedRepresentation,
    VerificationReport,
    blocked_sum,
    check_lemma_l_add,
    check_lemma_ll,
    check_theorem_x2,
    check_theorem_x4,
    check_union_multiplicity,
    corner_extraction_demo,
    hoeffding_halfwidth,
    index_family,
    non_returning_pair,
    non_returning_single,
    report_x1_x3_diagnostic,
    reports_to_csv,
    return_index_set,
    rhs_bound_x2,
    rhs_bound_x4,
    rotation_liminf,
    truncated_profile_integrals,
)

F = Fraction
T1 = SpaceSpec.torus(1)
Z10, Z12 = SpaceSpec.cyclic(10), SpaceSpec.cyclic(12)


# ---------------------------------------------------------------------------
# non-returning sets and the two lemmas


def test_non_returning_single_examples():
    shift = CyclicShift(10, 1)
    assert non_returning_single(Region.whole(Z10), shift, 3).points == frozenset()
    y5 = non_returning_single(Region.points(Z10, [0]), shift, 5)
    assert y5.points == {(0,)} and y5.measure == F(1, 10)
    rep = check_lemma_l_add(Region.points(Z10, [0]), shift, 5)
    assert (rep.statistic, rep.bound, rep.margin, rep.verdict) == (F(1, 10), F(1, 5), 0, "pass")
    tight = check_lemma_l_add(Region.points(Z10, [0]), shift, 9)
    assert tight.verdict == "pass" and tight.slack == F(1, 90)
    empty = check_lemma_l_add(Region.empty(Z10), shift, 4)
    assert empty.statistic == 0 and empty.verdict == "pass"
    with pytest.raises(ValueError):
        non_returning_single(Region.points(Z10, [0]), shift, 0)


def test_non_returning_single_matches_brute():
    rng = random.Random(0)
    for _ in range(200):
        M = rng.randint(1, 25)
        a, t = rng.randrange(M), rng.randint(1, 8)
        Y = {x for x in range(M) if rng.random() < 0.5}
        got = non_returning_single(Region.points(SpaceSpec.cyclic(M), Y), CyclicShift(M, a), t).points
        assert got == {(x,) for x in brute_Y_single(M, a, Y, t)}


def test_non_returning_pair_examples():
    pair = CommutingPair(CyclicShift(12, 1), CyclicShift(12, 5))
    assert non_returning_pair(Region.whole(Z12), pair, 3).points == frozenset()
    got = non_returning_pair(Region.points(Z12, [0, 3]), pair, 3).points
    assert got == {(x,) for x in brute_Y_pair(12, 1, 5, {0, 3}, 3)}


def test_pair_with_equal_maps_reduces_to_single():
    rng = random.Random(1)
    for _ in range(100):
        M = rng.randint(2, 20)
        a, t = rng.randrange(M), rng.randint(1, 6)
        Y = Region.points(SpaceSpec.cyclic(M), [x for x in range(M) if rng.random() < 0.5])
        m = CyclicShift(M, a)
        assert non_returning_pair(Y, CommutingPair(m, m), t).points == non_returning_single(Y, m, t).points


def test_lemma_ll_examples_and_errors():
    pair = CommutingPair(CyclicShift(12, 1), CyclicShift(12, 5))
    L2, L3 = certified_L(2), certified_L(3)
    rng = random.Random(2)
    for _ in range(50):
        Y = Region.points(Z12, [x for x in range(12) if rng.random() < 0.6])
        assert check_lemma_ll(Y, pair, 2, L2).statistic <= F(3, 4)
        assert check_lemma_ll(Y, pair, 3, L3).statistic <= F(7, 9)
    rep = check_lemma_ll(Region.empty(Z12), pair, 3, L3)
    assert rep.statistic == 0 and rep.certificate_provenance == "exact"
    with pytest.raises(KeyError):
        check_lemma_ll(Region.whole(Z12), pair, 3, None)
    with pytest.raises(KeyError):
        check_lemma_ll(Region.whole(Z12), pair, 3, L2)


def test_lemma_ll_exact_for_t_up_to_5():
    rng = random.Random(3)
    for t in range(1, 6):
        L = certified_L(t, "exact-required")
        for _ in range(40):
            M = rng.randint(1, 30)
            pair = CommutingPair(CyclicShift(M, rng.randrange(M)), CyclicShift(M, rng.randrange(M)))
            Y = Region.points(SpaceSpec.cyclic(M), [x for x in range(M) if rng.random() < 0.7])
            assert check_lemma_ll(Y, pair, t, L).verdict == "pass"


def test_lemma_l_add_monte_carlo_on_rotations():
    rng = random.Random(4)
    for i in range(50):
        alpha = RealParam.golden() if i % 2 else F(rng.randint(1, 999), 1000)
        Y = Region.arc(F(rng.randrange(100), 100), F(rng.randint(1, 80), 100))
        rep = check_lemma_l_add(Y, rotation(alpha), rng.randint(1, 10), Sampler(4096, seed=i))
        assert rep.seed == i and rep.samples == 4096
        assert rep.verdict == "pass"


# ---------------------------------------------------------------------------
# return index sets and corner extraction


def test_return_index_sets():
    pair = CommutingPair(CyclicShift(12, 1), CyclicShift(12, 5))
    Yt = non_returning_pair(Region.points(Z12, [0, 3]), pair, 3)
    for x in range(12):
        A = return_index_set(x, Yt, pair, 3)
        expected = {(k1, k2) for k1 in range(1, 4) for k2 in range(1, 4) if ((x + k1 + 5 * k2) % 12,) in Yt.points}
        assert set(A.indices.points()) == expected
    empty = NonReturningSet(Region.empty(Z12), 3, frozenset())
    assert all(len(return_index_set(x, empty, pair, 3)) == 0 for x in range(12))
    sampled = NonReturningSet(Region.whole(T1), 2, None, 0.1, 0.01, 100, 0)
    with pytest.raises(UnsupportedRepresentation):
        return_index_set(0, sampled, CommutingPair(rotation(F(1, 3)), rotation(F(1, 5))), 2)


def test_index_family_multiplicity_is_return_set_size():
    pair = CommutingPair(CyclicShift(12, 1), CyclicShift(12, 5))
    Yt = non_returning_pair(Region.points(Z12, [0, 3, 4, 8]), pair, 3).points
    family = index_family(Yt, pair, 3)
    for x in range(12):
        inside = sum((x,) in s for s in family.values())
        assert inside == len(return_index_set(x, Yt, pair, 3))


def test_corner_extraction_examples():
    pair = CommutingPair(CyclicShift(12, 1), CyclicShift(12, 5))
    Yt = non_returning_pair(Region.points(Z12, [0, 3]), pair, 3)
    A = return_index_set(0, Yt, pair, 3)
    assert corner_extraction_demo(0, A, pair, 3, Yt) is None
    fabricated = frozenset((x,) for x in range(12))
    full = return_index_set(0, fabricated, pair, 3)
    assert len(full) == 9
    res = corner_extraction_demo(0, full, pair, 3, fabricated)
    assert res.corner == Corner(1, 1, 1)
    assert res.u1 == ((1 + 5) % 12,) and res.u2 == ((2 + 5) % 12,) and res.u3 == ((1 + 10) % 12,)
    assert res.relations_hold and res.violates_non_return
    # S^-d u2 = R^-d u3 = u1 by hand
    k, m, d = res.corner
    assert ((res.u2[0] - d) % 12,) == res.u1 == ((res.u3[0] - 5 * d) % 12,)


# ---------------------------------------------------------------------------
# union multiplicity


def test_union_examples():
    disjoint = [Region.points(Z12, [0, 1]), Region.points(Z12, [2]), Region.points(Z12, [5, 6, 7])]
    rep = check_union_multiplicity(disjoint, 1)
    assert rep.statistic == rep.bound == F(1, 2) and rep.verdict == "pass"
    same = [Region.points(Z12, [1, 4, 9])] * 4
    rep = check_union_multiplicity(same, 4)
    assert rep.statistic == rep.bound == F(1, 4)
    bad = check_union_multiplicity(same, 2)
    assert bad.verdict == "hypothesis-fail" and bad.params["max_multiplicity"] == 4
    with pytest.raises(ValueError):
        check_union_multiplicity([{(1,)}], 1)
    with pytest.raises(ValueError):
        check_union_multiplicity(same, 0)


def test_union_on_index_family():
    pair = CommutingPair(CyclicShift(12, 1), CyclicShift(12, 5))
    for t in (2, 3, 4):
        L = certified_L(t)
        Yt = non_returning_pair(Region.points(Z12, [0, 3, 7]), pair, t).points
        family = list(index_family(Yt, pair, t).values())
        rep = check_union_multiplicity(family, math.ceil(t * t * L.upper), Z12)
        assert rep.verdict == "pass"
        # each M_{k1,k2} is a shifted copy of Y(t)
        assert all(len(s) == len(Yt) for s in family)


# ---------------------------------------------------------------------------
# right-hand sides


def _whole_circle_oracle(N: int) -> Fraction:
    """Integral over (0, 1] of min(1, ceil(1/e)/N) de: count k on [1/k, 1/(k-1))."""
    if N == 1:
        return F(1)
    total = F(1, N - 1)
    for k in range(2, N):
        total += (F(1, k - 1) - F(1, k)) * F(k, N)
    return total


def _arc_oracle(length: Fraction, N: int) -> Fraction:
    """Integral over (0, 1] of min(length, ceil(length/e)/N) de, piece by piece."""
    kmax = math.ceil(N * length) + 2
    pts = sorted({F(0), F(1)} | {length / k for k in range(1, kmax + 1) if length / k < 1})
    total = F(0)
    for a, b in zip(pts, pts[1:]):
        mid = (a + b) / 2
        count = max(1, math.ceil(length / mid))
        total += (b - a) * min(length, F(count, N))
    return total


def test_rhs_x2_examples():
    assert rhs_bound_x2(Region.empty(T1), T1, IdentityIntegrator(), 5).value == 0
    for N in (1, 2, 4, 10):
        res = rhs_bound_x2(Region.whole(T1), T1, IdentityIntegrator(), N)
        assert res.exact and res.value == _whole_circle_oracle(N)
    assert _whole_circle_oracle(4) == F(17, 24)
    for length in (F(1, 4), F(1, 3), F(3, 5)):
        for N in (1, 3, 7, 20):
            assert rhs_bound_x2(Region.arc(F(1, 10), length), T1, IdentityIntegrator(), N).value == \
                _arc_oracle(length, N)


def test_rhs_monotone_in_N():
    regions = [Region.arc(0, F(1, 3)), Region.whole(T1), Region.points(Z12, [0, 1, 5, 9]),
               Region.box(SpaceSpec.torus(2), (0, F(1, 2)), (0, F(1, 4)))]
    gs = [IdentityIntegrator(), FunctionIntegrator(PowerFunction(F(1, 2))),
          StepIntegrator(StepFunction((F(0), F(1, 3), F(2, 3)), (0, 1, 2)))]
    for A in regions:
        for g in gs:
            values = [rhs_bound_x2(A, A.space, g, N).value for N in (1, 2, 3, 5, 8, 13)]
            assert all(b <= a for a, b in zip(values, values[1:]))


def test_rhs_x4_examples():
    g = IdentityIntegrator()
    L3 = certified_L(3)
    assert rhs_bound_x4(Region.empty(T1), T1, g, 3, L3).value == 0
    arc = Region.arc(F(1, 5), F(2, 5))
    one = DensityCertificate(6, F(1, 2), F(1), "vu-bound")
    assert rhs_bound_x4(arc, T1, g, 6, one).value == rhs_bound_x2(arc, T1, g, 1).value
    # weight 7/9 on an arc, checked against the same piecewise oracle with weight 7/9
    length = F(2, 5)
    pts = sorted({F(0), F(1)} | {length / k for k in range(1, 8)})
    oracle = sum(((b - a) * min(length, max(1, math.ceil(length / ((a + b) / 2))) * F(7, 9))
                  for a, b in zip(pts, pts[1:])), F(0))
    assert rhs_bound_x4(arc, T1, g, 3, L3).value == oracle
    with pytest.raises(MissingCertificate):
        rhs_bound_x4(arc, T1, g, 4, L3)
    with pytest.raises(MissingCertificate):
        rhs_bound_x4(arc, T1, g, 4, None)


# ---------------------------------------------------------------------------
# theorem checks


def test_theorem_x2_examples():
    shift = CyclicShift(10, 3)
    rep = check_theorem_x2(Region.empty(Z10), shift, IdentityIntegrator(), 4)
    assert rep.statistic == 0 == rep.bound and rep.verdict == "pass"
    golden = rotation(RealParam.golden())
    rep = check_theorem_x2(Region.arc(0, F(1, 4)), golden, IdentityIntegrator(), 100, Sampler(20_000, seed=9))
    assert rep.verdict == "pass" and rep.seed == 9 and rep.margin > 0
    assert rep.params["method"] == "iid"


def test_theorem_x2_exact_lhs_by_hand():
    # Z10 shift +3: C_N(x) is the same for every x; N = 4 visits 3, 6, 9, 2 -> nearest is 2 or 9 at distance 1
    shift = CyclicShift(10, 3)
    rep = check_theorem_x2(Region.points(Z10, [0, 5]), shift, IdentityIntegrator(), 4)
    assert rep.statistic == F(2, 10) * F(1, 5)


def test_theorem_x4_examples():
    ident = identity(T1)
    arc = Region.arc(F(1, 3), F(1, 4))
    L = certified_L(3)
    rep = check_theorem_x4(arc, CommutingPair(ident, ident), IdentityIntegrator(), 3, L, Sampler(8192, seed=1))
    assert rep.statistic == 0 and rep.verdict == "pass"
    pair = CommutingPair(rotation(RealParam.golden()), rotation(RealParam.sqrt2_minus_1()))
    rep = check_theorem_x4(arc, pair, IdentityIntegrator(), 50, certified_L(50), Sampler(20_000, seed=2))
    assert rep.verdict == "pass" and rep.certificate_provenance == "behrend-lift"
    finite = CommutingPair(CyclicShift(12, 1), CyclicShift(12, 5))
    for t in range(1, 5):
        rep = check_theorem_x4(Region.points(Z12, [0, 2, 3, 7]), finite, IdentityIntegrator(), t, certified_L(t))
        assert rep.verdict == "pass" and isinstance(rep.statistic, Fraction)


def test_stratified_and_iid_agree():
    A = Region.arc(F(1, 7), F(1, 3))
    m = rotation(RealParam.sqrt2_minus_1())
    for g in (IdentityIntegrator(), FunctionIntegrator(PowerFunction(F(1, 2)))):
        a = check_theorem_x2(A, m, g, 30, Sampler(50_000, seed=1))
        b = check_theorem_x2(A, m, g, 30, Sampler(50_000, seed=2, method="stratified"))
        assert abs(a.statistic - b.statistic) <= a.margin + b.margin


# ---------------------------------------------------------------------------
# sampling and reports


def test_blocked_sum_independent_of_workers():
    def fn(rng, i, size):
        return rng.random(size).sum()

    sums = {w: blocked_sum(Sampler(50_000, seed=5, workers=w), fn) for w in (1, 2, 7)}
    assert len(set(sums.values())) == 1


def test_hoeffding_and_sampler_validation():
    assert hoeffding_halfwidth(10**5, 1.0) == pytest.approx(math.sqrt(math.log(200) / 2e5))
    for bad in ({"samples": 0}, {"workers": 0}, {"confidence": 1.0}, {"method": "sobol"}):
        with pytest.raises(ValueError):
            Sampler(**bad)


def test_report_verdict_and_serialization():
    rep = VerificationReport("x", F(1, 3), F(1, 2))
    assert rep.verdict == "pass" and rep.to_json()["statistic"] == "1/3"
    assert VerificationReport("x", 0.6, 0.5, 0.05).verdict == "fail"
    assert VerificationReport("x", 0.6, 0.5, 0.1).verdict == "pass"
    with pytest.raises(ValueError):
        VerificationReport("x", 0, 1, verdict="maybe")
    csv_text = reports_to_csv([rep])
    assert csv_text.splitlines()[0].startswith("check,statistic,bound,margin")
    assert csv_text.splitlines()[1].startswith("x,1/3,1/2,0")


# ---------------------------------------------------------------------------
# diagnostics


def test_x1_diagnostic():
    ident = identity(T1)
    arc = Region.arc(0, F(1, 2))
    h = PowerFunction(1)
    prof = truncated_profile_integrals(ident, arc, h, 20, [1, 5, 10])
    assert all(v == 0 for _, v in prof)
    est = box_counting_premeasure(arc, h, F(1, 10)).estimate
    rep = report_x1_x3_diagnostic(ident, h, prof, est)
    assert rep.verdict == "info" and not rep.params["flagged"]
    golden = RealParam.golden()
    assert rotation_liminf(golden) == pytest.approx(2 / math.sqrt(5))
    assert rotation_liminf(RealParam.sqrt2_minus_1()) == pytest.approx(2 / math.sqrt(8))
    assert rotation_liminf(RealParam.rational(F(1, 3))) is None
    prof = truncated_profile_integrals(rotation(golden), arc, h, 500, [1, 10, 100])
    values = [v for _, v in prof]
    assert values == sorted(values)
    rep = report_x1_x3_diagnostic(rotation(golden), h, prof, est, arc.measure, rotation_liminf(golden))
    assert float(rep.params["closed_form_integral"]) == pytest.approx(float(arc.measure) * 2 / math.sqrt(5))
    flagged = report_x1_x3_diagnostic(ident, h, [(1, 2.0), (5, 3.0)], 1.0)
    assert flagged.params["flagged"] and flagged.verdict == "info"
