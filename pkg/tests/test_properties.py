"""Property-based checks of the stated invariants."""

from fractions import Fraction

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from oracles import brute_first_corner, brute_has_ap3, brute_Y_pair, cyclic_dist
from recurlab import cli
from recurlab.corners import GridSubset, contains_corner, find_corner, lift_ap3_to_corner_free
from recurlab.dynamics import CommutingPair, CyclicShift, recurrence_constant, rotation, simultaneous_recurrence
from recurlab.spaces import Region, SpaceSpec, covering_number, distance
from recurlab.verify import VerificationReport, non_returning_pair, return_index_set

fractions01 = st.fractions(min_value=0, max_value=1, max_denominator=200).filter(lambda f: f < 1)
settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def grids(draw):
    N = draw(st.integers(1, 7))
    cells = draw(st.lists(st.booleans(), min_size=N * N, max_size=N * N))
    return GridSubset(N, np.array(cells, dtype=bool).reshape(N, N))


@given(grids())
def test_find_corner_consistent_with_contains(A):
    c = find_corner(A)
    assert (c is None) == (not contains_corner(A))
    assert (None if c is None else tuple(c)) == brute_first_corner(set(A.points()), A.side)


@st.composite
def ap3_free_sets(draw):
    N = draw(st.integers(1, 40))
    chosen: list[int] = []
    for v in draw(st.permutations(range(1, 3 * N + 1))):
        if draw(st.booleans()) and not brute_has_ap3(chosen + [v]):
            chosen.append(v)
    return N, chosen


@given(ap3_free_sets())
def test_lift_is_corner_free(case):
    N, B = case
    grid = lift_ap3_to_corner_free(B, N)
    assert not contains_corner(grid)
    assert all(x + 2 * y in B for x, y in grid.points())


@given(fractions01, st.fractions(min_value=Fraction(1, 100), max_value=1, max_denominator=100),
       st.lists(st.fractions(min_value=Fraction(1, 200), max_value=1, max_denominator=200), min_size=2, max_size=6))
def test_covering_nonincreasing_in_eps(lo, length, eps_list):
    region = Region.arc(lo, length)
    eps_sorted = sorted(set(eps_list))
    counts = [covering_number(region, region.space, e) for e in eps_sorted]
    assert all(b.upper <= a.upper and b.lower <= a.lower for a, b in zip(counts, counts[1:]))


@given(st.integers(1, 40), st.data())
def test_cyclic_metric(M, data):
    Z = SpaceSpec.cyclic(M)
    x, y, z = (data.draw(st.integers(0, M - 1)) for _ in range(3))
    d = distance(Z, x, y)
    assert d == cyclic_dist(M, x, y) == distance(Z, y, x)
    assert 0 <= d <= 1
    assert distance(Z, x, z) <= d + distance(Z, y, z)


@given(st.integers(1, 20), st.data())
def test_double_counting_identity(M, data):
    a, b = data.draw(st.integers(0, M - 1)), data.draw(st.integers(0, M - 1))
    t = data.draw(st.integers(1, 5))
    Y = data.draw(st.sets(st.integers(0, M - 1)))
    pair = CommutingPair(CyclicShift(M, a), CyclicShift(M, b))
    Yt = non_returning_pair(Region.points(SpaceSpec.cyclic(M), Y), pair, t)
    assert Yt.points == {(x,) for x in brute_Y_pair(M, a, b, Y, t)}
    assert sum(len(return_index_set(x, Yt, pair, t)) for x in range(M)) == t * t * len(Yt.points)


@given(fractions01, fractions01, fractions01, st.integers(1, 40))
def test_simultaneous_at_least_each_constant(a, b, x, N):
    pair = CommutingPair(rotation(a), rotation(b))
    s = simultaneous_recurrence(pair, x, N)
    assert s >= recurrence_constant(pair.S, x, N)
    assert s >= recurrence_constant(pair.R, x, N)


@given(st.fractions(0, 2, max_denominator=50), st.fractions(0, 2, max_denominator=50),
       st.fractions(0, 1, max_denominator=50))
def test_verdict_matches_comparison(stat, bound, margin):
    rep = VerificationReport("p", stat, bound, margin)
    assert (rep.verdict == "pass") == (stat <= bound + margin)


cli_tokens = st.sampled_from(["--n", "--max", "--eps", "--region", "--seed", "--samples", "--map", "-1", "0",
                              "3", "x", "1/0", "arc:0", "whole", "rotation:", "shift:0:1", "--workers", ""])


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.sampled_from([["corners", "solve"], ["corners", "bound"], ["entropy", "cover"],
                        ["recur", "single"], ["verify", "union"]]),
       st.lists(cli_tokens, max_size=4))
def test_cli_exit_status_contract(tmp_path_factory, prefix, extra):
    out = tmp_path_factory.mktemp("cli")
    code = cli.main(prefix + extra + ["--out", str(out)])
    assert code in (0, 1, 2)
