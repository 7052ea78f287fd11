"""Non-returning sets, the corner-extraction argument and union multiplicity."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ..corners import Corner, DensityCertificate, GridSubset, certified_L, find_corner
from ..dynamics import CommutingPair, MapSpec, iterate
from ..spaces import Region, SpaceSpec
from .reports import VerificationReport
from .sampling import Sampler, blocked_sum, hoeffding_halfwidth


class UnsupportedRepresentation(TypeError):
    pass


@dataclass(frozen=True)
class NonReturningSet:
    """``Y(t)``: exact point set on finite spaces, Monte Carlo estimate on tori."""

    base: Region
    t: int
    points: frozenset | None = None
    estimate: float | None = None
    halfwidth: float | None = None
    samples: int | None = None
    seed: int | None = None

    @property
    def exact(self) -> bool:
        return self.points is not None

    @property
    def measure(self):
        if self.points is not None:
            return Fraction(len(self.points), self.base.space.size)
        return self.estimate


def _returns_single(map_: MapSpec, Y: frozenset, x, t: int) -> bool:
    for _ in range(t):
        x = map_.apply(x)
        if x in Y:
            return True
    return False


def _returns_pair(pair: CommutingPair, Y: frozenset, x, t: int) -> bool:
    s = r = x
    for _ in range(t):
        s, r = pair.S.apply(s), pair.R.apply(r)
        if s in Y and r in Y:
            return True
    return False


def _torus_estimate(Y: Region, t: int, sampler: Sampler, step) -> tuple[float, float]:
    space = Y.space

    def block(rng, _i, size):
        xs = rng.random((size, space.dim))
        return step(xs).sum()

    total = blocked_sum(sampler, block)
    est = total / sampler.samples
    return est, hoeffding_halfwidth(sampler.samples, 1.0, sampler.confidence)


def non_returning_single(Y: Region, map_: MapSpec, t: int, sampler: Sampler | None = None) -> NonReturningSet:
    """``{x in Y : T^i x not in Y for 1 <= i <= t}``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    space = map_.space
    if space.is_finite:
        pts = Y.finite_points()
        return NonReturningSet(Y, t, frozenset(x for x in pts if not _returns_single(map_, pts, x, t)))
    sampler = sampler or Sampler()

    def indicator(xs):
        keep = Y.contains_array(xs)
        cur = xs
        for _ in range(t):
            cur = map_.apply_array(cur)
            keep &= ~Y.contains_array(cur)
        return keep

    est, hw = _torus_estimate(Y, t, sampler, indicator)
    return NonReturningSet(Y, t, None, est, hw, sampler.samples, sampler.seed)


def non_returning_pair(Y: Region, pair: CommutingPair, t: int, sampler: Sampler | None = None) -> NonReturningSet:
    """``{x in Y : for each 1 <= i <= t, S^i x not in Y or R^i x not in Y}``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    space = pair.space
    if space.is_finite:
        pts = Y.finite_points()
        return NonReturningSet(Y, t, frozenset(x for x in pts if not _returns_pair(pair, pts, x, t)))
    sampler = sampler or Sampler()

    def indicator(xs):
        keep = Y.contains_array(xs)
        s = r = xs
        for _ in range(t):
            s, r = pair.S.apply_array(s), pair.R.apply_array(r)
            keep &= ~(Y.contains_array(s) & Y.contains_array(r))
        return keep

    est, hw = _torus_estimate(Y, t, sampler, indicator)
    return NonReturningSet(Y, t, None, est, hw, sampler.samples, sampler.seed)


def _report_from_set(name: str, Yt: NonReturningSet, bound, provenance: str | None, params: dict) -> VerificationReport:
    if Yt.exact:
        return VerificationReport(name, Yt.measure, bound, 0, certificate_provenance=provenance, params=params)
    return VerificationReport(name, Yt.estimate, float(bound), Yt.halfwidth, Yt.samples, Yt.seed, provenance,
                              params=params)


def check_lemma_l_add(Y: Region, map_: MapSpec, t: int, sampler: Sampler | None = None) -> VerificationReport:
    """``mu(Y(t)) <= 1/t``."""
    Yt = non_returning_single(Y, map_, t, sampler)
    params = {"t": t, "map": map_.to_json(), "measure_Y": str(Y.measure)}
    return _report_from_set("lemma-l_add", Yt, Fraction(1, t), None, params)


def check_lemma_ll(Y: Region, pair: CommutingPair, t: int, L: DensityCertificate,
                   sampler: Sampler | None = None) -> VerificationReport:
    """``mu(Y(t)) <= L(t)`` against the upper end of the certificate."""
    if L is None or L.t != t:
        raise KeyError(f"missing L certificate for t={t}")
    Yt = non_returning_pair(Y, pair, t, sampler)
    params = {"t": t, "pair": pair.to_json(), "L_endpoint": "upper", "L_upper": str(L.upper)}
    return _report_from_set("lemma-ll", Yt, L.upper, L.provenance, params)


# ---------------------------------------------------------------------------
# vectorized sweeps over cyclic shift systems


def first_return_hits(Y: np.ndarray, step: int, t_max: int) -> np.ndarray:
    """``hit[k-1, j, x]`` is True when ``x + k*step`` lies in ``Y[j]`` (``Y``: boolean ``(n, M)``)."""
    M = Y.shape[1]
    idx = np.arange(M)
    return np.stack([Y[:, (idx + k * step) % M] for k in range(1, t_max + 1)])


def non_returning_counts_single(Y: np.ndarray, step: int, t_values: Sequence[int]) -> dict[int, np.ndarray]:
    """``|Y(t)|`` for a batch of subsets of ``Z_M`` under ``x -> x + step``."""
    t_max = max(t_values)
    returned = np.zeros_like(Y)
    counts = {}
    hits = first_return_hits(Y, step, t_max)
    for k in range(1, t_max + 1):
        returned |= hits[k - 1]
        if k in t_values:
            counts[k] = (Y & ~returned).sum(axis=1)
    return counts


def non_returning_counts_pair(Y: np.ndarray, a: int, b: int, t_values: Sequence[int]) -> dict[int, np.ndarray]:
    """``|Y(t)|`` for a batch of subsets of ``Z_M`` under the pair ``x + a``, ``x + b``."""
    t_max = max(t_values)
    hs = first_return_hits(Y, a, t_max)
    hr = first_return_hits(Y, b, t_max)
    returned = np.zeros_like(Y)
    counts = {}
    for k in range(1, t_max + 1):
        returned |= hs[k - 1] & hr[k - 1]
        if k in t_values:
            counts[k] = (Y & ~returned).sum(axis=1)
    return counts


def non_returning_counts_pairs(Y: np.ndarray, a: int, bs: Sequence[int], t_values: Sequence[int]) -> dict[int, np.ndarray]:
    """As :func:`non_returning_counts_pair` for every ``b`` in ``bs`` at once; counts have shape ``(len(bs), n)``."""
    t_max = max(t_values)
    M = Y.shape[1]
    idx = np.arange(M)
    bs = np.asarray(bs)
    hs = first_return_hits(Y, a, t_max)
    returned = np.zeros((len(bs),) + Y.shape, dtype=bool)
    counts = {}
    for k in range(1, t_max + 1):
        gather = (idx[None, :] + k * bs[:, None]) % M  # (len(bs), M)
        hr = Y[:, gather].transpose(1, 0, 2)  # (len(bs), n, M)
        returned |= hs[k - 1][None] & hr
        if k in t_values:
            counts[k] = (Y[None] & ~returned).sum(axis=2)
    return counts


# ---------------------------------------------------------------------------
# the corner argument


@dataclass(frozen=True)
class ReturnIndexSet:
    x: tuple
    t: int
    indices: GridSubset

    def __len__(self) -> int:
        return len(self.indices)


def return_index_set(x, Y_t: NonReturningSet | frozenset, pair: CommutingPair, t: int) -> ReturnIndexSet:
    """``A(x) = {(k1, k2) in [1,t]^2 : S^k1 R^k2 x in Y(t)}``."""
    if isinstance(Y_t, NonReturningSet):
        if not Y_t.exact:
            raise UnsupportedRepresentation("return index sets need an exact Y(t)")
        members = Y_t.points
    else:
        members = frozenset(Y_t)
    x = pair.space.point(x)
    mask = np.zeros((t, t), dtype=bool)
    r = x
    for k2 in range(1, t + 1):
        r = pair.R.apply(r)
        s = r
        for k1 in range(1, t + 1):
            s = pair.S.apply(s)
            mask[k1 - 1, k2 - 1] = s in members
    return ReturnIndexSet(x, t, GridSubset(t, mask))


def index_family(Y_t: frozenset, pair: CommutingPair, t: int) -> dict[tuple[int, int], frozenset]:
    """``M_{k1,k2} = S^{-k1} R^{-k2} Y(t)`` as point sets, for ``1 <= k1, k2 <= t``."""
    pts = pair.space.points()
    out = {}
    for k1 in range(1, t + 1):
        for k2 in range(1, t + 1):
            out[(k1, k2)] = frozenset(x for x in pts if iterate(pair.S, iterate(pair.R, x, k2), k1) in Y_t)
    return out


@dataclass(frozen=True)
class CornerExtraction:
    corner: Corner
    u1: tuple
    u2: tuple
    u3: tuple
    relations_hold: bool
    violates_non_return: bool


def corner_extraction_demo(x, A_x: ReturnIndexSet, pair: CommutingPair, t: int, Y_t,
                           L: DensityCertificate | None = None) -> CornerExtraction | None:
    """Run the extraction step: a dense ``A(x)`` contains a corner, whose points give
    ``u1 = S^-d u2 = R^-d u3`` all in the supplied set.

    On a genuine ``Y(t)`` the premise never holds; feed a set that is not closed
    under the non-return condition to exercise this path.
    """
    L = L or certified_L(t, "exact-required")
    if not L.is_exact:
        raise ValueError("corner extraction needs an exact L(t)")
    if len(A_x) <= t * t * L.upper:
        return None
    corner = find_corner(A_x.indices)
    if corner is None:
        raise AssertionError(f"|A(x)| = {len(A_x)} exceeds t^2 L(t) but no corner found: certificate is wrong")
    members = Y_t.points if isinstance(Y_t, NonReturningSet) else frozenset(Y_t)
    k, m, d = corner
    S, R = pair.S, pair.R
    base = iterate(R, pair.space.point(x), m)
    u1 = iterate(S, base, k)
    u2 = iterate(S, base, k + d)
    u3 = iterate(S, iterate(R, pair.space.point(x), m + d), k)
    Sinv, Rinv = S.inverse(), R.inverse()
    relations = iterate(Sinv, u2, d) == u1 and iterate(Rinv, u3, d) == u1
    in_set = u1 in members and u2 in members and u3 in members
    violates = in_set and d <= t and iterate(S, u1, d) in members and iterate(R, u1, d) in members
    return CornerExtraction(corner, u1, u2, u3, relations, violates)


def check_union_multiplicity(M_list: Sequence, l: int, space: SpaceSpec | None = None) -> VerificationReport:
    """If every point lies in at most ``l`` sets then ``mu(union) >= (1/l) * sum mu(M_i)``."""
    if l < 1:
        raise ValueError("l must be >= 1")
    sets = [m.finite_points() if isinstance(m, Region) else frozenset(m) for m in M_list]
    if space is None:
        regions = [m for m in M_list if isinstance(m, Region)]
        if not regions:
            raise ValueError("space required for raw point sets")
        space = regions[0].space
    size = space.size
    counts: dict = {}
    for s in sets:
        for p in s:
            counts[p] = counts.get(p, 0) + 1
    multiplicity = max(counts.values(), default=0)
    union = Fraction(len(counts), size)
    statistic = Fraction(sum(len(s) for s in sets), size * l)
    params = {"l": l, "family_size": len(sets), "max_multiplicity": multiplicity}
    verdict = "hypothesis-fail" if multiplicity > l else ""
    return VerificationReport("lemma-l_ver", statistic, union, 0, verdict=verdict, params=params)
