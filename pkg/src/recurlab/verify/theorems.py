"""Integral recurrence inequalities: exact or sampled left sides against covering-number right sides.

The right side is ``inf_t { g(t) mu(A) + int_(t,1] N_A(e) dg(e) }`` with
``N_A(e) = min(mu(A), N_e(A) * w)``, where ``w = 1/N`` for a single map and
``w = L(N)`` (upper end of its certificate) for a commuting pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..corners import DensityCertificate
from ..dynamics import (
    AffineTorusMap,
    CommutingPair,
    MapSpec,
    MissingCertificate,
    RealParam,
    orbit,
)
from ..spaces import (
    DimensionFunction,
    PowerFunction,
    Region,
    SpaceSpec,
    covering_breakpoints,
    covering_number,
    distance,
    distance_array,
)
from .reports import VerificationReport
from .sampling import BLOCK_SIZE, Sampler, blocked_sum, hoeffding_halfwidth
from .stieltjes import IdentityIntegrator, Integrator, StepFunction, tail_integrals

DEFAULT_GRID = 1000
# absolute slack for float orbits on the torus (double rounding over at most a few hundred steps)
FLOAT_SLACK = 1e-9


@dataclass(frozen=True)
class RHSResult:
    value: object
    argmin: object
    exact: bool
    candidates: int
    note: str = ""


def _floor_scale(space: SpaceSpec, weight) -> Fraction:
    """Scale below which ``N_A(e)`` is known without counting.

    On the torus a closed ``e``-ball has measure ``e^d``, so ``N_e(A) * w >= mu(A)``
    once ``e^d <= w``.  On finite spaces every ball below the smallest step is a point.
    """
    if space.is_finite:
        return Fraction(1, max(f.half for f in space.factors))
    w = Fraction(weight)
    if space.dim == 1:
        return w
    # rational lower approximation of w^(1/d)
    root = Fraction(math.floor(float(w) ** (1.0 / space.dim) * 2**40), 2**40)
    while root**space.dim > w:
        root -= Fraction(1, 2**40)
    return root


def covering_integrand(region: Region, weight, eps_floor=None) -> StepFunction:
    """``N_A(e) = min(mu(A), N_e(A) * weight)`` as a right-continuous step function on ``[0, 1]``.

    Where the covering count is only bracketed, each constancy piece takes the lower
    count at its right end; the resulting function lies below the true one, which keeps
    the computed right side conservative.
    """
    space = region.space
    mu = region.measure
    weight = Fraction(weight) if not isinstance(weight, float) else weight
    if region.is_empty():
        return StepFunction((Fraction(0),), (Fraction(0),))
    floor = _floor_scale(space, weight) if eps_floor is None else Fraction(eps_floor)
    floor = min(floor, Fraction(1))
    cuts = covering_breakpoints(region, floor)
    if not cuts or cuts[0] != floor:
        cuts = [floor] + cuts
    counts = [covering_number(region, space, c) for c in cuts]
    values = []
    for i, res in enumerate(counts):
        if res.exact or i + 1 == len(counts):
            n = res.lower if not res.exact else res.value
        else:
            n = counts[i + 1].lower
        values.append(min(mu, n * weight))
    if space.is_finite:
        first = min(mu, len(region.finite_points()) * weight)
    else:
        first = mu
    breaks = (Fraction(0),) + tuple(cuts)
    values = [first] + values
    # collapse repeated values to keep the step representation minimal
    b_out, v_out = [breaks[0]], [values[0]]
    for b, v in zip(breaks[1:], values[1:]):
        if v != v_out[-1]:
            b_out.append(b)
            v_out.append(v)
    return StepFunction(tuple(b_out), tuple(v_out))


def _objective_min(region: Region, g: Integrator, integrand: StepFunction, grid: int) -> RHSResult:
    mu = region.measure
    cands = {Fraction(0)} | set(integrand.breaks) | {Fraction(j, grid) for j in range(grid + 1)}
    cands |= {Fraction(c) for c, _ in g.jumps()}
    cands = sorted(c for c in cands if 0 <= c <= 1)
    tails = tail_integrals(integrand, g, cands, top=Fraction(1))
    best_t, best = None, None
    for t in cands:
        val = g(t) * mu + tails[t]
        if best is None or val < best:
            best, best_t = val, t
    exact = isinstance(best, (int, Fraction))
    return RHSResult(best, best_t, exact, len(cands), "minimum over breakpoints, integrator jumps and grid")


def rhs_bound_x2(A: Region, space: SpaceSpec | None, g: Integrator, N: int, grid: int = DEFAULT_GRID) -> RHSResult:
    """``inf_t { g(t) mu(A) + int_t^1 min(mu(A), N_e(A)/N) dg(e) }``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if A.is_empty():
        return RHSResult(Fraction(0), Fraction(0), True, 1)
    integrand = covering_integrand(A, Fraction(1, N))
    return _objective_min(A, g, integrand, grid)


def rhs_bound_x4(A: Region, space: SpaceSpec | None, g: Integrator, N: int, L: DensityCertificate | None,
                 grid: int = DEFAULT_GRID) -> RHSResult:
    """As :func:`rhs_bound_x2` with weight ``L(N)``, taken at the upper end of the certificate."""
    if L is None or L.t != N:
        raise MissingCertificate(f"no L certificate for N={N}")
    if A.is_empty():
        return RHSResult(Fraction(0), Fraction(0), True, 1)
    integrand = covering_integrand(A, L.upper)
    return _objective_min(A, g, integrand, grid)


# ---------------------------------------------------------------------------
# left sides


def _g_values(g: Integrator, values):
    if isinstance(values, np.ndarray):
        return g.array(values)
    return [g(v) for v in values]


def _exact_lhs_single(A: Region, map_: MapSpec, g: Integrator, N: int):
    space = map_.space
    total = Fraction(0)
    for x in sorted(A.finite_points()):
        c = min(distance(space, y, x) for y in orbit(map_, x, N))
        total += g(c)
    return total / space.size


def _exact_lhs_pair(A: Region, pair: CommutingPair, g: Integrator, N: int):
    space = pair.space
    total = Fraction(0)
    for x in sorted(A.finite_points()):
        c = min(max(distance(space, s, x), distance(space, r, x))
                for s, r in zip(orbit(pair.S, x, N), orbit(pair.R, x, N)))
        total += g(c)
    return total / space.size


def _draw(sampler: Sampler, rng: np.random.Generator, block: int, size: int, dim: int) -> np.ndarray:
    xs = rng.random((size, dim))
    if sampler.method == "stratified":
        start = block * BLOCK_SIZE
        xs[:, 0] = (start + np.arange(size) + xs[:, 0]) / sampler.samples
    return xs


def _sampled_lhs(A: Region, space: SpaceSpec, maps: list[MapSpec], g: Integrator, N: int, sampler: Sampler):
    def block(rng, i, size):
        xs = _draw(sampler, rng, i, size, space.dim)
        inside = A.contains_array(xs)
        xs = xs[inside]
        if xs.shape[0] == 0:
            return 0.0
        cur = [xs] * len(maps)
        best = np.full(xs.shape[0], np.inf)
        for _ in range(N):
            cur = [m.apply_array(c) for m, c in zip(maps, cur)]
            d = np.max([distance_array(space, c, xs) for c in cur], axis=0)
            np.minimum(best, d, out=best)
        return float(np.sum(_g_values(g, best)))

    total = blocked_sum(sampler, block)
    g_range = float(g(1)) - min(0.0, float(g(0)))
    return total / sampler.samples, hoeffding_halfwidth(sampler.samples, g_range, sampler.confidence)


def _report(check: str, lhs, rhs: RHSResult, margin, sampler: Sampler | None, provenance, params) -> VerificationReport:
    params = dict(params, argmin_t=str(rhs.argmin), rhs_exact=rhs.exact, rhs_candidates=rhs.candidates)
    if sampler is None:
        return VerificationReport(check, lhs, rhs.value, 0, certificate_provenance=provenance, params=params)
    params["method"] = sampler.method
    return VerificationReport(check, lhs, float(rhs.value), margin, sampler.samples, sampler.seed, provenance,
                              params=params)


def check_theorem_x2(A: Region, map_: MapSpec, g: Integrator, N: int, sampler: Sampler | None = None,
                     grid: int = DEFAULT_GRID) -> VerificationReport:
    """``int_A g(C_N(x)) dmu <= rhs_bound_x2``; exact on finite spaces, sampled on the torus."""
    space = map_.space
    rhs = rhs_bound_x2(A, space, g, N, grid)
    params = {"N": N, "map": map_.to_json(), "g": repr(g), "measure_A": str(A.measure)}
    if A.is_empty():
        return _report("theorem-x2", Fraction(0), rhs, 0, None, None, params)
    if space.is_finite:
        return _report("theorem-x2", _exact_lhs_single(A, map_, g, N), rhs, 0, None, None, params)
    sampler = sampler or Sampler()
    lhs, hw = _sampled_lhs(A, space, [map_], g, N, sampler)
    return _report("theorem-x2", lhs, rhs, hw + FLOAT_SLACK, sampler, None, params)


def check_theorem_x4(A: Region, pair: CommutingPair, g: Integrator, N: int, L: DensityCertificate | None,
                     sampler: Sampler | None = None, grid: int = DEFAULT_GRID) -> VerificationReport:
    """``int_A g(C^{S,R}_N(x)) dmu <= rhs_bound_x4``."""
    space = pair.space
    rhs = rhs_bound_x4(A, space, g, N, L, grid)
    params = {"N": N, "pair": pair.to_json(), "g": repr(g), "measure_A": str(A.measure),
              "L_endpoint": "upper", "L_upper": str(L.upper)}
    if A.is_empty():
        return _report("theorem-x4", Fraction(0), rhs, 0, None, L.provenance, params)
    if space.is_finite:
        return _report("theorem-x4", _exact_lhs_pair(A, pair, g, N), rhs, 0, None, L.provenance, params)
    sampler = sampler or Sampler()
    lhs, hw = _sampled_lhs(A, space, [pair.S, pair.R], g, N, sampler)
    return _report("theorem-x4", lhs, rhs, hw + FLOAT_SLACK, sampler, L.provenance, params)


# ---------------------------------------------------------------------------
# liminf diagnostics


def constant_quotient(alpha: RealParam, depth: int = 40) -> int | None:
    """``a`` when the expansion of ``alpha`` is ``[0; a, a, a, ...]`` to the given depth."""
    if alpha.terminal:
        return None
    terms = alpha.cf_terms(depth)
    tail = terms[2:] if len(terms) > 2 else []
    if tail and all(t == tail[0] for t in tail) and terms[1] in (tail[0], tail[0] + 1):
        return tail[0]
    return None


def rotation_liminf(alpha: RealParam) -> float | None:
    """``liminf n * ||n alpha||`` in normalized units (``2 / sqrt(a^2 + 4)``) for constant quotients."""
    a = constant_quotient(alpha)
    if a is None:
        return None
    return 2.0 / math.sqrt(a * a + 4)


def truncated_profile_integrals(map_: MapSpec, A: Region, h: DimensionFunction, N: int, K_ladder,
                                sample_points: int = 64) -> list[tuple[int, float]]:
    """``(K, int_A min_{K<=n<=N} n h(d(T^n x, x)) dmu)`` for each ``K``.

    Exact average over the points of ``A`` on finite spaces; on the torus a midpoint
    grid inside the first box of ``A`` (informational only).
    """
    space = map_.space
    Ks = sorted({int(k) for k in K_ladder if 1 <= int(k) <= N})
    if A.is_empty():
        return [(K, 0.0) for K in Ks]
    if space.is_finite:
        pts = sorted(A.finite_points())
        weight = Fraction(1, space.size)
    else:
        box = A.boxes[0]
        pts = [tuple(c.lo + c.length * Fraction(2 * j + 1, 2 * sample_points) for c in box)
               for j in range(sample_points)]
        pts = [tuple(v % 1 for v in p) for p in pts]
        weight = A.measure / len(pts)
    sums = {K: 0 for K in Ks}
    for x in pts:
        ds = [distance(space, y, x) for y in orbit(map_, x, N)]
        w = [n * h(d) for n, d in enumerate(ds, start=1)]
        for K in Ks:
            sums[K] += min(w[K - 1:])
    return [(K, float(sums[K] * weight)) for K in Ks]


def report_x1_x3_diagnostic(system, h: DimensionFunction, profiles, H_h_estimate, measure=None,
                            closed_form=None) -> VerificationReport:
    """Truncated-profile integrals against a box-counting estimate of ``H_h(A)``.

    ``profiles`` is a list of ``(K, integral)``.  The result is informational; the
    ``flagged`` parameter is set only if every ``K`` exceeds the estimate.
    """
    values = [float(v) for _, v in profiles]
    est = float(H_h_estimate)
    flagged = bool(values) and all(v > est for v in values)
    params = {
        "system": system.to_json() if hasattr(system, "to_json") else str(system),
        "h": str(h),
        "profiles": [[int(K), repr(float(v))] for K, v in profiles],
        "flagged": flagged,
    }
    if closed_form is not None:
        params["closed_form_integral"] = repr(float(closed_form) * float(measure if measure is not None else 1))
        params["flagged"] = flagged or float(closed_form) * float(measure or 1) > est
    statistic = min(values) if values else 0.0
    return VerificationReport("theorem-x1-x3-diagnostic", statistic, est, 0, verdict="info", params=params)


def is_rotation(map_: MapSpec) -> bool:
    return isinstance(map_, AffineTorusMap) and map_.is_translation and map_.space.dim == 1


def default_g() -> Integrator:
    return IdentityIntegrator()


def g_from_h(h: DimensionFunction) -> Integrator:
    from .stieltjes import FunctionIntegrator

    if isinstance(h, PowerFunction) and h.alpha == 1:
        return IdentityIntegrator()
    return FunctionIntegrator(h)
