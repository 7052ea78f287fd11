"""Compact metric spaces with their invariant probability measures.

Spaces are finite products of circles ``R/Z`` and cyclic groups ``Z_M`` with
the max-of-coordinates metric.  Every factor metric is rescaled so that its
diameter is exactly 1:

* circle: ``2 * min(|x - y| mod 1, 1 - |x - y| mod 1)``
* ``Z_M``: ``min(k, M - k) / floor(M / 2)`` where ``k = (x - y) mod M``

Covering radii ``eps`` are always expressed in these normalized units.  A
closed ball of radius ``eps`` on the circle is an arc of natural length ``eps``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Iterable, Sequence, Union

import numpy as np


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class Circle:
    scale: int = 2

    def __str__(self) -> str:
        return "T"


@dataclass(frozen=True)
class Cyclic:
    order: int

    def __post_init__(self):
        if self.order < 1:
            raise DomainError("cyclic order must be >= 1")

    @property
    def half(self) -> int:
        return max(1, self.order // 2)

    def __str__(self) -> str:
        return f"Z{self.order}"


Factor = Union[Circle, Cyclic]
Point = tuple


@dataclass(frozen=True)
class SpaceSpec:
    factors: tuple[Factor, ...]

    @classmethod
    def torus(cls, dim: int = 1) -> "SpaceSpec":
        if dim < 1:
            raise DomainError("torus dimension must be >= 1")
        return cls(tuple(Circle() for _ in range(dim)))

    @classmethod
    def cyclic(cls, order: int) -> "SpaceSpec":
        return cls((Cyclic(order),))

    @classmethod
    def product(cls, *spaces: "SpaceSpec") -> "SpaceSpec":
        return cls(tuple(f for s in spaces for f in s.factors))

    @property
    def dim(self) -> int:
        return len(self.factors)

    @property
    def is_finite(self) -> bool:
        return all(isinstance(f, Cyclic) for f in self.factors)

    @property
    def is_torus(self) -> bool:
        return all(isinstance(f, Circle) for f in self.factors)

    @property
    def size(self) -> int:
        if not self.is_finite:
            raise DomainError("continuous space has no point count")
        return math.prod(f.order for f in self.factors)

    def points(self) -> list[Point]:
        if not self.is_finite:
            raise DomainError("cannot enumerate a continuous space")
        return list(itertools.product(*(range(f.order) for f in self.factors)))

    def point(self, p) -> Point:
        """Validate ``p`` and return it as a tuple (scalars allowed for 1-factor spaces)."""
        if not isinstance(p, tuple):
            p = tuple(p) if isinstance(p, (list, np.ndarray)) else (p,)
        if len(p) != self.dim:
            raise DomainError(f"point {p!r} has wrong dimension for {self}")
        for c, f in zip(p, self.factors):
            if isinstance(f, Cyclic):
                if not isinstance(c, (int, np.integer)) or not 0 <= c < f.order:
                    raise DomainError(f"coordinate {c!r} not in Z_{f.order}")
            elif not 0 <= c < 1:
                raise DomainError(f"coordinate {c!r} not in [0, 1)")
        return p

    def __str__(self) -> str:
        return " x ".join(str(f) for f in self.factors)

    def to_json(self) -> dict:
        return {"factors": ["T" if isinstance(f, Circle) else f.order for f in self.factors]}

    @classmethod
    def from_json(cls, data: dict) -> "SpaceSpec":
        factors = []
        for f in data["factors"]:
            factors.append(Circle() if f == "T" else Cyclic(int(f)))
        return cls(tuple(factors))


def _coord_distance(f: Factor, a, b):
    if isinstance(f, Cyclic):
        k = (a - b) % f.order
        return Fraction(min(k, f.order - k), f.half)
    delta = (a - b) % 1
    return 2 * min(delta, 1 - delta)


def distance(space: SpaceSpec, x, y):
    """Normalized max-metric distance; exact for rational or integer inputs."""
    x, y = space.point(x), space.point(y)
    return max(_coord_distance(f, a, b) for f, a, b in zip(space.factors, x, y))


def distance_array(space: SpaceSpec, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized float distance for arrays of shape ``(n, dim)``."""
    out = np.zeros(xs.shape[0])
    for i, f in enumerate(space.factors):
        if isinstance(f, Cyclic):
            k = np.mod(xs[:, i] - ys[:, i], f.order)
            d = np.minimum(k, f.order - k) / f.half
        else:
            delta = np.mod(xs[:, i] - ys[:, i], 1.0)
            d = 2.0 * np.minimum(delta, 1.0 - delta)
        out = np.maximum(out, d)
    return out


# ---------------------------------------------------------------------------
# regions


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


@dataclass(frozen=True)
class Arc:
    """Half-open arc ``[lo, lo + length)`` of the circle, natural coordinates."""

    lo: Fraction
    length: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", _frac(self.lo) % 1)
        object.__setattr__(self, "length", _frac(self.length))
        if not 0 <= self.length <= 1:
            raise DomainError("arc length must lie in [0, 1]")

    def contains(self, x) -> bool:
        return (x - self.lo) % 1 < self.length or self.length == 1

    def pieces(self) -> list[tuple[Fraction, Fraction]]:
        """Non-wrapping pieces ``[a, b)`` inside ``[0, 1]``."""
        if self.length == 0:
            return []
        hi = self.lo + self.length
        if hi <= 1:
            return [(self.lo, hi)]
        return [(self.lo, Fraction(1)), (Fraction(0), hi - 1)]


Component = Union[Arc, frozenset]


@dataclass(frozen=True)
class Region:
    """Finite union of boxes, or an explicit point set on a finite space.

    Box components are :class:`Arc` for circle factors and a frozenset of
    residues for cyclic factors.  ``measure`` is the exact measure of the union.
    """

    space: SpaceSpec
    boxes: tuple[tuple[Component, ...], ...] = ()
    point_set: frozenset | None = None
    measure: Fraction = field(init=False)

    def __post_init__(self):
        if self.point_set is not None:
            if not self.space.is_finite:
                raise DomainError("explicit point sets need a finite space")
            pts = frozenset(self.space.point(p) for p in self.point_set)
            object.__setattr__(self, "point_set", pts)
            object.__setattr__(self, "measure", Fraction(len(pts), self.space.size))
            return
        for box in self.boxes:
            if len(box) != self.space.dim:
                raise DomainError("box dimension mismatch")
            for comp, f in zip(box, self.space.factors):
                if isinstance(f, Circle) != isinstance(comp, Arc):
                    raise DomainError("box component does not match factor type")
                if isinstance(f, Cyclic) and any(not 0 <= r < f.order for r in comp):
                    raise DomainError("residue outside cyclic factor")
        object.__setattr__(self, "measure", _union_measure(self.space, self.boxes))

    # constructors ---------------------------------------------------------
    @classmethod
    def empty(cls, space: SpaceSpec) -> "Region":
        if space.is_finite:
            return cls(space, point_set=frozenset())
        return cls(space, ())

    @classmethod
    def whole(cls, space: SpaceSpec) -> "Region":
        if space.is_finite:
            return cls(space, point_set=frozenset(space.points()))
        box = tuple(Arc(0, 1) if isinstance(f, Circle) else frozenset(range(f.order)) for f in space.factors)
        return cls(space, (box,))

    @classmethod
    def arc(cls, lo, length, space: SpaceSpec | None = None) -> "Region":
        space = space or SpaceSpec.torus(1)
        if space.dim != 1 or not space.is_torus:
            raise DomainError("arc regions live on the 1-torus")
        return cls(space, ((Arc(lo, length),),))

    @classmethod
    def box(cls, space: SpaceSpec, *components) -> "Region":
        comps = tuple(c if isinstance(c, (Arc, frozenset)) else (Arc(*c) if isinstance(f, Circle) else frozenset(c))
                      for c, f in zip(components, space.factors))
        return cls(space, (comps,))

    @classmethod
    def points(cls, space: SpaceSpec, pts: Iterable) -> "Region":
        return cls(space, point_set=frozenset(space.point(p) for p in pts))

    # queries --------------------------------------------------------------
    @property
    def is_point_set(self) -> bool:
        return self.point_set is not None

    def contains(self, p) -> bool:
        p = self.space.point(p)
        if self.point_set is not None:
            return p in self.point_set
        return any(_box_contains(box, p) for box in self.boxes)

    def contains_array(self, xs: np.ndarray) -> np.ndarray:
        if self.point_set is not None:
            return np.array([tuple(int(v) for v in row) in self.point_set for row in xs], dtype=bool)
        inside = np.zeros(xs.shape[0], dtype=bool)
        for box in self.boxes:
            ok = np.ones(xs.shape[0], dtype=bool)
            for i, comp in enumerate(box):
                if isinstance(comp, Arc):
                    if comp.length < 1:
                        ok &= np.mod(xs[:, i] - float(comp.lo), 1.0) < float(comp.length)
                else:
                    ok &= np.isin(xs[:, i], list(comp))
            inside |= ok
        return inside

    def finite_points(self) -> frozenset:
        """Points of a region on a finite space (boxes are expanded)."""
        if self.point_set is not None:
            return self.point_set
        if not self.space.is_finite:
            raise DomainError("region on a continuous space has no point list")
        return frozenset(p for box in self.boxes for p in itertools.product(*(sorted(c) for c in box)))

    def is_empty(self) -> bool:
        return self.measure == 0

    def to_json(self) -> dict:
        if self.point_set is not None:
            return {"space": self.space.to_json(), "points": sorted(list(p) for p in self.point_set)}
        boxes = []
        for box in self.boxes:
            boxes.append([
                {"lo": str(c.lo), "length": str(c.length)} if isinstance(c, Arc) else sorted(c) for c in box
            ])
        return {"space": self.space.to_json(), "boxes": boxes}

    @classmethod
    def from_json(cls, data: dict) -> "Region":
        space = SpaceSpec.from_json(data["space"])
        if "points" in data:
            return cls.points(space, [tuple(p) if len(p) > 1 else p[0] for p in data["points"]])
        boxes = []
        for box in data["boxes"]:
            comps = []
            for c, f in zip(box, space.factors):
                if isinstance(f, Circle):
                    comps.append(Arc(Fraction(c["lo"]), Fraction(c["length"])))
                else:
                    comps.append(frozenset(int(r) for r in c))
            boxes.append(tuple(comps))
        return cls(space, tuple(boxes))


def _box_contains(box, p) -> bool:
    for comp, c in zip(box, p):
        if isinstance(comp, Arc):
            if not comp.contains(c):
                return False
        elif c not in comp:
            return False
    return True


def _union_measure(space: SpaceSpec, boxes) -> Fraction:
    if not boxes:
        return Fraction(0)
    # elementary cells per factor: circle intervals between arc endpoints, residues for cyclic
    axes = []
    for i, f in enumerate(space.factors):
        if isinstance(f, Circle):
            cuts = {Fraction(0), Fraction(1)}
            for box in boxes:
                for a, b in box[i].pieces():
                    cuts.update((a, b))
            cuts = sorted(cuts)
            axes.append([((a + b) / 2, b - a) for a, b in zip(cuts, cuts[1:])])
        else:
            residues = set().union(*(box[i] for box in boxes))
            axes.append([(r, Fraction(1, f.order)) for r in sorted(residues)])
    total = Fraction(0)
    for cell in itertools.product(*axes):
        rep = tuple(c[0] for c in cell)
        if any(_box_contains(box, rep) for box in boxes):
            total += math.prod((c[1] for c in cell), start=Fraction(1))
    return total


# ---------------------------------------------------------------------------
# dimension functions


class DimensionFunction:
    """Continuous increasing ``h`` on ``[0, 1]`` with ``h(0) = 0``."""

    def __call__(self, t):
        raise NotImplementedError


@dataclass(frozen=True)
class PowerFunction(DimensionFunction):
    alpha: Fraction

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frac(self.alpha))
        if self.alpha <= 0:
            raise DomainError("power exponent must be positive")

    def __call__(self, t):
        if t < 0:
            raise DomainError("h is defined on [0, 1]")
        if self.alpha.denominator == 1 and isinstance(t, (int, Fraction)):
            return Fraction(t) ** self.alpha.numerator
        return float(t) ** float(self.alpha)

    def __str__(self) -> str:
        return f"t^{self.alpha}"


@dataclass(frozen=True)
class TabulatedFunction(DimensionFunction):
    """Piecewise-linear interpolation through ``(xs[i], ys[i])``; ``xs`` spans ``[0, 1]``."""

    xs: tuple
    ys: tuple

    def __post_init__(self):
        xs = tuple(_frac(v) for v in self.xs)
        ys = tuple(_frac(v) for v in self.ys)
        if len(xs) != len(ys) or len(xs) < 2:
            raise DomainError("need matching knot lists of length >= 2")
        if xs[0] != 0 or xs[-1] != 1 or ys[0] != 0:
            raise DomainError("table must span [0, 1] with h(0) = 0")
        if any(b <= a for a, b in zip(xs, xs[1:])) or any(b <= a for a, b in zip(ys, ys[1:])):
            raise DomainError("table must be strictly increasing")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __call__(self, t):
        exact = isinstance(t, (int, Fraction))
        tt = Fraction(t) if exact else float(t)
        if tt <= 0:
            return 0 if not exact else Fraction(0)
        for (x0, y0), (x1, y1) in zip(zip(self.xs, self.ys), zip(self.xs[1:], self.ys[1:])):
            if tt <= x1:
                if exact:
                    return y0 + (y1 - y0) * (tt - x0) / (x1 - x0)
                return float(y0) + float(y1 - y0) * (tt - float(x0)) / float(x1 - x0)
        return self.ys[-1] if exact else float(self.ys[-1])


def dimension_function(spec: str) -> DimensionFunction:
    """Parse ``"power:<alpha>"`` or ``"table:x0,y0;x1,y1;..."``."""
    kind, _, arg = spec.partition(":")
    if kind == "power":
        return PowerFunction(Fraction(arg))
    if kind == "table":
        pairs = [p.split(",") for p in arg.split(";")]
        return TabulatedFunction(tuple(Fraction(a) for a, _ in pairs), tuple(Fraction(b) for _, b in pairs))
    raise DomainError(f"unknown dimension function {spec!r}")


# ---------------------------------------------------------------------------
# covering numbers


@dataclass(frozen=True)
class CoverResult:
    lower: int
    upper: int
    exact: bool
    net: tuple = ()

    @property
    def value(self) -> int:
        if not self.exact:
            raise DomainError("covering number only bracketed")
        return self.upper


def _check_eps(eps) -> None:
    if eps <= 0:
        raise DomainError("eps must be positive")


def _cyclic_cover(residues: Sequence[int], order: int, radius: int) -> tuple[int, list[int]]:
    """Exact minimum of arcs ``[s, s + 2r]`` covering ``residues`` on ``Z_order``."""
    pts = sorted(set(residues))
    if not pts:
        return 0, []
    width = 2 * radius + 1
    if width >= order:
        return 1, [pts[0]]
    best: list[int] | None = None
    for start_idx in range(len(pts)):
        # unroll the cycle starting at pts[start_idx]
        origin = pts[start_idx]
        unrolled = sorted((p - origin) % order for p in pts)
        centers, covered_to = [], -1
        for q in unrolled:
            if q > covered_to:
                centers.append((origin + q + radius) % order)
                covered_to = q + width - 1
        if best is None or len(centers) < len(best):
            best = centers
    return len(best), best


def _arc_count(length: Fraction, eps) -> int:
    if length == 0:
        return 0
    return max(1, math.ceil(length / eps))


def _arc_net(arc: Arc, eps, n: int) -> list:
    return [(arc.lo + eps / 2 + j * eps) % 1 for j in range(n)]


def _slicing_lower(counts: list[int], lengths: list, eps) -> int:
    """Lower bound for covering a box by cubes via slicing along each axis in turn."""
    best = 0
    for perm in itertools.permutations(range(len(counts))):
        bound = counts[perm[0]]
        for i in perm[1:]:
            bound = max(bound, math.ceil(bound * lengths[i] / eps))
        best = max(best, bound)
    return best


def _box_cover(box, space: SpaceSpec, eps) -> CoverResult:
    counts, lengths, axes_nets = [], [], []
    for comp, f in zip(box, space.factors):
        if isinstance(comp, Arc):
            n = _arc_count(comp.length, eps)
            counts.append(n)
            lengths.append(comp.length)
            axes_nets.append(_arc_net(comp, eps, n))
        else:
            radius = math.floor(eps * f.half)
            n, centers = _cyclic_cover(sorted(comp), f.order, radius)
            counts.append(n)
            lengths.append(None)
            axes_nets.append(centers)
    if 0 in counts:
        return CoverResult(0, 0, True, ())
    upper = math.prod(counts)
    if all(length is not None for length in lengths):
        lower = _slicing_lower(counts, lengths, eps)
    else:
        lower = max(counts)
    net = tuple(itertools.product(*axes_nets)) if upper <= 100_000 else ()
    return CoverResult(lower, upper, lower == upper, net)


def _greedy_packing(points: Sequence, space: SpaceSpec, eps) -> int:
    """Points pairwise more than ``2 eps`` apart; no ball holds two of them."""
    chosen: list = []
    for p in points:
        if all(distance(space, p, q) > 2 * eps for q in chosen):
            chosen.append(p)
    return len(chosen)


def _greedy_set_cover(points: Sequence, space: SpaceSpec, eps) -> list:
    remaining = set(points)
    candidates = space.points()
    balls = {c: {p for p in remaining if distance(space, c, p) <= eps} for c in candidates}
    net = []
    while remaining:
        c = max(candidates, key=lambda c: (len(balls[c] & remaining), -candidates.index(c)))
        net.append(c)
        remaining -= balls[c]
    return net


def _merged_pieces(arcs: Iterable[Arc]) -> list[tuple[Fraction, Fraction]]:
    pieces = sorted(p for a in arcs for p in a.pieces())
    merged: list[list[Fraction]] = []
    for a, b in pieces:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    if len(merged) > 1 and merged[0][0] == 0 and merged[-1][1] == 1:
        first = merged.pop(0)
        merged[-1][1] = 1 + first[1]
    return [(a, b) for a, b in merged]


def _circle_union_cover(arcs: list[Arc], eps) -> CoverResult:
    pieces = _merged_pieces(arcs)
    if not pieces:
        return CoverResult(0, 0, True)
    total = sum((b - a for a, b in pieces), Fraction(0))
    if total >= 1:
        n = _arc_count(Fraction(1), eps)
        return CoverResult(n, n, True, tuple((Fraction(1, 2) * eps + j * eps) % 1 for j in range(n)))
    best_net = None
    for a0, _ in pieces:
        unrolled = sorted(((a - a0) % 1, (a - a0) % 1 + (b - a)) for a, b in pieces)
        net, covered_to = [], Fraction(-1)
        for a, b in unrolled:
            while covered_to < b:
                start = max(a, covered_to)
                net.append((a0 + start + eps / 2) % 1)
                covered_to = start + eps
        if best_net is None or len(net) < len(best_net):
            best_net = net
    lower = max(math.ceil(total / eps), max(_arc_count(b - a, eps) for a, b in pieces))
    return CoverResult(lower, len(best_net), lower == len(best_net), tuple(best_net))


def covering_number(region: Region, space: SpaceSpec | None, eps) -> CoverResult:
    """Minimal number of closed ``eps``-balls (centres anywhere in the space) covering ``region``."""
    space = space or region.space
    _check_eps(eps)
    if region.is_empty():
        return CoverResult(0, 0, True, ())
    if eps >= 1:
        anchor = next(iter(region.point_set)) if region.is_point_set else _box_anchor(region.boxes[0])
        return CoverResult(1, 1, True, (anchor,))
    if region.is_point_set or space.is_finite:
        pts = sorted(region.finite_points())
        if space.dim == 1:
            f = space.factors[0]
            n, centers = _cyclic_cover([p[0] for p in pts], f.order, math.floor(eps * f.half))
            return CoverResult(n, n, True, tuple((c,) for c in centers))
        if region.boxes and len(region.boxes) == 1:
            res = _box_cover(region.boxes[0], space, eps)
            if res.exact:
                return res
        net = _greedy_set_cover(pts, space, eps)
        lower = _greedy_packing(pts, space, eps)
        return CoverResult(lower, len(net), lower == len(net), tuple(net))
    if len(region.boxes) == 1:
        return _box_cover(region.boxes[0], space, eps)
    if space.dim == 1:
        return _circle_union_cover([b[0] for b in region.boxes], eps)
    parts = [_box_cover(b, space, eps) for b in region.boxes]
    lower = max(p.lower for p in parts)
    upper = sum(p.upper for p in parts)
    net = tuple(c for p in parts for c in p.net)
    return CoverResult(lower, upper, lower == upper, net)


def _box_anchor(box) -> tuple:
    return tuple(c.lo if isinstance(c, Arc) else min(c) for c in box)


def covering_breakpoints(region: Region, eps_floor) -> list:
    """Scales in ``[eps_floor, 1]`` where the covering count of ``region`` can change.

    Counts are right-continuous step functions of ``eps`` (closed balls), so the
    returned points are the left ends of their constancy intervals.
    """
    space = region.space
    cuts: set = {Fraction(1)}
    if region.is_point_set or space.is_finite:
        for f in space.factors:
            for j in range(1, f.half + 1):
                cuts.add(Fraction(j, f.half))
    else:
        lengths = set()
        for box in region.boxes:
            for comp in box:
                lengths.update(b - a for a, b in comp.pieces())
        if len(region.boxes) > 1:
            for a, b in _merged_pieces(c for box in region.boxes for c in box):
                lengths.add(b - a)
            lengths.add(sum((b - a for a, b in _merged_pieces(c for box in region.boxes for c in box)), Fraction(0)))
        lengths.add(Fraction(1))
        for length in lengths:
            if length <= 0:
                continue
            k = 1
            while length / k >= eps_floor:
                cuts.add(length / k)
                k += 1
    return sorted(c for c in cuts if eps_floor <= c <= 1)


# ---------------------------------------------------------------------------
# box-counting estimate of H_h


@dataclass(frozen=True)
class PremeasureEstimate:
    estimate: float
    ladder: tuple


def box_counting_premeasure(region: Region, h: DimensionFunction, delta) -> PremeasureEstimate:
    """``N_delta * h(delta)`` at one scale, or the minimum over a ladder of scales.

    Uses the upper end of the covering bracket so the value stays an upper estimate.
    """
    deltas = list(delta) if isinstance(delta, (list, tuple)) else [delta]
    rows = []
    for d in deltas:
        _check_eps(d)
        cover = covering_number(region, region.space, d)
        rows.append((d, cover.upper, cover.upper * h(d)))
    return PremeasureEstimate(min(r[2] for r in rows), tuple(rows))
