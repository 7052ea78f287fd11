"""Corner-free and 3-AP-free extremal sets.

A *corner* in the grid ``[1, N]^2`` is a triple ``(k, m), (k+d, m), (k, m+d)``
with ``d >= 1``.  ``L(N)`` is the largest density of a corner-free subset of
the grid; this module computes it exactly for small ``N`` and brackets it
otherwise.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, NamedTuple

import numpy as np

PROVENANCES = ("exact", "exhaustive", "branch-and-bound", "behrend-lift", "vu-bound", "trivial")

# Largest side handled by the numpy mask enumeration (2**25 masks).
EXHAUSTIVE_MAX_SIDE = 5
DEFAULT_NODE_BUDGET = 200_000
# brackets only attempt branch and bound up to this side; beyond it nodes get too costly
BRACKET_BNB_MAX_SIDE = 7
BRACKET_NODE_BUDGET = 20_000
# the packing relaxation costs roughly t^6; larger sides use block bounds instead
RELAXATION_MAX_SIDE = 30


class BudgetExhausted(RuntimeError):
    pass


class CertificateUnavailable(RuntimeError):
    pass


class Corner(NamedTuple):
    k: int
    m: int
    d: int

    def points(self) -> tuple[tuple[int, int], tuple[int, int], tuple[int, int]]:
        k, m, d = self
        return (k, m), (k + d, m), (k, m + d)


class GridSubset:
    """Subset of ``[1, side]^2`` stored as a boolean mask indexed ``[x-1, y-1]``."""

    __slots__ = ("side", "mask")

    def __init__(self, side: int, mask: np.ndarray | None = None):
        if side < 0:
            raise ValueError("side must be non-negative")
        self.side = side
        if mask is None:
            mask = np.zeros((side, side), dtype=bool)
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (side, side):
            raise ValueError(f"mask shape {mask.shape} does not match side {side}")
        self.mask = mask

    @classmethod
    def from_points(cls, side: int, points: Iterable[tuple[int, int]]) -> "GridSubset":
        mask = np.zeros((side, side), dtype=bool)
        for x, y in points:
            if not (1 <= x <= side and 1 <= y <= side):
                raise ValueError(f"point {(x, y)} outside [1,{side}]^2")
            mask[x - 1, y - 1] = True
        return cls(side, mask)

    @classmethod
    def full(cls, side: int) -> "GridSubset":
        return cls(side, np.ones((side, side), dtype=bool))

    def points(self) -> list[tuple[int, int]]:
        xs, ys = np.nonzero(self.mask)
        return [(int(x) + 1, int(y) + 1) for x, y in zip(xs, ys)]

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __contains__(self, p: tuple[int, int]) -> bool:
        x, y = p
        return 1 <= x <= self.side and 1 <= y <= self.side and bool(self.mask[x - 1, y - 1])

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return iter(self.points())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridSubset):
            return NotImplemented
        return self.side == other.side and bool(np.array_equal(self.mask, other.mask))

    def __repr__(self) -> str:
        return f"GridSubset(side={self.side}, size={len(self)})"

    def to_text(self) -> str:
        """Witness file body: ``N=<side>`` then sorted ``x y`` lines."""
        lines = [f"N={self.side}"]
        lines.extend(f"{x} {y}" for x, y in sorted(self.points()))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GridSubset":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("N="):
            raise ValueError("witness file must start with 'N=<side>'")
        side = int(lines[0][2:])
        pts = []
        for ln in lines[1:]:
            x, y = ln.split()
            pts.append((int(x), int(y)))
        return cls.from_points(side, pts)


@dataclass(frozen=True)
class ApFreeSet:
    bound: int
    members: frozenset[int]

    def __post_init__(self):
        if any(not 1 <= b <= self.bound for b in self.members):
            raise ValueError("members must lie in [1, bound]")

    def __len__(self) -> int:
        return len(self.members)

    def sorted(self) -> list[int]:
        return sorted(self.members)


@dataclass(frozen=True)
class DensityCertificate:
    t: int
    lower: Fraction
    upper: Fraction
    provenance: str

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if not (0 <= self.lower <= self.upper <= 1):
            raise ValueError(f"inconsistent bracket [{self.lower}, {self.upper}]")
        if self.provenance == "exact" and self.lower != self.upper:
            raise ValueError("exact certificate must have lower == upper")

    @property
    def is_exact(self) -> bool:
        return self.lower == self.upper

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "lower_num": self.lower.numerator,
            "lower_den": self.lower.denominator,
            "upper_num": self.upper.numerator,
            "upper_den": self.upper.denominator,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, data: dict) -> "DensityCertificate":
        return cls(
            t=int(data["t"]),
            lower=Fraction(int(data["lower_num"]), int(data["lower_den"])),
            upper=Fraction(int(data["upper_num"]), int(data["upper_den"])),
            provenance=data["provenance"],
        )


# ---------------------------------------------------------------------------
# corner scans


def _corner_hits(mask: np.ndarray, d: int) -> np.ndarray:
    n = mask.shape[0]
    base = mask[: n - d, : n - d]
    return base & mask[d:, : n - d] & mask[: n - d, d:]


def contains_corner(A: GridSubset) -> bool:
    mask = A.mask
    for d in range(1, A.side):
        if _corner_hits(mask, d).any():
            return True
    return False


def find_corner(A: GridSubset) -> Corner | None:
    """Lexicographically smallest ``(k, m, d)`` corner inside ``A``, if any."""
    best: Corner | None = None
    for d in range(1, A.side):
        hits = _corner_hits(A.mask, d)
        if not hits.any():
            continue
        flat = int(np.argmax(hits.ravel()))
        k, m = divmod(flat, hits.shape[1])
        cand = Corner(k + 1, m + 1, d)
        if best is None or cand < best:
            best = cand
    return best


def corner_triples(N: int) -> list[Corner]:
    return [
        Corner(k, m, d)
        for k in range(1, N + 1)
        for m in range(1, N + 1)
        for d in range(1, N - max(k, m) + 1)
    ]


def _cell(N: int, x: int, y: int) -> int:
    return (x - 1) * N + (y - 1)


def _triple_masks(N: int) -> list[int]:
    out = []
    for c in corner_triples(N):
        a, b, e = (_cell(N, x, y) for x, y in c.points())
        out.append((1 << a) | (1 << b) | (1 << e))
    return out


def _grid_from_bits(N: int, bits: int) -> GridSubset:
    mask = np.zeros(N * N, dtype=bool)
    for i in range(N * N):
        if bits >> i & 1:
            mask[i] = True
    return GridSubset(N, mask.reshape(N, N))


# ---------------------------------------------------------------------------
# exact maxima


class ExactResult(NamedTuple):
    size: int
    witness: GridSubset
    optimal: bool
    nodes: int = 0


def max_corner_free_exhaustive(N: int, chunk: int = 1 << 20) -> ExactResult:
    """Enumerate every subset mask of ``[1,N]^2``; first maximal mask wins."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > EXHAUSTIVE_MAX_SIDE:
        raise ValueError(f"exhaustive enumeration limited to N <= {EXHAUSTIVE_MAX_SIDE}")
    cells = N * N
    tmasks = np.array(_triple_masks(N), dtype=np.uint32)
    total = 1 << cells
    best_size, best_mask = -1, 0
    for start in range(0, total, chunk):
        masks = np.arange(start, min(total, start + chunk), dtype=np.uint32)
        bad = np.zeros(masks.shape, dtype=bool)
        for t in tmasks:
            bad |= (masks & t) == t
        counts = np.where(bad, -1, np.bitwise_count(masks).astype(np.int64))
        i = int(np.argmax(counts))
        if counts[i] > best_size:
            best_size, best_mask = int(counts[i]), int(masks[i])
    return ExactResult(best_size, _grid_from_bits(N, best_mask), True, total)


def _packing_bound(edges: list[int]) -> Fraction:
    """Greedy fractional packing of residual edges: a lower bound on any hitting set."""
    cap: dict[int, Fraction] = {}
    total = Fraction(0)
    for e in sorted(edges, key=lambda m: (m.bit_count(), m)):
        verts = [i for i in range(e.bit_length()) if e >> i & 1]
        y = min(cap.get(v, Fraction(1)) for v in verts)
        if y <= 0:
            continue
        for v in verts:
            cap[v] = cap.get(v, Fraction(1)) - y
        total += y
    return total


def relaxation_upper_bound(N: int) -> int:
    """Root bound ``N^2 - ceil(packing)`` for the corner-free maximum."""
    return N * N - math.ceil(_packing_bound(_triple_masks(N)))


def _greedy_corner_free(N: int, order: list[int], triples_of: list[list[int]]) -> int:
    chosen = 0
    for c in order:
        trial = chosen | (1 << c)
        if all((trial & t) != t for t in triples_of[c]):
            chosen = trial
    return chosen


def max_corner_free_bnb(N: int, budget: int = DEFAULT_NODE_BUDGET) -> ExactResult:
    """Depth-first branch and bound over cells in row-major order, include-first.

    The bound at each node is ``|in| + |undecided| - packing`` where the packing
    runs over the undecided parts of corner triples not yet broken by an
    excluded cell.  If ``budget`` nodes are spent the incumbent is returned with
    ``optimal=False``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    cells = N * N
    tmasks = _triple_masks(N)
    triples_of: list[list[int]] = [[] for _ in range(cells)]
    for t in tmasks:
        for i in range(cells):
            if t >> i & 1:
                triples_of[i].append(t)
    order = list(range(cells))
    full = (1 << cells) - 1

    best_bits = _greedy_corner_free(N, order, triples_of)
    best_size = best_bits.bit_count()
    nodes = 0
    exhausted = False

    def bound(inc: int, exc: int, depth: int) -> int:
        undecided = full & ~inc & ~exc
        residual = []
        for t in tmasks:
            if t & exc:
                continue
            rest = t & undecided
            if rest:
                residual.append(rest)
        lb = _packing_bound(residual) if residual else 0
        return inc.bit_count() + undecided.bit_count() - math.ceil(lb)

    # explicit stack: (depth, inc, exc)
    stack = [(0, 0, 0)]
    while stack:
        depth, inc, exc = stack.pop()
        nodes += 1
        if nodes > budget:
            exhausted = True
            break
        if depth == cells:
            size = inc.bit_count()
            if size > best_size:
                best_size, best_bits = size, inc
            continue
        if bound(inc, exc, depth) <= best_size:
            continue
        c = order[depth]
        with_c = inc | (1 << c)
        # push exclude first so include is explored first
        stack.append((depth + 1, inc, exc | (1 << c)))
        if all((with_c & t) != t for t in triples_of[c]):
            stack.append((depth + 1, with_c, exc))
    return ExactResult(best_size, _grid_from_bits(N, best_bits), not exhausted, nodes)


def max_corner_free_exact(N: int, budget: int = DEFAULT_NODE_BUDGET) -> ExactResult:
    if N <= EXHAUSTIVE_MAX_SIDE:
        return max_corner_free_exhaustive(N)
    return max_corner_free_bnb(N, budget)


# ---------------------------------------------------------------------------
# 3-term progressions


def has_ap3(members: Iterable[int]) -> bool:
    s = sorted(set(members))
    present = set(s)
    for i, a in enumerate(s):
        for b in s[i + 1 :]:
            if 2 * b - a in present:
                return True
    return False


def _ap3_bnb(n: int, window_bound: list[int]) -> list[int]:
    best: list[int] = [1]
    chosen: list[int] = []
    chosen_set: set[int] = set()

    def extend(x: int) -> None:
        nonlocal best
        if len(chosen) > len(best):
            best = list(chosen)
        if x > n or len(chosen) + window_bound[n - x + 1] <= len(best):
            return
        if all(2 * c - x not in chosen_set for c in chosen):
            chosen.append(x)
            chosen_set.add(x)
            extend(x + 1)
            chosen.pop()
            chosen_set.discard(x)
        extend(x + 1)

    extend(1)
    return best


def max_ap3_free_exact(N: int) -> tuple[int, ApFreeSet]:
    """Maximum AP3-free subset of ``[1, N]`` by include-first branch and bound.

    Solves every prefix length in turn: the optimum for length ``L`` bounds what
    any later window of ``L`` consecutive integers can hold.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    window_bound = [0] * (N + 1)
    best: list[int] = []
    for n in range(1, N + 1):
        window_bound[n] = window_bound[n - 1] + 1
        best = _ap3_bnb(n, window_bound)
        window_bound[n] = len(best)
    return len(best), ApFreeSet(N, frozenset(best))


# ---------------------------------------------------------------------------
# Behrend-type constructions


@functools.lru_cache(maxsize=None)
def _digit_sets(base: int, max_digit: int, ndigits: int) -> dict[int, tuple[int, ...]]:
    """Numbers with ``ndigits`` base-``base`` digits in ``[0, max_digit]``, keyed by squared norm."""
    shells: dict[int, list[int]] = {}
    for digits in itertools.product(range(max_digit + 1), repeat=ndigits):
        value = 0
        for dgt in reversed(digits):
            value = value * base + dgt
        shells.setdefault(sum(dgt * dgt for dgt in digits), []).append(value)
    return {k: tuple(v) for k, v in shells.items()}


def _best_window(values: list[int], N: int) -> list[int]:
    vals = sorted(values)
    best_lo, best_count = 0, 0
    j = 0
    for i, lo in enumerate(vals):
        while j < len(vals) and vals[j] <= lo + N - 1:
            j += 1
        if j - i > best_count:
            best_lo, best_count = i, j - i
    lo = vals[best_lo] if vals else 0
    return [v - lo + 1 for v in vals[best_lo : best_lo + best_count]]


def behrend_set(N: int, max_base: int = 32, max_cube: int = 20_000) -> ApFreeSet:
    """Largest sphere-shell set over a small grid of digit parameters.

    Digits are restricted to ``[0, m]`` with ``2m < base`` so that ``x + z = 2y``
    holds digitwise without carries; a sphere of digit vectors then contains no
    midpoint triple.  With ``m = 1`` the whole digit cube is used.  Each candidate
    is translated into ``[1, N]`` by the best sliding window.
    """
    if N < 2:
        raise ValueError("N must be >= 2")
    best = [1, 2]
    for base in range(3, min(N + 1, max_base) + 1):
        for max_digit in range(1, (base - 1) // 2 + 1):
            ndigits = 1
            while True:
                cube = (max_digit + 1) ** ndigits
                if cube > max_cube:
                    break
                span = max_digit * sum(base**i for i in range(ndigits))
                shells = _digit_sets(base, max_digit, ndigits)
                candidates = list(shells.values())
                if max_digit == 1:
                    candidates.append(tuple(v for vs in shells.values() for v in vs))
                for cand in candidates:
                    if len(cand) <= len(best):
                        continue
                    window = _best_window(cand, N)
                    if len(window) > len(best):
                        best = window
                if span >= 4 * N:
                    break
                ndigits += 1
    result = ApFreeSet(N, frozenset(best))
    if has_ap3(result.members):
        raise AssertionError("Behrend construction produced a 3-AP")
    return result


def lift_ap3_to_corner_free(B: ApFreeSet | Iterable[int], N: int) -> GridSubset:
    """``{(x, y) in [1,N]^2 : x + 2y in B}``; a corner maps to a 3-AP of sums."""
    members = B.members if isinstance(B, ApFreeSet) else frozenset(B)
    if any(not 1 <= b <= 3 * N for b in members):
        raise ValueError("B must lie in [1, 3N]")
    xs = np.arange(1, N + 1)
    sums = xs[:, None] + 2 * xs[None, :]
    lookup = np.zeros(3 * N + 1, dtype=bool)
    lookup[list(members)] = True
    return GridSubset(N, lookup[sums])


def lift_count(B: Iterable[int], N: int) -> int:
    """Number of grid points whose ``x + 2y`` lands in ``B`` (counted per value)."""
    total = 0
    for b in B:
        # y ranges over values with 1 <= b - 2y <= N
        lo = max(1, -((N - b) // 2))  # ceil((b - N) / 2)
        hi = min(N, (b - 1) // 2)
        total += max(0, hi - lo + 1)
    return total


# ---------------------------------------------------------------------------
# density bounds


def log_star(N: int) -> int:
    """Largest ``k`` with ``log_[k] N >= 2`` (natural logs); 0 if ``log N < 2``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    k = 0
    value = math.log(N)  # exact for arbitrarily large ints
    while value >= 2:
        k += 1
        value = math.log(value)
    return k


def vu_raw(k: int) -> float:
    return 100.0 * k ** -0.25


def vu_upper_bound(N: int) -> float:
    """``min(1, 100 / log_*(N)^(1/4))``; raises when ``log_*(N) = 0``."""
    k = log_star(N)
    if k == 0:
        raise CertificateUnavailable(f"log_*({N}) = 0: Vu bound unavailable")
    return min(1.0, vu_raw(k))


@functools.lru_cache(maxsize=None)
def _exact_count(t: int) -> int:
    return max_corner_free_exhaustive(t).size


@functools.lru_cache(maxsize=None)
def upper_count(t: int) -> int:
    """Upper bound on the largest corner-free subset of ``[1,t]^2``.

    Exact up to the exhaustive range, then the packing relaxation up to
    ``RELAXATION_MAX_SIDE``.  Larger sides also get block bounds from every base
    ``b`` in between: the grid holds ``(t // b)^2`` disjoint translated ``b x b``
    blocks, each meeting a corner-free set in at most ``upper_count(b)`` cells,
    and the leftover strip is counted whole.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if t <= EXHAUSTIVE_MAX_SIDE:
        return _exact_count(t)
    best = relaxation_upper_bound(t) if t <= RELAXATION_MAX_SIDE else t * t
    for b in range(EXHAUSTIVE_MAX_SIDE, min(t - 1, RELAXATION_MAX_SIDE) + 1):
        q = t // b
        best = min(best, q * q * upper_count(b) + t * t - (q * b) ** 2)
    return best


def _vu_fraction(t: int) -> Fraction:
    if log_star(t) == 0:
        return Fraction(1)
    # rounded up so the fraction never undercuts the float bound
    return min(Fraction(1), Fraction(math.ceil(vu_upper_bound(t) * 10**9), 10**9))


@functools.lru_cache(maxsize=256)
def bracket_L(t: int, budget: int = BRACKET_NODE_BUDGET) -> DensityCertificate:
    """Non-exhaustive bracket for ``L(t)``: Behrend lift below, B&B / relaxation / Vu above."""
    if t < 1:
        raise ValueError("t must be >= 1")
    area = t * t
    if t == 1:
        return DensityCertificate(1, Fraction(1), Fraction(1), "trivial")
    lift = lift_ap3_to_corner_free(behrend_set(3 * t), t)
    lower = len(lift)
    upper = upper_count(t)
    provenance = "behrend-lift"
    if budget > 0 and t <= BRACKET_BNB_MAX_SIDE:
        res = max_corner_free_bnb(t, budget)
        lower = max(lower, res.size)
        if res.optimal:
            upper = res.size
            provenance = "branch-and-bound"
    up = min(Fraction(upper, area), _vu_fraction(t), Fraction(1))
    return DensityCertificate(t, Fraction(lower, area), up, provenance)


def certified_L(t: int, mode: str = "best-available", budget: int = BRACKET_NODE_BUDGET) -> DensityCertificate:
    if t < 1:
        raise ValueError("t must be >= 1")
    if mode not in ("exact-required", "best-available"):
        raise ValueError(f"unknown mode {mode!r}")
    if t <= EXHAUSTIVE_MAX_SIDE:
        value = Fraction(_exact_count(t), t * t)
        return DensityCertificate(t, value, value, "exact")
    cert = bracket_L(t, budget)
    if mode == "exact-required" and not cert.is_exact:
        raise CertificateUnavailable(f"no optimality certificate for t={t} within budget {budget}")
    return cert


_L_CACHE: dict[tuple[int, int], DensityCertificate] = {}


def L_table(max_t: int, budget: int = 0) -> dict[int, DensityCertificate]:
    """Certificates for ``t = 1..max_t`` (cached); brackets beyond the exhaustive range."""
    out = {}
    for t in range(1, max_t + 1):
        key = (t, budget)
        if key not in _L_CACHE:
            _L_CACHE[key] = certified_L(t, budget=budget)
        out[t] = _L_CACHE[key]
    return out
