"""Measure-preserving maps, commuting pairs and recurrence constants.

Torus maps are affine, ``x -> A x + b (mod 1)`` with an integer matrix ``A`` of
non-zero determinant (so Lebesgue measure is preserved).  Irrational shifts are
carried as dyadic rational approximations with a tracked error bound; every
orbit point computed from them is exact arithmetic on the approximation, and
the accumulated error is checked against a precision budget.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Sequence, Union

import numpy as np

from .spaces import Circle, Cyclic, DimensionFunction, SpaceSpec, distance

DEFAULT_BITS = 256
DEFAULT_TOLERANCE = Fraction(1, 2**64)


class PrecisionError(ArithmeticError):
    pass


class NotCommuting(ValueError):
    pass


class InsufficientDepth(ValueError):
    pass


class MissingCertificate(KeyError):
    pass


# ---------------------------------------------------------------------------
# real parameters and continued fractions


def cf_of_fraction(x: Fraction) -> list[int]:
    x = Fraction(x)
    terms = []
    p, q = x.numerator, x.denominator
    while q:
        a, r = divmod(p, q)
        terms.append(a)
        p, q = q, r
    return terms


def quadratic_cf(P: int, D: int, Q: int, depth: int) -> list[int]:
    """Partial quotients of ``(P + sqrt(D)) / Q`` by exact integer recursion."""
    r = math.isqrt(D)
    if r * r == D:
        raise ValueError("D must not be a perfect square")
    if (D - P * P) % Q:
        P, D, Q = P * abs(Q), D * Q * Q, Q * abs(Q)
        r = math.isqrt(D)
    terms = []
    for _ in range(depth):
        a = (P + r) // Q if Q > 0 else (P + r + 1) // Q
        terms.append(a)
        P = a * Q - P
        Q = (D - P * P) // Q
    return terms


def convergents(terms: Sequence[int]) -> Iterator[tuple[int, int]]:
    p0, q0, p1, q1 = 1, 0, terms[0], 1
    yield p1, q1
    for a in terms[1:]:
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        yield p1, q1


@dataclass(frozen=True)
class RealParam:
    """A real number known to ``approx`` within ``err``, with its continued fraction.

    ``cf`` returns the first ``depth`` partial quotients; ``terminal`` marks a
    finite expansion (an exact rational).
    """

    approx: Fraction
    err: Fraction
    label: str
    cf_terms: Callable[[int], list[int]] = field(compare=False, repr=False)
    terminal: bool = False

    @classmethod
    def rational(cls, x) -> "RealParam":
        x = Fraction(x)
        terms = cf_of_fraction(x)
        return cls(x, Fraction(0), str(x), lambda depth: terms[:depth], True)

    @classmethod
    def quadratic(cls, P: int, D: int, Q: int, bits: int = DEFAULT_BITS, label: str | None = None) -> "RealParam":
        scale = 1 << bits
        root = math.isqrt(D * scale * scale)  # floor(sqrt(D) * 2^bits)
        num = P * scale + root
        approx = Fraction(round(Fraction(num, Q)), scale)
        err = Fraction(2, scale)
        return cls(approx, err, label or f"({P}+sqrt({D}))/{Q}", lambda depth: quadratic_cf(P, D, Q, depth))

    @classmethod
    def golden(cls, bits: int = DEFAULT_BITS) -> "RealParam":
        return cls.quadratic(-1, 5, 2, bits, "(sqrt5-1)/2")

    @classmethod
    def sqrt2_minus_1(cls, bits: int = DEFAULT_BITS) -> "RealParam":
        return cls.quadratic(-1, 2, 1, bits, "sqrt2-1")

    @classmethod
    def from_cf(cls, terms: Sequence[int], terminal: bool = True) -> "RealParam":
        """Value of a continued fraction prefix; non-terminal prefixes carry their truncation error."""
        terms = list(terms)
        convs = list(convergents(terms))
        p, q = convs[-1]
        if terminal:
            return cls(Fraction(p, q), Fraction(0), f"cf{terms}", lambda depth: terms[:depth], True)
        q_prev = convs[-2][1] if len(convs) > 1 else 1
        return cls(Fraction(p, q), Fraction(1, q * q_prev) if q_prev else Fraction(1),
                   f"cf{terms}...", lambda depth: terms[:depth], False)

    def __float__(self) -> float:
        return float(self.approx)

    @property
    def exact(self) -> bool:
        return self.err == 0

    def to_json(self) -> dict:
        if self.exact:
            return {"rational": str(self.approx)}
        return {"label": self.label, "approx": str(self.approx), "err": str(self.err)}


Shift = Union[Fraction, RealParam]


def _param(v) -> RealParam:
    if isinstance(v, RealParam):
        return v
    return RealParam.rational(Fraction(v))


def parse_real(text: str, bits: int = DEFAULT_BITS) -> RealParam:
    """``golden``, ``sqrt2-1``, ``sqrt:<D>`` (fractional part), ``cf:a0,a1,...`` or a rational."""
    text = text.strip()
    if text == "golden":
        return RealParam.golden(bits)
    if text == "sqrt2-1":
        return RealParam.sqrt2_minus_1(bits)
    if text.startswith("sqrt:"):
        D = int(text[5:])
        return RealParam.quadratic(-math.isqrt(D), D, 1, bits, f"frac(sqrt{D})")
    if text.startswith("cf:"):
        return RealParam.from_cf([int(t) for t in text[3:].split(",")])
    # labels written by RealParam.to_json
    if text == "(sqrt5-1)/2":
        return RealParam.golden(bits)
    m = re.fullmatch(r"frac\(sqrt(\d+)\)", text)
    if m:
        return parse_real(f"sqrt:{m.group(1)}", bits)
    m = re.fullmatch(r"\((-?\d+)\+sqrt\((\d+)\)\)/(-?\d+)", text)
    if m:
        return RealParam.quadratic(int(m.group(1)), int(m.group(2)), int(m.group(3)), bits)
    m = re.fullmatch(r"cf\[([\d, ]*)\](\.\.\.)?", text)
    if m:
        return RealParam.from_cf([int(t) for t in m.group(1).split(",")], terminal=not m.group(2))
    return RealParam.rational(Fraction(text))


# ---------------------------------------------------------------------------
# maps


class MapSpec:
    space: SpaceSpec

    def apply(self, x: tuple) -> tuple:
        raise NotImplementedError

    def apply_array(self, xs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inverse(self) -> "MapSpec":
        raise NotImplementedError(f"{type(self).__name__} has no inverse")

    def step_error(self) -> Fraction:
        """Error added to each coordinate per step by approximated parameters."""
        return Fraction(0)

    def expansion(self) -> int:
        """Sup-norm Lipschitz constant of one step (before reduction mod 1)."""
        return 1

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class CyclicShift(MapSpec):
    order: int
    step: int

    @property
    def space(self) -> SpaceSpec:
        return SpaceSpec.cyclic(self.order)

    def apply(self, x: tuple) -> tuple:
        return ((x[0] + self.step) % self.order,)

    def apply_array(self, xs: np.ndarray) -> np.ndarray:
        return np.mod(xs + self.step, self.order)

    def inverse(self) -> "CyclicShift":
        return CyclicShift(self.order, (-self.step) % self.order)

    def to_json(self) -> dict:
        return {"kind": "shift", "order": self.order, "step": self.step}


def _matmul(A, B):
    return tuple(tuple(sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]))) for i in range(len(A)))


def _det(A) -> int:
    n = len(A)
    if n == 1:
        return A[0][0]
    return sum((-1) ** j * A[0][j] * _det(tuple(row[:j] + row[j + 1 :] for row in A[1:])) for j in range(n))


def _identity(n: int):
    return tuple(tuple(int(i == j) for j in range(n)) for i in range(n))


@dataclass(frozen=True)
class AffineTorusMap(MapSpec):
    matrix: tuple
    shift: tuple
    name: str = "affine"

    def __post_init__(self):
        n = len(self.matrix)
        if any(len(row) != n for row in self.matrix) or len(self.shift) != n:
            raise ValueError("matrix must be square and match the shift length")
        if _det(self.matrix) == 0:
            raise ValueError("singular matrix does not preserve Lebesgue measure")
        object.__setattr__(self, "matrix", tuple(tuple(int(v) for v in row) for row in self.matrix))
        object.__setattr__(self, "shift", tuple(_param(s) for s in self.shift))

    @property
    def space(self) -> SpaceSpec:
        return SpaceSpec.torus(len(self.matrix))

    @property
    def is_translation(self) -> bool:
        return self.matrix == _identity(len(self.matrix))

    def apply(self, x: tuple) -> tuple:
        return tuple(
            (sum(a * c for a, c in zip(row, x)) + s.approx) % 1 for row, s in zip(self.matrix, self.shift)
        )

    def apply_array(self, xs: np.ndarray) -> np.ndarray:
        A = np.array(self.matrix, dtype=float)
        b = np.array([float(s.approx) for s in self.shift])
        return np.mod(xs @ A.T + b, 1.0)

    def inverse(self) -> "AffineTorusMap":
        if abs(_det(self.matrix)) != 1:
            raise NotImplementedError("only unimodular affine maps are invertible")
        n = len(self.matrix)
        inv = _integer_inverse(self.matrix)
        shift = []
        for row in inv:
            s = sum((a * self.shift[j].approx for j, a in enumerate(row)), Fraction(0))
            err = sum((abs(a) * self.shift[j].err for j, a in enumerate(row)), Fraction(0))
            shift.append(RealParam((-s) % 1, err, "inverse", lambda depth: [], err == 0) if err else (-s) % 1)
        return AffineTorusMap(inv, tuple(shift), f"{self.name}^-1")

    def step_error(self) -> Fraction:
        return max(s.err for s in self.shift)

    def expansion(self) -> int:
        return max(sum(abs(a) for a in row) for row in self.matrix)

    def to_json(self) -> dict:
        return {
            "kind": "affine",
            "name": self.name,
            "matrix": [list(r) for r in self.matrix],
            "shift": [s.to_json() for s in self.shift],
        }


def _integer_inverse(A):
    n = len(A)
    det = _det(A)
    adj = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = tuple(row[:j] + row[j + 1 :] for k, row in enumerate(A) if k != i)
            cof = (-1) ** (i + j) * (_det(minor) if minor else 1)
            adj[j][i] = cof
    return tuple(tuple(v // det for v in row) for row in adj)


def rotation(alpha) -> AffineTorusMap:
    if isinstance(alpha, (list, tuple)):
        return AffineTorusMap(_identity(len(alpha)), tuple(alpha), "rotation")
    return AffineTorusMap(((1,),), (alpha,), "rotation")


def doubling() -> AffineTorusMap:
    return AffineTorusMap(((2,),), (0,), "doubling")


def cat_map() -> AffineTorusMap:
    return AffineTorusMap(((2, 1), (1, 1)), (0, 0), "cat")


def identity(space: SpaceSpec) -> MapSpec:
    if space.is_torus:
        return AffineTorusMap(_identity(space.dim), (0,) * space.dim, "identity")
    return ProductMap(tuple(CyclicShift(f.order, 0) for f in space.factors))


@dataclass(frozen=True)
class ProductMap(MapSpec):
    """Coordinatewise product of maps; each factor map acts on its own block of coordinates."""

    parts: tuple

    @property
    def space(self) -> SpaceSpec:
        return SpaceSpec.product(*(p.space for p in self.parts))

    def _slices(self):
        start = 0
        for p in self.parts:
            yield p, slice(start, start + p.space.dim)
            start += p.space.dim

    def apply(self, x: tuple) -> tuple:
        out: list = []
        for p, sl in self._slices():
            out.extend(p.apply(x[sl]))
        return tuple(out)

    def apply_array(self, xs: np.ndarray) -> np.ndarray:
        out = np.empty_like(xs)
        for p, sl in self._slices():
            out[:, sl] = p.apply_array(xs[:, sl])
        return out

    def inverse(self) -> "ProductMap":
        return ProductMap(tuple(p.inverse() for p in self.parts))

    def step_error(self) -> Fraction:
        return max(p.step_error() for p in self.parts)

    def expansion(self) -> int:
        return max(p.expansion() for p in self.parts)

    def to_json(self) -> dict:
        return {"kind": "product", "parts": [p.to_json() for p in self.parts]}


def map_from_json(data: dict) -> MapSpec:
    kind = data["kind"]
    if kind == "shift":
        return CyclicShift(int(data["order"]), int(data["step"]))
    if kind == "product":
        return ProductMap(tuple(map_from_json(p) for p in data["parts"]))
    if kind == "affine":
        shifts = []
        for s in data["shift"]:
            if "rational" in s:
                shifts.append(Fraction(s["rational"]))
            else:
                shifts.append(parse_real(s["label"]))
        return AffineTorusMap(tuple(tuple(r) for r in data["matrix"]), tuple(shifts), data.get("name", "affine"))
    raise ValueError(f"unknown map kind {kind!r}")


def parse_map(text: str, bits: int = DEFAULT_BITS) -> MapSpec:
    """Short text forms used by the CLI.

    ``rotation:<real>``, ``shift:<M>:<a>``, ``doubling``, ``cat``, ``identity``,
    and ``product:<map>|<map>``.
    """
    if text.startswith("product:"):
        return ProductMap(tuple(parse_map(t, bits) for t in text[8:].split("|")))
    kind, _, arg = text.partition(":")
    if kind == "rotation":
        return rotation(parse_real(arg, bits))
    if kind == "shift":
        M, a = arg.split(":")
        return CyclicShift(int(M), int(a) % int(M))
    if kind == "doubling":
        return doubling()
    if kind == "cat":
        return cat_map()
    if kind == "identity":
        return rotation(Fraction(0))
    raise ValueError(f"unknown map {text!r}")


# ---------------------------------------------------------------------------
# commuting pairs


def _torus_commute(S: AffineTorusMap, R: AffineTorusMap) -> bool:
    if _matmul(S.matrix, R.matrix) != _matmul(R.matrix, S.matrix):
        return False
    if S.is_translation and R.is_translation:
        return True
    if any(not s.exact for s in S.shift + R.shift):
        # A_S b_R + b_S = A_R b_S + b_R must hold for the true parameters; only
        # certified when the inexact shifts cancel identically.
        zero = all(s.approx == 0 and s.exact for s in S.shift + R.shift)
        if not zero:
            raise NotCommuting("cannot certify commutation of affine maps with irrational shifts")
    bS = [s.approx for s in S.shift]
    bR = [s.approx for s in R.shift]
    lhs = [sum(a * v for a, v in zip(row, bR)) + b for row, b in zip(S.matrix, bS)]
    rhs = [sum(a * v for a, v in zip(row, bS)) + b for row, b in zip(R.matrix, bR)]
    return all((l - r) % 1 == 0 for l, r in zip(lhs, rhs))


def commute(S: MapSpec, R: MapSpec) -> bool:
    if S.space != R.space:
        return False
    if S.space.is_finite:
        return all(S.apply(R.apply(x)) == R.apply(S.apply(x)) for x in S.space.points())
    if isinstance(S, AffineTorusMap) and isinstance(R, AffineTorusMap):
        return _torus_commute(S, R)
    if isinstance(S, ProductMap) and isinstance(R, ProductMap) and len(S.parts) == len(R.parts):
        return all(commute(a, b) for a, b in zip(S.parts, R.parts))
    raise NotCommuting(f"cannot decide commutation of {type(S).__name__} and {type(R).__name__}")


@dataclass(frozen=True)
class CommutingPair:
    S: MapSpec
    R: MapSpec

    def __post_init__(self):
        if not commute(self.S, self.R):
            raise NotCommuting("S and R do not commute")

    @property
    def space(self) -> SpaceSpec:
        return self.S.space

    def to_json(self) -> dict:
        return {"S": self.S.to_json(), "R": self.R.to_json()}


# ---------------------------------------------------------------------------
# orbits


def orbit_error_bound(map_: MapSpec, n: int) -> Fraction:
    """Coordinate error after ``n`` steps from an exact start point."""
    e = map_.step_error()
    if e == 0 or n == 0:
        return Fraction(0)
    lam = map_.expansion()
    if lam == 1:
        return n * e
    return e * (lam**n - 1) / (lam - 1)


def _check_precision(map_: MapSpec, n: int, tolerance: Fraction) -> None:
    bound = orbit_error_bound(map_, n)
    if bound > tolerance:
        raise PrecisionError(f"error bound {float(bound):.3g} after {n} steps exceeds budget {float(tolerance):.3g}")


def iterate(map_: MapSpec, x, n: int, tolerance: Fraction = DEFAULT_TOLERANCE) -> tuple:
    if n < 0:
        raise ValueError("n must be >= 0")
    x = map_.space.point(x)
    _check_precision(map_, n, tolerance)
    for _ in range(n):
        x = map_.apply(x)
    return x


def orbit(map_: MapSpec, x, n: int, tolerance: Fraction = DEFAULT_TOLERANCE) -> Iterator[tuple]:
    """Yields ``T^1 x, ..., T^n x``."""
    x = map_.space.point(x)
    _check_precision(map_, n, tolerance)
    for _ in range(n):
        x = map_.apply(x)
        yield x


@dataclass
class RecurrenceProfile:
    N: int
    distances: list
    running_min: list
    error: Fraction = Fraction(0)

    @property
    def value(self):
        return self.running_min[-1]


def _running_min(values: list) -> list:
    out, cur = [], None
    for v in values:
        cur = v if cur is None or v < cur else cur
        out.append(cur)
    return out


def recurrence_profile(map_: MapSpec, x, N: int, tolerance: Fraction = DEFAULT_TOLERANCE) -> RecurrenceProfile:
    if N < 1:
        raise ValueError("N must be >= 1")
    space = map_.space
    x = space.point(x)
    ds = [distance(space, y, x) for y in orbit(map_, x, N, tolerance)]
    # circle factors are scaled by 2 in the metric
    return RecurrenceProfile(N, ds, _running_min(ds), 2 * orbit_error_bound(map_, N))


def recurrence_constant(map_: MapSpec, x, N: int, tolerance: Fraction = DEFAULT_TOLERANCE):
    """``min_{1 <= n <= N} d(T^n x, x)`` in normalized units."""
    return recurrence_profile(map_, x, N, tolerance).value


def pair_distances(pair: CommutingPair, x, N: int, tolerance: Fraction = DEFAULT_TOLERANCE) -> list[tuple]:
    space = pair.space
    x = space.point(x)
    ds = [distance(space, y, x) for y in orbit(pair.S, x, N, tolerance)]
    dr = [distance(space, y, x) for y in orbit(pair.R, x, N, tolerance)]
    return list(zip(ds, dr))


def simultaneous_recurrence(pair: CommutingPair, x, N: int, tolerance: Fraction = DEFAULT_TOLERANCE):
    """``min_{1 <= n <= N} max(d(S^n x, x), d(R^n x, x))``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return min(max(a, b) for a, b in pair_distances(pair, x, N, tolerance))


# ---------------------------------------------------------------------------
# truncated liminf profiles


def _ladder(values) -> list[int]:
    return sorted({int(v) for v in (values if isinstance(values, Iterable) else [values])})


@dataclass(frozen=True)
class ProfileRow:
    K: int
    N: int
    value: object


def _window_minima(weights: list, Ks: list[int], Ns: list[int]) -> list[tuple[int, int, object]]:
    rows = []
    for N in Ns:
        for K in Ks:
            if not 1 <= K <= N:
                continue
            rows.append((K, N, min(weights[K - 1 : N])))
    return rows


def weighted_liminf_profile(map_: MapSpec, x, h: DimensionFunction, N, K_ladder,
                            tolerance: Fraction = DEFAULT_TOLERANCE) -> list[ProfileRow]:
    """``m(K, N) = min{ n * h(d(T^n x, x)) : K <= n <= N }`` over ladders of ``K`` and ``N``.

    Truncated minima only; these do not certify the ``liminf``.
    """
    Ns, Ks = _ladder(N), _ladder(K_ladder)
    prof = recurrence_profile(map_, x, max(Ns), tolerance)
    weights = [n * h(d) for n, d in enumerate(prof.distances, start=1)]
    return [ProfileRow(K, n, v) for K, n, v in _window_minima(weights, Ks, Ns)]


@dataclass(frozen=True)
class PairProfileRow:
    K: int
    N: int
    value_lowerL: object
    value_upperL: object


def pair_weighted_profile(pair: CommutingPair, x, h: DimensionFunction, N, K_ladder, L_source: dict,
                          tolerance: Fraction = DEFAULT_TOLERANCE) -> list[PairProfileRow]:
    """``min{ max(h(d(S^n x,x)), h(d(R^n x,x))) / L(n) : K <= n <= N }`` for both ends of each L bracket.

    ``value_lowerL`` divides by the lower end of ``L(n)`` and is therefore the larger profile.
    """
    Ns, Ks = _ladder(N), _ladder(K_ladder)
    top = max(Ns)
    missing = [n for n in range(1, top + 1) if n not in L_source]
    if missing:
        raise MissingCertificate(f"no L(n) certificate for n = {missing[:5]}{'...' if len(missing) > 5 else ''}")
    dists = pair_distances(pair, x, top, tolerance)
    base = [max(h(a), h(b)) for a, b in dists]
    lower_w = [b / _as_number(L_source[n].lower, b) for n, b in enumerate(base, start=1)]
    upper_w = [b / _as_number(L_source[n].upper, b) for n, b in enumerate(base, start=1)]
    lo_rows = _window_minima(lower_w, Ks, Ns)
    up_rows = _window_minima(upper_w, Ks, Ns)
    return [PairProfileRow(K, n, a, b) for (K, n, a), (_, _, b) in zip(lo_rows, up_rows)]


def _as_number(L: Fraction, like):
    return L if isinstance(like, Fraction) else float(L)


# ---------------------------------------------------------------------------
# rotation oracle


@dataclass(frozen=True)
class RotationOracle:
    denominators: tuple[int, ...]
    argmin: int
    min_norm: Fraction
    error: Fraction

    @property
    def min_distance(self) -> Fraction:
        """Normalized distance ``2 * ||q alpha||``."""
        return 2 * self.min_norm


def _norm(v: Fraction) -> Fraction:
    r = v % 1
    return min(r, 1 - r)


def rotation_oracle(alpha, N: int, depth: int = 200) -> RotationOracle:
    """Best-approximation denominators ``<= N`` and ``min_{1<=n<=N} ||n alpha||``.

    The minimum is attained at the largest convergent denominator ``<= N``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    a = _param(alpha) if not isinstance(alpha, (list, tuple)) else RealParam.from_cf(alpha)
    terms = a.cf_terms(depth)
    if not terms:
        raise InsufficientDepth("no continued fraction data")
    dens: list[int] = []
    exceeded = False
    for _, q in convergents(terms):
        if q > N:
            exceeded = True
            break
        if not dens or q != dens[-1]:
            dens.append(q)
    if not exceeded and not a.terminal:
        raise InsufficientDepth(f"expansion of depth {len(terms)} does not reach denominators beyond N={N}")
    q = dens[-1]
    return RotationOracle(tuple(dens), q, _norm(q * a.approx), q * a.err)
