"""Stieltjes integrals of monotone functions of the scale variable.

Integrals are taken over ``(t, 1]`` against the Lebesgue-Stieltjes measure of a
right-continuous nondecreasing integrator ``g``, so a jump of ``g`` at ``c``
contributes ``f(c) * (g(c) - g(c-))`` when ``t < c``.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence, Union

from ..spaces import DimensionFunction, PowerFunction


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function: ``values[i]`` on ``[breaks[i], breaks[i+1])``.

    The first value extends to the left of ``breaks[0]`` and the last to the right.
    """

    breaks: tuple
    values: tuple

    def __post_init__(self):
        if len(self.breaks) != len(self.values) or not self.breaks:
            raise ValueError("breaks and values must be non-empty and of equal length")
        if any(b <= a for a, b in zip(self.breaks, self.breaks[1:])):
            raise ValueError("breaks must be strictly increasing")

    def __call__(self, x):
        i = bisect.bisect_right(self.breaks, x) - 1
        return self.values[max(i, 0)]

    def is_nonincreasing(self) -> bool:
        return all(b <= a for a, b in zip(self.values, self.values[1:]))

    def is_nondecreasing(self) -> bool:
        return all(b >= a for a, b in zip(self.values, self.values[1:]))

    def jumps(self) -> list[tuple]:
        return [(c, b - a) for c, a, b in zip(self.breaks[1:], self.values, self.values[1:]) if b != a]


class Integrator:
    """Nondecreasing bounded ``g`` on ``[0, 1]``."""

    continuous = True

    def __call__(self, x):
        raise NotImplementedError

    def jumps(self) -> list[tuple]:
        return []

    def array(self, xs):
        import numpy as np

        return np.array([float(self(float(x))) for x in np.ravel(xs)]).reshape(np.shape(xs))


class IdentityIntegrator(Integrator):
    def __call__(self, x):
        return x

    def array(self, xs):
        return xs

    def __repr__(self) -> str:
        return "g(e)=e"


@dataclass(frozen=True)
class FunctionIntegrator(Integrator):
    """Continuous integrator built from a dimension function (``g = h``)."""

    h: DimensionFunction

    def __call__(self, x):
        return self.h(x)

    def array(self, xs):
        import numpy as np

        if isinstance(self.h, PowerFunction):
            return np.power(xs, float(self.h.alpha))
        return np.interp(xs, [float(v) for v in self.h.xs], [float(v) for v in self.h.ys])

    def __repr__(self) -> str:
        return f"g=h({self.h})"


@dataclass(frozen=True)
class StepIntegrator(Integrator):
    step: StepFunction
    continuous = False

    def __post_init__(self):
        if not self.step.is_nondecreasing():
            raise ValueError("integrator must be nondecreasing")

    def __call__(self, x):
        return self.step(x)

    def jumps(self) -> list[tuple]:
        return self.step.jumps()

    def array(self, xs):
        import numpy as np

        idx = np.searchsorted(np.array([float(b) for b in self.step.breaks]), xs, side="right") - 1
        vals = np.array([float(v) for v in self.step.values])
        return vals[np.clip(idx, 0, None)]

    def __repr__(self) -> str:
        return f"g=step{list(zip(map(str, self.step.breaks), map(str, self.step.values)))}"


Integrand = Union[StepFunction, Callable]


@dataclass(frozen=True)
class StieltjesSpec:
    integrand: Integrand
    g: Integrator
    lower: object
    upper: object = 1


@dataclass(frozen=True)
class StieltjesResult:
    value: object
    lower: object
    upper: object
    exact: bool


def _check_monotone_callable(f: Callable, a, b, probes: int = 64) -> int:
    xs = [a + (b - a) * Fraction(i, probes) for i in range(probes + 1)]
    vals = [f(x) for x in xs]
    if all(v2 <= v1 for v1, v2 in zip(vals, vals[1:])):
        return -1
    if all(v2 >= v1 for v1, v2 in zip(vals, vals[1:])):
        return 1
    raise ValueError("integrand is not monotone")


def _step_continuous(f: StepFunction, g: Integrator, a, b):
    cuts = [a] + [c for c in f.breaks if a < c < b] + [b]
    total = 0
    for lo, hi in zip(cuts, cuts[1:]):
        total += f(lo) * (g(hi) - g(lo))
    return total


def _jump_sum(f: Callable, g: Integrator, a, b):
    return sum((f(c) * size for c, size in g.jumps() if a < c <= b), 0)


def stieltjes_integral(spec: StieltjesSpec, tol: float = 1e-9, max_pieces: int = 1 << 20) -> StieltjesResult:
    f, g, a, b = spec.integrand, spec.g, spec.lower, spec.upper
    if a > b:
        raise ValueError("lower limit exceeds upper limit")
    if isinstance(f, StepFunction):
        if not (f.is_nonincreasing() or f.is_nondecreasing()):
            raise ValueError("integrand is not monotone")
    else:
        _check_monotone_callable(f, a, b)
    if a == b:
        return StieltjesResult(0, 0, 0, True)
    if not g.continuous:
        v = _jump_sum(f, g, a, b)
        return StieltjesResult(v, v, v, True)
    if isinstance(f, StepFunction):
        v = _step_continuous(f, g, a, b)
        return StieltjesResult(v, v, v, True)
    # Darboux-Stieltjes bracket on uniform partitions, in floats since the result is
    # not exact anyway; monotone f has its extrema at the endpoints of each piece
    a_f, b_f = float(a), float(b)
    pieces = 16
    xs = [a_f + (b_f - a_f) * i / pieces for i in range(pieces + 1)]
    fx = [float(f(x)) for x in xs]
    gx = [float(g(x)) for x in xs]
    while True:
        up = lo = 0.0
        for i in range(pieces):
            dg = gx[i + 1] - gx[i]
            up += max(fx[i], fx[i + 1]) * dg
            lo += min(fx[i], fx[i + 1]) * dg
        if up - lo < tol or pieces >= max_pieces:
            return StieltjesResult((up + lo) / 2, lo, up, False)
        # halve every piece, evaluating only the new midpoints
        mids = [a_f + (b_f - a_f) * (2 * i + 1) / (2 * pieces) for i in range(pieces)]
        fm = [float(f(x)) for x in mids]
        gm = [float(g(x)) for x in mids]
        fx = [v for pair in zip(fx, fm) for v in pair] + [fx[-1]]
        gx = [v for pair in zip(gx, gm) for v in pair] + [gx[-1]]
        pieces *= 2


def tail_integrals(f: StepFunction, g: Integrator, points: Sequence, top=1) -> dict:
    """``{t: integral of f dg over (t, top]}`` for every ``t`` in ``points`` (single pass)."""
    pts = sorted(set(points))
    cuts = sorted(set(pts) | {c for c in f.breaks if pts and pts[0] < c < top} | {top})
    if not g.continuous:
        jumps = sorted(g.jumps())
    out = {}
    acc = 0
    # walk downward from the top
    j = len(jumps) - 1 if not g.continuous else -1
    for lo, hi in reversed(list(zip(cuts, cuts[1:]))):
        if g.continuous:
            acc += f(lo) * (g(hi) - g(lo))
        else:
            while j >= 0 and jumps[j][0] > lo:
                c, size = jumps[j]
                if c <= top:
                    acc += f(c) * size
                j -= 1
        out[lo] = acc
    out[top] = 0
    return {t: out[t] for t in pts}
