"""Command-line front end.

Exit status: 0 when every check passes, 1 on a violated bound, failed post-check
or golden mismatch, 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import os
import random
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .corners import (
    CertificateUnavailable,
    L_table,
    behrend_set,
    certified_L,
    contains_corner,
    lift_ap3_to_corner_free,
    max_ap3_free_exact,
    max_corner_free_bnb,
    max_corner_free_exact,
    max_corner_free_exhaustive,
)
from .dynamics import (
    CommutingPair,
    CyclicShift,
    InsufficientDepth,
    MissingCertificate,
    NotCommuting,
    PrecisionError,
    RealParam,
    parse_map,
    parse_real,
    recurrence_profile,
    rotation_oracle,
    pair_distances,
    pair_weighted_profile,
    weighted_liminf_profile,
)
from .spaces import (
    DomainError,
    Region,
    SpaceSpec,
    box_counting_premeasure,
    covering_number,
    dimension_function,
)
from .verify import (
    IdentityIntegrator,
    Sampler,
    StepFunction,
    StepIntegrator,
    VerificationReport,
    check_lemma_l_add,
    check_lemma_ll,
    check_theorem_x2,
    check_theorem_x4,
    check_union_multiplicity,
    corner_extraction_demo,
    index_family,
    non_returning_pair,
    report_x1_x3_diagnostic,
    reports_to_csv,
    return_index_set,
    rhs_bound_x2,
    rotation_liminf,
    truncated_profile_integrals,
)
from .verify.stieltjes import FunctionIntegrator

OUT_ENV = "RECURLAB_OUT"
DEFAULT_OUT = "recurlab-out"
CONFIG_SCHEMA = "1"
DEFAULT_GOLDEN = "golden/golden.json"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad arguments or configuration; maps to exit status 2."""


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """Flat ``key = value`` experiment description with a schema version line."""

    command: str
    values: dict = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str, allowed: set[str], command: str) -> "ExperimentConfig":
        values: dict = {}
        schema = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip().replace("-", "_"), value.strip()
            if not sep or not key:
                raise UsageError(f"config line {lineno}: expected 'key = value'")
            if key in values or (key == "schema" and schema is not None):
                raise UsageError(f"config line {lineno}: duplicate key {key!r}")
            if key == "schema":
                schema = value
            elif key == "command":
                if value != command:
                    raise UsageError(f"config is for {value!r}, not {command!r}")
            elif key not in allowed:
                raise UsageError(f"config line {lineno}: unknown key {key!r}")
            else:
                values[key] = value
        if schema is None:
            raise UsageError("config must declare 'schema = 1'")
        if schema != CONFIG_SCHEMA:
            raise UsageError(f"unsupported config schema {schema!r}")
        return cls(command, values)

    def to_text(self) -> str:
        lines = [f"schema = {CONFIG_SCHEMA}", f"command = {self.command}"]
        lines += [f"{k} = {v}" for k, v in sorted(self.values.items())]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# parsing helpers


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from exc
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an integer list: {text!r}") from exc


def parse_region(text: str, space: SpaceSpec) -> Region:
    """``whole``, ``empty``, ``arc:lo,len``, ``box:lo,len;lo,len``, ``points:a,b,c`` or region JSON."""
    text = text.strip()
    if text.startswith("{"):
        region = Region.from_json(json.loads(text))
        if region.space != space:
            raise UsageError(f"region lives on {region.space}, system on {space}")
        return region
    kind, _, arg = text.partition(":")
    if kind == "whole":
        return Region.whole(space)
    if kind == "empty":
        return Region.empty(space)
    if kind == "arc":
        lo, length = (Fraction(v) for v in arg.split(","))
        return Region.arc(lo, length, space)
    if kind == "box":
        comps = [tuple(Fraction(v) for v in part.split(",")) for part in arg.split(";")]
        return Region.box(space, *comps)
    if kind == "points":
        return Region.points(space, [int(v) for v in arg.split(",") if v.strip()])
    raise UsageError(f"unknown region {text!r}")


def parse_g(text: str, h_text: str):
    """``identity``, ``h`` (the dimension function) or ``step:b=v,b=v,...``."""
    if text == "identity":
        return IdentityIntegrator()
    if text == "h":
        h = dimension_function(h_text)
        return FunctionIntegrator(h)
    if text.startswith("step:"):
        pairs = [p.split("=") for p in text[5:].split(",")]
        return StepIntegrator(StepFunction(tuple(Fraction(b) for b, _ in pairs), tuple(Fraction(v) for _, v in pairs)))
    raise UsageError(f"unknown integrator {text!r}")


def _sampler(args) -> Sampler:
    return Sampler(samples=args.samples, seed=args.seed, workers=args.workers,
                   method=getattr(args, "method", "iid"))


def _pair(args) -> CommutingPair:
    return CommutingPair(parse_map(args.s), parse_map(args.r))


# ---------------------------------------------------------------------------
# output


class Output:
    def __init__(self, root: Path, group: str):
        self.dir = root / group
        self.written: list[Path] = []

    def write(self, name: str, text: str) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        path = self.dir / name
        path.write_text(text)
        self.written.append(path)
        return path

    def report(self, name: str, reports: list[VerificationReport], argv: list[str]) -> None:
        body = {"reports": [r.to_json() for r in reports]}
        self.write(f"{name}.json", json.dumps(body, sort_keys=True, indent=2) + "\n")
        self.write(f"{name}.csv", reports_to_csv(reports))
        meta = {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(), "version": __version__, "argv": argv}
        self.write(f"{name}.meta.json", json.dumps(meta, sort_keys=True, indent=2) + "\n")


def _emit_reports(args, name: str, reports: list[VerificationReport]) -> int:
    for r in reports:
        print(r.dumps())
    args.output.report(name, reports, args.argv)
    failed = [r for r in reports if r.verdict == "fail"]
    print(f"{len(reports) - len(failed)}/{len(reports)} checks passed", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# corners


def cmd_corners(args) -> int:
    out = args.output
    if args.action == "solve":
        res = max_corner_free_exact(args.n, args.budget)
        if contains_corner(res.witness):
            print("witness fails the corner scan", file=sys.stderr)
            return EXIT_FAIL
        out.write(f"witness-N{args.n}.txt", res.witness.to_text())
        print(f"N={args.n} size={res.size} optimal={str(res.optimal).lower()} nodes={res.nodes}")
        return EXIT_OK
    if args.action == "bound":
        cert = certified_L(args.n, args.mode, args.budget)
        text = json.dumps(cert.to_json(), sort_keys=True)
        out.write(f"certificate-N{args.n}.json", text + "\n")
        print(text)
        return EXIT_OK
    if args.action == "table":
        rows = ["N,lower,upper,provenance"]
        for n, cert in L_table(args.max, args.budget).items():
            rows.append(f"{n},{cert.lower},{cert.upper},{cert.provenance}")
        text = "\n".join(rows) + "\n"
        out.write(f"L-table-{args.max}.csv", text)
        print(text, end="")
        return EXIT_OK
    if args.action == "lift":
        B = behrend_set(3 * args.n)
        grid = lift_ap3_to_corner_free(B, args.n)
        if contains_corner(grid):
            print("lifted set contains a corner", file=sys.stderr)
            return EXIT_FAIL
        out.write(f"lift-N{args.n}.txt", grid.to_text())
        print(f"N={args.n} ap3_free={len(B.members)} lifted={len(grid)} density={Fraction(len(grid), args.n ** 2)}")
        return EXIT_OK
    raise UsageError(args.action)


# ---------------------------------------------------------------------------
# recur


def _fmt(v) -> str:
    """Short rationals stay exact; long dyadic approximations print as floats."""
    if isinstance(v, Fraction) and v.denominator > 10**6:
        return repr(float(v))
    return str(v)


def _rows_for(N: int, every: int | None) -> list[int]:
    if N <= 1000 and not every:
        return list(range(1, N + 1))
    step = every or max(1, N // 100)
    rows = sorted(set(range(step, N + 1, step)) | {1, N})
    return rows


def cmd_recur(args) -> int:
    out = args.output
    if args.action == "single":
        m = parse_map(args.map)
        x = m.space.point(parse_point(args.x, m.space))
        prof = recurrence_profile(m, x, args.n)
        alpha = _rotation_angle(m)
        lines = ["n,distance,running_min" + (",oracle,match" if alpha is not None else "")]
        mismatches = 0
        for n in _rows_for(args.n, args.every):
            row = f"{n},{_fmt(prof.distances[n - 1])},{_fmt(prof.running_min[n - 1])}"
            if alpha is not None:
                oracle = rotation_oracle(alpha, n).min_distance
                ok = abs(oracle - prof.running_min[n - 1]) <= prof.error
                mismatches += not ok
                row += f",{_fmt(oracle)},{str(ok).lower()}"
            lines.append(row)
        text = "\n".join(lines) + "\n"
        out.write(f"recur-single-N{args.n}.csv", text)
        print(text, end="")
        return EXIT_FAIL if mismatches else EXIT_OK
    if args.action == "pair":
        pair = _pair(args)
        x = pair.space.point(parse_point(args.x, pair.space))
        dists = pair_distances(pair, x, args.n)
        lines, cur = ["n,d_S,d_R,simultaneous_min"], None
        for n, (a, b) in enumerate(dists, start=1):
            v = max(a, b)
            cur = v if cur is None or v < cur else cur
            lines.append(f"{n},{_fmt(a)},{_fmt(b)},{_fmt(cur)}")
        text = "\n".join(lines) + "\n"
        out.write(f"recur-pair-N{args.n}.csv", text)
        print(text, end="")
        return EXIT_OK
    if args.action == "profile":
        h = dimension_function(args.h)
        Ks = args.k_ladder or [1]
        if args.s and args.r:
            pair = _pair(args)
            x = pair.space.point(parse_point(args.x, pair.space))
            rows = pair_weighted_profile(pair, x, h, args.n, Ks, L_table(args.n, 0))
            lines = ["K,N,value_lowerL,value_upperL"] + [f"{r.K},{r.N},{_fmt(r.value_lowerL)},{_fmt(r.value_upperL)}"
                                                      for r in rows]
            bad = [r for r in rows if r.value_upperL > r.value_lowerL]
        else:
            m = parse_map(args.map)
            x = m.space.point(parse_point(args.x, m.space))
            rows = weighted_liminf_profile(m, x, h, args.n, Ks)
            lines = ["K,N,value"] + [f"{r.K},{r.N},{_fmt(r.value)}" for r in rows]
            bad = []
        text = "\n".join(lines) + "\n"
        out.write(f"recur-profile-N{args.n}.csv", text)
        print(text, end="")
        return EXIT_FAIL if bad else EXIT_OK
    raise UsageError(args.action)


def parse_point(text: str, space: SpaceSpec):
    parts = [p for p in text.split(",") if p.strip()]
    vals = [Fraction(p) if f_is_circle else int(p) for p, f_is_circle in
            zip(parts, [not hasattr(f, "order") for f in space.factors])]
    return tuple(vals) if len(vals) > 1 else vals[0]


def _rotation_angle(m):
    from .dynamics import AffineTorusMap

    if isinstance(m, AffineTorusMap) and m.is_translation and m.space.dim == 1:
        return m.shift[0]
    return None


# ---------------------------------------------------------------------------
# verify


def _random_subsets(rng: random.Random, M: int, count: int) -> list[list[int]]:
    return [[x for x in range(M) if rng.random() < rng.choice((0.1, 0.3, 0.5, 0.8))] for _ in range(count)]


def _poincare_suite(args) -> list[VerificationReport]:
    if args.map:
        m = parse_map(args.map)
        A = parse_region(args.region, m.space)
        return [check_lemma_l_add(A, m, t, _sampler(args)) for t in range(1, args.t_max + 1)]
    rng = random.Random(args.seed)
    reports = []
    Z = SpaceSpec.cyclic(args.m)
    for a in range(args.m):
        m = CyclicShift(args.m, a)
        for pts in _random_subsets(rng, args.m, args.trials):
            Y = Region.points(Z, pts)
            reports += [check_lemma_l_add(Y, m, t) for t in range(1, args.t_max + 1)]
    return reports


def _certificate(t: int):
    try:
        return certified_L(t, "exact-required" if t <= 5 else "best-available")
    except CertificateUnavailable as exc:
        raise MissingCertificate(str(exc)) from exc


def _pair_poincare_suite(args) -> list[VerificationReport]:
    L = _certificate(args.t)
    if args.s and args.r:
        pair = _pair(args)
        A = parse_region(args.region, pair.space)
        return [check_lemma_ll(A, pair, args.t, L, _sampler(args))]
    rng = random.Random(args.seed)
    Z = SpaceSpec.cyclic(args.m)
    reports = []
    for a in range(args.m):
        for b in range(args.m):
            pair = CommutingPair(CyclicShift(args.m, a), CyclicShift(args.m, b))
            for pts in _random_subsets(rng, args.m, args.trials):
                reports.append(check_lemma_ll(Region.points(Z, pts), pair, args.t, L))
    return reports


def _union_report(args) -> list[VerificationReport]:
    L = _certificate(args.t)
    Z = SpaceSpec.cyclic(args.m)
    pair = CommutingPair(CyclicShift(args.m, args.a), CyclicShift(args.m, args.b))
    Yt = non_returning_pair(Region.points(Z, args.y), pair, args.t)
    family = index_family(Yt.points, pair, args.t)
    l = math.ceil(args.t * args.t * L.upper)
    report = check_union_multiplicity(list(family.values()), l, Z)
    report.certificate_provenance = L.provenance
    return [report]


def _corner_demo(args) -> list[VerificationReport]:
    L = _certificate(args.t)
    Z = SpaceSpec.cyclic(args.m)
    pair = CommutingPair(CyclicShift(args.m, args.a), CyclicShift(args.m, args.b))
    corrupted = frozenset((v % args.m,) for v in args.y)
    extracted = failures = contradictions = 0
    for x in Z.points():
        A_x = return_index_set(x, corrupted, pair, args.t)
        res = corner_extraction_demo(x, A_x, pair, args.t, corrupted, L)
        if res is not None:
            extracted += 1
            failures += not res.relations_hold
            contradictions += res.violates_non_return
    genuine = non_returning_pair(Region.points(Z, [p[0] for p in corrupted]), pair, args.t)
    total = sum(len(return_index_set(x, genuine, pair, args.t)) for x in Z.points())
    identity_gap = abs(total - args.t * args.t * len(genuine.points))
    params = {"m": args.m, "a": args.a, "b": args.b, "t": args.t, "extractions": extracted,
              "contradictions": contradictions}
    return [
        VerificationReport("corner-extraction", failures, 0, 0, certificate_provenance=L.provenance, params=params),
        VerificationReport("double-counting", identity_gap, 0, 0, params=dict(params, sum_A=total)),
    ]


def _x1_diagnostic(args) -> list[VerificationReport]:
    m = parse_map(args.map)
    A = parse_region(args.region, m.space)
    h = dimension_function(args.h)
    profiles = truncated_profile_integrals(m, A, h, args.n, args.k_ladder or [1, 10, 100])
    est = box_counting_premeasure(A, h, [Fraction(1, k) for k in (4, 16, 64)]).estimate
    alpha = _rotation_angle(m)
    closed = None
    if alpha is not None and isinstance(alpha, RealParam) and str(h) == "t^1":
        closed = rotation_liminf(alpha)
    return [report_x1_x3_diagnostic(m, h, profiles, est, A.measure, closed)]


def cmd_verify(args) -> int:
    action = args.action
    if action == "poincare":
        reports = _poincare_suite(args)
    elif action == "pair-poincare":
        reports = _pair_poincare_suite(args)
    elif action == "thm-x2":
        m = parse_map(args.map)
        A = parse_region(args.region, m.space)
        reports = [check_theorem_x2(A, m, parse_g(args.g, args.h), args.n, _sampler(args))]
    elif action == "thm-x4":
        pair = _pair(args)
        A = parse_region(args.region, pair.space)
        reports = [check_theorem_x4(A, pair, parse_g(args.g, args.h), args.n, _certificate(args.n), _sampler(args))]
    elif action == "union":
        reports = _union_report(args)
    elif action == "corner-demo":
        reports = _corner_demo(args)
    elif action == "x1-diagnostic":
        reports = _x1_diagnostic(args)
    else:
        raise UsageError(action)
    return _emit_reports(args, action, reports)


# ---------------------------------------------------------------------------
# entropy


def cmd_entropy(args) -> int:
    space = SpaceSpec.from_json(json.loads(args.space)) if args.space.startswith("{") else _parse_space(args.space)
    A = parse_region(args.region, space)
    if args.action == "cover":
        lines = ["eps,lower,upper,exact"]
        for eps in args.eps:
            c = covering_number(A, space, eps)
            lines.append(f"{eps},{c.lower},{c.upper},{str(c.exact).lower()}")
        text = "\n".join(lines) + "\n"
        args.output.write("cover.csv", text)
        print(text, end="")
        return EXIT_OK
    if args.action == "premeasure":
        est = box_counting_premeasure(A, dimension_function(args.h), args.eps)
        lines = ["delta,cover_upper,value"] + [f"{d},{n},{v}" for d, n, v in est.ladder]
        lines.append(f"estimate,,{est.estimate}")
        text = "\n".join(lines) + "\n"
        args.output.write("premeasure.csv", text)
        print(text, end="")
        return EXIT_OK
    raise UsageError(args.action)


def _parse_space(text: str) -> SpaceSpec:
    """``T`` / ``T2`` for tori, ``Z12`` for cyclic groups, ``x``-joined products."""
    factors = []
    for part in text.split("x"):
        part = part.strip()
        if part.startswith("T"):
            factors.append(SpaceSpec.torus(int(part[1:] or 1)))
        elif part.startswith("Z"):
            factors.append(SpaceSpec.cyclic(int(part[1:])))
        else:
            raise UsageError(f"unknown space {text!r}")
    return SpaceSpec.product(*factors) if len(factors) > 1 else factors[0]


# ---------------------------------------------------------------------------
# golden records


def _golden_ops() -> dict:
    Z10 = SpaceSpec.cyclic(10)
    T1 = SpaceSpec.torus(1)

    def l_add(inp):
        Y = Region.points(Z10, inp["Y"])
        return check_lemma_l_add(Y, CyclicShift(10, inp["a"]), inp["t"]).to_json()

    def cover(inp):
        c = covering_number(Region.arc(Fraction(inp["lo"]), Fraction(inp["length"])), T1, Fraction(inp["eps"]))
        return {"lower": c.lower, "upper": c.upper, "exact": c.exact}

    def rot(inp):
        o = rotation_oracle(parse_real(inp["alpha"]), inp["n"])
        return {"denominators": list(o.denominators), "argmin": o.argmin}

    return {
        "corners.exhaustive": (lambda inp: max_corner_free_exhaustive(inp["n"]).size, "exhaustive mask enumeration"),
        "corners.bnb": (lambda inp: max_corner_free_bnb(inp["n"]).size, "exhaustive mask enumeration"),
        "corners.certified_L": (lambda inp: certified_L(inp["t"]).to_json(), "exhaustive mask enumeration"),
        "corners.ap3": (lambda inp: max_ap3_free_exact(inp["n"])[0], "subset brute force"),
        "spaces.cover_arc": (cover, "closed form ceil(length/eps)"),
        "dynamics.rotation_oracle": (rot, "continued-fraction convergents"),
        "verify.lemma_l_add": (l_add, "exhaustive enumeration"),
        "verify.rhs_x2_whole_torus": (
            lambda inp: str(rhs_bound_x2(Region.whole(T1), T1, IdentityIntegrator(), inp["n"]).value),
            "closed-form covering counts",
        ),
    }


GOLDEN_INPUTS = [
    ("corners.exhaustive", {"n": 1}), ("corners.exhaustive", {"n": 2}), ("corners.exhaustive", {"n": 3}),
    ("corners.exhaustive", {"n": 4}), ("corners.bnb", {"n": 4}), ("corners.certified_L", {"t": 3}),
    ("corners.ap3", {"n": 20}), ("spaces.cover_arc", {"lo": "0", "length": "1/4", "eps": "1/10"}),
    ("dynamics.rotation_oracle", {"alpha": "golden", "n": 1000}),
    ("verify.lemma_l_add", {"Y": [0], "a": 1, "t": 5}), ("verify.rhs_x2_whole_torus", {"n": 1}),
]


def _digest(op: str, inp: dict) -> str:
    return hashlib.sha256(json.dumps({"op": op, "input": inp}, sort_keys=True).encode()).hexdigest()


@dataclass
class GoldenRecord:
    operation: str
    input: dict
    input_digest: str
    expected: object
    oracle: str
    created: str

    def to_json(self) -> dict:
        return self.__dict__.copy()


def cmd_golden(args) -> int:
    store = Path(args.store)
    ops = _golden_ops()
    if args.action == "regenerate":
        if not args.yes:
            print("regenerate rewrites the golden store; pass --yes to confirm", file=sys.stderr)
            return EXIT_USAGE
        now = _dt.datetime.now(_dt.timezone.utc).isoformat()
        records = []
        for op, inp in GOLDEN_INPUTS:
            fn, oracle = ops[op]
            records.append(GoldenRecord(op, inp, _digest(op, inp), fn(inp), oracle, now).to_json())
        store.parent.mkdir(parents=True, exist_ok=True)
        store.write_text(json.dumps({"records": records}, sort_keys=True, indent=2) + "\n")
        print(f"wrote {len(records)} records to {store}")
        return EXIT_OK
    if args.action == "check":
        if not store.exists():
            raise UsageError(f"golden store {store} not found")
        try:
            records = json.loads(store.read_text())["records"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise UsageError(f"golden store {store} is malformed") from exc
        mismatches = []
        for rec in records:
            op, inp = rec["operation"], rec["input"]
            if op not in ops:
                mismatches.append(f"{op}: unknown operation")
                continue
            if _digest(op, inp) != rec["input_digest"]:
                mismatches.append(f"{op} {json.dumps(inp, sort_keys=True)}: input digest mismatch")
                continue
            got = ops[op][0](inp)
            if json.dumps(got, sort_keys=True) != json.dumps(rec["expected"], sort_keys=True):
                mismatches.append(f"{op} {json.dumps(inp, sort_keys=True)}: expected {rec['expected']!r}, got {got!r}")
        for m in mismatches:
            print(f"MISMATCH {m}")
        print(f"{len(records) - len(mismatches)}/{len(records)} golden records match")
        return EXIT_FAIL if mismatches else EXIT_OK
    raise UsageError(args.action)


# ---------------------------------------------------------------------------
# parser


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0, help="root seed")
    p.add_argument("--samples", type=_positive_int, default=100_000, help="Monte Carlo sample count")
    p.add_argument("--workers", type=_positive_int, default=1, help="threads; never changes results")
    p.add_argument("--config", help="flat key = value config file (schema = 1)")
    p.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    return p


def _actions(group_parser: argparse.ArgumentParser):
    sub = group_parser.add_subparsers(dest="action", required=True)
    sub.dest_group = group_parser.prog.split()[-1]
    return sub


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="recurlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"recurlab {__version__}")
    groups = parser.add_subparsers(dest="group", required=True)
    leaves: dict[tuple[str, str], argparse.ArgumentParser] = {}
    parser.set_defaults(_leaves=leaves)

    def leaf(sub, name, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        leaves[(sub.dest_group, name)] = p
        return p

    g = groups.add_parser("corners", help="corner-free sets and L(N) certificates")
    sub = _actions(g)
    p = leaf(sub, "solve", "maximum corner-free subset of [1,N]^2")
    p.add_argument("--n", type=_positive_int, help="grid side (required)")
    p.set_defaults(_required=("n",))
    p.add_argument("--budget", type=_positive_int, default=200_000)
    p = leaf(sub, "bound", "certificate for L(N)")
    p.add_argument("--n", type=_positive_int, help="grid side (required)")
    p.set_defaults(_required=("n",))
    p.add_argument("--mode", choices=("exact-required", "best-available"), default="best-available")
    p.add_argument("--budget", type=int, default=20_000)
    p = leaf(sub, "table", "CSV of L(N) brackets")
    p.add_argument("--max", type=_positive_int, help="largest side (required)")
    p.set_defaults(_required=("max",))
    p.add_argument("--budget", type=int, default=0)
    p = leaf(sub, "lift", "lift a Behrend set to a corner-free grid subset")
    p.add_argument("--n", type=_positive_int, help="grid side (required)")
    p.set_defaults(_required=("n",))

    g = groups.add_parser("recur", help="recurrence profiles")
    sub = _actions(g)
    p = leaf(sub, "single", "distance profile of one map")
    p.add_argument("--map", default="rotation:golden")
    p.add_argument("--x", default="0")
    p.add_argument("--n", type=_positive_int, default=1000)
    p.add_argument("--every", type=_positive_int, help="emit every k-th row")
    p = leaf(sub, "pair", "simultaneous profile of a commuting pair")
    p.add_argument("--s", default="rotation:golden")
    p.add_argument("--r", default="rotation:sqrt2-1")
    p.add_argument("--x", default="0")
    p.add_argument("--n", type=_positive_int, default=100)
    p = leaf(sub, "profile", "truncated weighted liminf profile")
    p.add_argument("--map", default="rotation:golden")
    p.add_argument("--s")
    p.add_argument("--r")
    p.add_argument("--x", default="0")
    p.add_argument("--h", default="power:1")
    p.add_argument("--n", type=_positive_int, default=100)
    p.add_argument("--k-ladder", type=_int_list)

    g = groups.add_parser("verify", help="lemma and theorem checks")
    sub = _actions(g)
    p = leaf(sub, "poincare", "mu(Y(t)) <= 1/t")
    p.add_argument("--m", type=_positive_int, default=10)
    p.add_argument("--t-max", type=_positive_int, default=9)
    p.add_argument("--trials", type=_positive_int, default=20)
    p.add_argument("--map", help="torus map instead of the cyclic suite")
    p.add_argument("--region", default="arc:0,1/4")
    p.add_argument("--method", choices=("iid", "stratified"), default="iid")
    p = leaf(sub, "pair-poincare", "mu(Y(t)) <= L(t) for commuting pairs")
    p.add_argument("--t", type=_positive_int, default=3)
    p.add_argument("--m", type=_positive_int, default=12)
    p.add_argument("--trials", type=_positive_int, default=5)
    p.add_argument("--s")
    p.add_argument("--r")
    p.add_argument("--region", default="arc:0,1/4")
    p.add_argument("--method", choices=("iid", "stratified"), default="iid")
    for name, helptext in (("thm-x2", "integral inequality for one map"), ("thm-x4", "integral inequality for a pair")):
        p = leaf(sub, name, helptext)
        if name == "thm-x2":
            p.add_argument("--map", default="rotation:golden")
            p.add_argument("--n", type=_positive_int, default=100)
        else:
            p.add_argument("--s", default="rotation:golden")
            p.add_argument("--r", default="rotation:sqrt2-1")
            p.add_argument("--n", type=_positive_int, default=50)
        p.add_argument("--region", default="arc:0,1/4")
        p.add_argument("--g", default="identity")
        p.add_argument("--h", default="power:1")
        p.add_argument("--method", choices=("iid", "stratified"), default="iid")
    for name, helptext in (("union", "union multiplicity on the M family"), ("corner-demo", "corner extraction")):
        p = leaf(sub, name, helptext)
        p.add_argument("--m", type=_positive_int, default=12)
        p.add_argument("--a", type=int, default=1)
        p.add_argument("--b", type=int, default=5)
        p.add_argument("--t", type=_positive_int, default=3)
        p.add_argument("--y", type=_int_list, default=[0, 3] if name == "union" else list(range(12)))
    p = leaf(sub, "x1-diagnostic", "truncated liminf integrals against a box-counting estimate")
    p.add_argument("--map", default="rotation:golden")
    p.add_argument("--region", default="arc:0,1/4")
    p.add_argument("--h", default="power:1")
    p.add_argument("--n", type=_positive_int, default=1000)
    p.add_argument("--k-ladder", type=_int_list)

    g = groups.add_parser("entropy", help="covering numbers and box-counting estimates")
    sub = _actions(g)
    for name in ("cover", "premeasure"):
        p = leaf(sub, name, "covering numbers" if name == "cover" else "N_delta * h(delta) ladder")
        p.add_argument("--space", default="T")
        p.add_argument("--region", default="whole")
        p.add_argument("--eps", type=lambda s: [_fraction(v) for v in s.split(",")], default=[Fraction(1, 4)])
        if name == "premeasure":
            p.add_argument("--h", default="power:1")

    g = groups.add_parser("golden", help="golden-value store")
    sub = _actions(g)
    for name in ("check", "regenerate"):
        p = leaf(sub, name, f"{name} the golden store")
        p.add_argument("--store", default=DEFAULT_GOLDEN)
        if name == "regenerate":
            p.add_argument("--yes", action="store_true", help="confirm rewriting the store")
    return parser


def _apply_config(parser: argparse.ArgumentParser, args, argv: list[str]):
    leaf = args._leaves[(args.group, args.action)]
    dests = {a.dest for a in leaf._actions if a.dest not in ("help", "config")}
    text = Path(args.config).read_text() if os.path.exists(args.config) else None
    if text is None:
        raise UsageError(f"config file {args.config} not found")
    cfg = ExperimentConfig.from_text(text, dests, f"{args.group} {args.action}")
    # config values become defaults; explicit flags still win
    converted = {}
    by_dest = {a.dest: a for a in leaf._actions}
    for key, value in cfg.values.items():
        action = by_dest[key]
        if isinstance(action, argparse._StoreTrueAction):
            converted[key] = value.lower() in ("1", "true", "yes")
        elif action.type is not None:
            try:
                converted[key] = action.type(value)
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from exc
        else:
            converted[key] = value
        if action.choices is not None and converted[key] not in action.choices:
            raise UsageError(f"config key {key!r}: invalid choice {value!r}")
    leaf.set_defaults(**converted)
    return parser.parse_args(argv)


HANDLERS = {"corners": cmd_corners, "recur": cmd_recur, "verify": cmd_verify, "entropy": cmd_entropy,
            "golden": cmd_golden}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.config:
            try:
                args = _apply_config(parser, args, argv)
            except SystemExit as exc:
                return int(exc.code or 0)
        missing = [k for k in getattr(args, "_required", ()) if getattr(args, k) is None]
        if missing:
            raise UsageError("missing required option(s): " + ", ".join(f"--{k}" for k in missing))
        root = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
        args.output = Output(root, args.group)
        args.argv = argv
        return HANDLERS[args.group](args)
    except (MissingCertificate, CertificateUnavailable) as exc:
        print(f"error: missing certificate: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (UsageError, DomainError, NotCommuting, ValueError, KeyError, InsufficientDepth, PrecisionError,
            ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
