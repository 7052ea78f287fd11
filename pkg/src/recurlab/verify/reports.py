from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction

VERDICTS = ("pass", "fail", "hypothesis-fail", "info")


def encode_number(v):
    """Exact rationals as ``"p/q"`` strings, floats via ``repr`` round-trip."""
    if v is None:
        return None
    if isinstance(v, Fraction):
        return str(v) if v.denominator != 1 else str(v.numerator)
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


@dataclass
class VerificationReport:
    check: str
    statistic: object
    bound: object
    margin: object = 0
    samples: int | None = None
    seed: int | None = None
    certificate_provenance: str | None = None
    verdict: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.verdict:
            self.verdict = "pass" if self.statistic <= self.bound + self.margin else "fail"
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    @property
    def passed(self) -> bool:
        return self.verdict in ("pass", "info")

    @property
    def slack(self):
        return self.bound + self.margin - self.statistic

    def to_json(self) -> dict:
        return {
            "check": self.check,
            "statistic": encode_number(self.statistic),
            "bound": encode_number(self.bound),
            "margin": encode_number(self.margin),
            "samples": self.samples,
            "seed": self.seed,
            "certificate_provenance": self.certificate_provenance,
            "verdict": self.verdict,
            "params": self.params,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


CSV_COLUMNS = ("check", "statistic", "bound", "margin", "samples", "seed", "certificate_provenance", "verdict")


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        row = r.to_json()
        writer.writerow(["" if row[c] is None else row[c] for c in CSV_COLUMNS])
    return buf.getvalue()
