"""Evaluation report: JSON serialisation and fixed-width text tables."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from .metrics import Rate, TestMetrics


def _encode_float(x: Optional[float]):
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _decode_float(x):
    if x in ("inf", "-inf"):
        return float(x)
    return x


@dataclass
class EvaluationReport:
    protocol: str
    extractor: str
    config_hash: str
    cardinalities: dict
    warnings: list = field(default_factory=list)
    threshold: Optional[float] = None
    dev_eer: Optional[float] = None
    test: Optional[TestMetrics] = None

    @property
    def degenerate(self) -> bool:
        return bool(self.warnings)

    @property
    def status(self) -> str:
        return "degenerate" if self.warnings else "ok"

    def identities_hold(self) -> bool:
        """ACER = (APCER + BPCER)/2 and HTER = (FAR + BPCER)/2, exactly on counts."""
        if self.test is None:
            return True
        t = self.test
        apcer = max((r.fraction for r in t.apcer_per_pai.values()), default=Fraction(0))
        return (
            t.acer_fraction == (apcer + t.bpcer.fraction) / 2
            and t.hter_fraction == (t.far.fraction + t.bpcer.fraction) / 2
            and all(apcer >= r.fraction for r in t.apcer_per_pai.values())
            and 0 <= t.acer <= 100
            and 0 <= t.hter <= 100
        )

    def to_json(self) -> dict:
        return {
            "protocol": self.protocol,
            "extractor": self.extractor,
            "config_hash": self.config_hash,
            "status": self.status,
            "threshold": _encode_float(self.threshold),
            "dev_eer": self.dev_eer,
            "test": None if self.test is None else self.test.to_json(),
            "cardinalities": self.cardinalities,
            "warnings": list(self.warnings),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def from_json(cls, doc: dict) -> "EvaluationReport":
        test = None
        if doc.get("test") is not None:
            counts = doc["test"]["counts"]
            per_pai = {k.split(":", 1)[1]: Rate(*v) for k, v in counts.items() if k.startswith("attack:")}
            threshold = _decode_float(doc["threshold"])
            test = TestMetrics(threshold, Rate(*counts["bona_fide"]), per_pai, Rate(*counts["attack"]))
        return cls(
            protocol=doc["protocol"],
            extractor=doc["extractor"],
            config_hash=doc["config_hash"],
            cardinalities=doc["cardinalities"],
            warnings=list(doc.get("warnings", [])),
            threshold=_decode_float(doc.get("threshold")),
            dev_eer=doc.get("dev_eer"),
            test=test,
        )

    @classmethod
    def load(cls, path) -> "EvaluationReport":
        return cls.from_json(json.loads(Path(path).read_text()))


def _fmt(x: Optional[float]) -> str:
    return "-" if x is None else f"{x:.2f}"


def format_table(reports: Sequence[EvaluationReport]) -> str:
    """Aligned plain-text table: one row per report, rates to 2 decimals."""
    header = ["Protocol", "Extractor", "HTER (%)", "ACER (%)", "APCER (%)", "BPCER (%)", "Status"]
    rows = []
    for r in reports:
        t = r.test
        rows.append([
            r.protocol,
            r.extractor,
            _fmt(None if t is None else t.hter),
            _fmt(None if t is None else t.acer),
            _fmt(None if t is None else t.apcer),
            _fmt(None if t is None else t.bpcer.percent),
            r.status,
        ])
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]

    def line(cells):
        return " | ".join(
            str(c).ljust(w) if i < 2 else str(c).rjust(w) for i, (c, w) in enumerate(zip(cells, widths))
        )

    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([line(header), sep, *(line(r) for r in rows)]) + "\n"


def format_detail(report: EvaluationReport) -> str:
    lines = [format_table([report])]
    if report.test is not None:
        lines.append(f"threshold: {report.threshold!r}  dev EER: {_fmt(report.dev_eer)}%")
        for kind, rate in sorted(report.test.apcer_per_pai.items()):
            lines.append(f"  APCER[{kind}] = {rate.percent:.2f}%  ({rate.errors}/{rate.total})")
    for w in report.warnings:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"
