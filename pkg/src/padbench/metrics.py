"""EER threshold estimation and ISO/IEC 30107-3 style PAD error rates.

Convention: a presentation is accepted as bona fide when ``score >= threshold``.
All rates are percentages. Internally they are exact fractions of counts, so
``ACER = (APCER + BPCER) / 2`` and ``HTER = (FAR + BPCER) / 2`` hold exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import MetricError, NotApplicableError


@dataclass(frozen=True)
class ScoreEntry:
    sample_id: str
    score: float
    bona_fide: bool
    pai_kind: Optional[str] = None  # attack kind, None for bona fide


@dataclass
class ScoreSet:
    entries: list = field(default_factory=list)

    def __post_init__(self):
        for e in self.entries:
            if not math.isfinite(e.score):
                raise MetricError(f"non-finite score for {e.sample_id!r}")

    @classmethod
    def from_arrays(cls, bona_fide: Iterable[float], attacks: Iterable[float], attack_kind: str = "attack"):
        entries = [ScoreEntry(f"bf{i}", float(s), True) for i, s in enumerate(bona_fide)]
        entries += [ScoreEntry(f"pa{i}", float(s), False, attack_kind) for i, s in enumerate(attacks)]
        return cls(entries)

    def bona_fide_scores(self) -> np.ndarray:
        return np.array([e.score for e in self.entries if e.bona_fide], dtype=np.float64)

    def attack_scores(self, kind: Optional[str] = None) -> np.ndarray:
        return np.array(
            [e.score for e in self.entries if not e.bona_fide and (kind is None or e.pai_kind == kind)],
            dtype=np.float64,
        )

    def attack_kinds(self) -> list[str]:
        return sorted({e.pai_kind for e in self.entries if not e.bona_fide})


def candidate_thresholds(scores: Sequence[float]) -> np.ndarray:
    """-inf, midpoints between adjacent distinct sorted scores, +inf."""
    u = np.unique(np.asarray(scores, dtype=np.float64))
    mids = (u[:-1] + u[1:]) / 2.0
    return np.concatenate([[-np.inf], mids, [np.inf]])


def eer_threshold(dev: ScoreSet) -> tuple[float, float]:
    """Threshold minimising |FAR - FRR| on dev scores, and the EER in percent.

    Ties go to the smaller threshold. EER is reported as (FAR + FRR) / 2.
    """
    bf = np.sort(dev.bona_fide_scores())
    pa = np.sort(dev.attack_scores())
    if bf.size == 0 or pa.size == 0:
        raise MetricError("EER needs both bona fide and attack scores")
    cands = candidate_thresholds(np.concatenate([bf, pa]))
    n_bf, n_pa = bf.size, pa.size
    false_accept = n_pa - np.searchsorted(pa, cands, side="left")  # attacks >= t
    false_reject = np.searchsorted(bf, cands, side="left")  # bona fide < t
    # |FA/n_pa - FR/n_bf| compared exactly in integers
    gap = np.abs(false_accept.astype(np.int64) * n_bf - false_reject.astype(np.int64) * n_pa)
    k = int(np.argmin(gap))  # first minimum = smallest threshold
    eer = (Fraction(int(false_accept[k]), n_pa) + Fraction(int(false_reject[k]), n_bf)) / 2
    return float(cands[k]), float(100 * eer)


def det_points(dev: ScoreSet) -> list[tuple[float, float, float]]:
    """(threshold, FAR %, FRR %) at every candidate threshold."""
    bf = np.sort(dev.bona_fide_scores())
    pa = np.sort(dev.attack_scores())
    cands = candidate_thresholds(np.concatenate([bf, pa]))
    far = (pa.size - np.searchsorted(pa, cands, side="left")) / max(pa.size, 1)
    frr = np.searchsorted(bf, cands, side="left") / max(bf.size, 1)
    return [(float(t), float(100 * a), float(100 * r)) for t, a, r in zip(cands, far, frr)]


@dataclass(frozen=True)
class Rate:
    """An error count over a total."""

    errors: int
    total: int

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.errors, self.total) if self.total else Fraction(0)

    @property
    def percent(self) -> float:
        return float(100 * self.fraction)


@dataclass
class TestMetrics:
    threshold: float
    bpcer: Rate
    apcer_per_pai: dict
    far: Rate

    @property
    def apcer_fraction(self) -> Fraction:
        return max((r.fraction for r in self.apcer_per_pai.values()), default=Fraction(0))

    @property
    def acer_fraction(self) -> Fraction:
        return (self.apcer_fraction + self.bpcer.fraction) / 2

    @property
    def hter_fraction(self) -> Fraction:
        return (self.far.fraction + self.bpcer.fraction) / 2

    @property
    def apcer(self) -> float:
        return float(100 * self.apcer_fraction)

    @property
    def bpcer_percent(self) -> float:
        return self.bpcer.percent

    @property
    def acer(self) -> float:
        return float(100 * self.acer_fraction)

    @property
    def hter(self) -> float:
        return float(100 * self.hter_fraction)

    def to_json(self) -> dict:
        return {
            "hter": self.hter,
            "acer": self.acer,
            "apcer": self.apcer,
            "bpcer": self.bpcer.percent,
            "far": self.far.percent,
            "apcer_per_pai": {k: self.apcer_per_pai[k].percent for k in sorted(self.apcer_per_pai)},
            "counts": {
                "bona_fide": [self.bpcer.errors, self.bpcer.total],
                "attack": [self.far.errors, self.far.total],
                **{f"attack:{k}": [r.errors, r.total] for k, r in sorted(self.apcer_per_pai.items())},
            },
        }


def test_metrics(test: ScoreSet, threshold: float) -> TestMetrics:
    """BPCER, per-PAI APCER (max-aggregated), ACER, pooled FAR and HTER."""
    bf = test.bona_fide_scores()
    if bf.size == 0:
        raise MetricError("test set has no bona fide scores")
    bpcer = Rate(int(np.count_nonzero(bf < threshold)), int(bf.size))
    per_pai = {}
    for kind in test.attack_kinds():
        s = test.attack_scores(kind)
        per_pai[kind] = Rate(int(np.count_nonzero(s >= threshold)), int(s.size))
    pa = test.attack_scores()
    far = Rate(int(np.count_nonzero(pa >= threshold)), int(pa.size))
    return TestMetrics(threshold, bpcer, per_pai, far)


test_metrics.__test__ = False  # not a pytest test function
TestMetrics.__test__ = False


def acer_from_rates(apcer: float, bpcer: float) -> float:
    return (apcer + bpcer) / 2.0


def one_pai_equivalence_check(report: TestMetrics) -> bool:
    """True when HTER equals ACER, which must hold with a single attack kind."""
    if len(report.apcer_per_pai) != 1:
        raise NotApplicableError(
            f"HTER/ACER equivalence applies to single-PAI tests, got {sorted(report.apcer_per_pai)}"
        )
    return abs(report.hter - report.acer) < 1e-9
