"""Confusion metrics, ROC curves, and per-class / macro-averaged reports."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from decimal import ROUND_DOWN, ROUND_HALF_UP, Decimal
from typing import Sequence

import numpy as np


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f_score: float
    undefined: tuple[str, ...] = ()


@dataclass
class RocCurve:
    points: list[tuple[float, float]]
    auc: float
    thresholds: list[float] = field(default_factory=list)

    def to_csv(self) -> str:
        return "fpr,tpr\n" + "".join(f"{x!r},{y!r}\n" for x, y in self.points)


def _check(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise EvaluationError(f"{s.size} scores but {y.size} labels")
    if s.size == 0:
        raise EvaluationError("nothing to evaluate")
    if not np.isin(y, (0, 1)).all():
        raise EvaluationError("labels must be 0 or 1")
    return s, y.astype(np.int64)


def confusion(scores, labels, threshold: float = 0.5) -> ConfusionCounts:
    """Counts with the rule: predict 1 iff ``score >= threshold``."""
    s, y = _check(scores, labels)
    pred = s >= threshold
    pos = y == 1
    return ConfusionCounts(tp=int(np.sum(pred & pos)), fp=int(np.sum(pred & ~pos)),
                           tn=int(np.sum(~pred & ~pos)), fn=int(np.sum(~pred & pos)))


def metrics(c: ConfusionCounts) -> Metrics:
    """Standard definitions; zero-denominator metrics are 0 and flagged."""
    if c.total <= 0:
        raise EvaluationError("empty confusion matrix")
    undefined = []
    accuracy = (c.tp + c.tn) / c.total
    if c.tp + c.fp:
        precision = c.tp / (c.tp + c.fp)
    else:
        precision = 0.0
        undefined.append("precision")
    if c.tp + c.fn:
        recall = c.tp / (c.tp + c.fn)
    else:
        recall = 0.0
        undefined.append("recall")
    if c.tp:
        # harmonic mean of precision and recall, as one integer division
        f_score = 2 * c.tp / (2 * c.tp + c.fp + c.fn)
    else:
        f_score = 0.0
        undefined.append("f_score")
    return Metrics(accuracy, precision, recall, f_score, tuple(undefined))


def roc(scores, labels) -> RocCurve:
    """ROC points over descending unique score thresholds, AUC by trapezoids.

    Tied scores form one step, which makes the trapezoidal area equal the
    probability that a random positive outscores a random negative (ties
    counting one half).
    """
    s, y = _check(scores, labels)
    P = int(y.sum())
    N = y.size - P
    if P == 0 or N == 0:
        raise EvaluationError("ROC needs both positive and negative labels")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.r_[np.nonzero(s[1:] != s[:-1])[0], s.size - 1]
    tps = np.cumsum(y)[last]
    fps = (last + 1) - tps
    tpr = np.r_[0.0, tps / P]
    fpr = np.r_[0.0, fps / N]
    # sum in integer counts first so the area is exact up to the final division
    area2 = np.sum((fps[1:] - fps[:-1]) * (tps[1:] + tps[:-1])) + fps[0] * tps[0]
    auc = float(area2) / (2.0 * P * N)
    return RocCurve(list(zip(fpr.tolist(), tpr.tolist())), auc, s[last].tolist())


@dataclass
class EvaluationReport:
    vuln_class: str
    model_kind: str
    partition: str
    accuracy: float
    precision: float
    recall: float
    f_score: float
    auc: float | None
    confusion: ConfusionCounts
    threshold: float = 0.5
    undefined: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["confusion"] = asdict(self.confusion)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        d = dict(d)
        d["confusion"] = ConfusionCounts(**d["confusion"])
        return cls(**d)


def evaluate(scores, labels, vuln_class: str, model_kind: str, partition: str,
             threshold: float = 0.5, meta: dict | None = None) -> tuple[EvaluationReport, RocCurve | None]:
    c = confusion(scores, labels, threshold)
    m = metrics(c)
    undefined = list(m.undefined)
    try:
        curve = roc(scores, labels)
        auc = curve.auc
    except EvaluationError:
        curve, auc = None, None
        undefined.append("auc")
    report = EvaluationReport(vuln_class, model_kind, partition, m.accuracy, m.precision, m.recall,
                              m.f_score, auc, c, threshold, undefined, dict(meta or {}))
    return report, curve


METRIC_NAMES = ("accuracy", "precision", "recall", "f_score", "auc")


def aggregate(reports: Sequence[EvaluationReport]) -> dict[str, float | None]:
    """Unweighted mean of each metric across reports (one per class)."""
    if not reports:
        raise EvaluationError("no reports to aggregate")
    out: dict[str, float | None] = {}
    for name in METRIC_NAMES:
        vals = [getattr(r, name) for r in reports]
        out[name] = None if any(v is None for v in vals) else float(np.mean(vals))
    return out


def to_percent(value: float, mode: str = "truncate") -> str:
    """A [0, 1] value as a one-decimal percentage string.

    ``mode="truncate"`` drops further digits (the convention under which the
    per-class figures in ``vulnlex.reference`` average to their stated summary);
    ``mode="round"`` rounds half up.
    """
    # clear binary noise (0.947 stored as 0.94699...) before truncating
    d = Decimal(repr(round(float(value) * 100, 9)))
    rounding = {"truncate": ROUND_DOWN, "round": ROUND_HALF_UP}[mode]
    return str(d.quantize(Decimal("0.1"), rounding=rounding))


def render_text(reports: Sequence[EvaluationReport]) -> str:
    """Aligned plain-text table, one row per report."""
    header = ("class", "model", "partition", "n", "accuracy", "precision", "recall", "f_score", "auc")
    rows = [header]
    for r in reports:
        rows.append((r.vuln_class, r.model_kind, r.partition, str(r.confusion.total),
                     *(("-" if getattr(r, k) is None else f"{getattr(r, k):.4f}") for k in METRIC_NAMES)))
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    flagged = [f"{r.vuln_class}/{r.partition}: undefined {', '.join(r.undefined)}"
               for r in reports if r.undefined]
    return "\n".join(lines + flagged) + "\n"
