"""Confusion matrices and per-class precision/recall/F1 reports.

The report mirrors the published layout: one row per evaluation label in the
fixed order anger, joy, neutral, sadness; columns precision, recall,
f1-score, support; then Micro AVG, Macro AVG, and Weighted AVG rows.  Any
metric with a zero denominator scores 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from dialemo.labels import EVAL_LABELS


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[g, p] = number of examples with gold label g predicted as p."""

    labels: tuple[Hashable, ...]
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def index(self, label) -> int:
        return self.labels.index(label)


def confusion(
    preds: Sequence, golds: Sequence, labels: tuple = EVAL_LABELS
) -> ConfusionMatrix:
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions vs {len(golds)} golds")
    idx = {lab: i for i, lab in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for p, g in zip(preds, golds):
        if g not in idx:
            raise ValueError(f"gold label {g!r} outside the evaluation set")
        if p not in idx:
            raise ValueError(f"predicted label {p!r} outside the evaluation set")
        counts[idx[g], idx[p]] += 1
    return ConfusionMatrix(tuple(labels), counts)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    labels: tuple[Hashable, ...]
    per_label: dict
    micro: ClassMetrics
    macro: ClassMetrics
    weighted: ClassMetrics


def _f1(p: float, r: float) -> float:
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def report(m: ConfusionMatrix) -> EvalReport:
    """Per-class P/R/F1 plus micro, macro, and support-weighted averages."""
    counts = m.counts
    total = int(counts.sum())
    if total == 0:
        raise ValueError("confusion matrix is empty")
    per_label = {}
    k = len(m.labels)
    for i, lab in enumerate(m.labels):
        tp = float(counts[i, i])
        col = float(counts[:, i].sum())
        row = float(counts[i, :].sum())
        p = tp / col if col > 0 else 0.0
        r = tp / row if row > 0 else 0.0
        per_label[lab] = ClassMetrics(p, r, _f1(p, r), int(row))

    # Single-label classification: micro P = R = F1 = accuracy.
    acc = float(np.trace(counts)) / total
    micro = ClassMetrics(acc, acc, acc, total)
    macro = ClassMetrics(
        sum(c.precision for c in per_label.values()) / k,
        sum(c.recall for c in per_label.values()) / k,
        sum(c.f1 for c in per_label.values()) / k,
        total,
    )
    weighted = ClassMetrics(
        sum(c.precision * c.support for c in per_label.values()) / total,
        sum(c.recall * c.support for c in per_label.values()) / total,
        sum(c.f1 * c.support for c in per_label.values()) / total,
        total,
    )
    return EvalReport(m.labels, per_label, micro, macro, weighted)


def _label_name(lab) -> str:
    name = getattr(lab, "value", lab)
    return str(name).capitalize()


def render_report(r: EvalReport) -> str:
    """Aligned plain-text table in the published layout."""
    rows = [(_label_name(lab), r.per_label[lab]) for lab in r.labels]
    rows += [("Micro AVG", r.micro), ("Macro AVG", r.macro), ("Weighted AVG", r.weighted)]
    name_w = max(len(name) for name, _ in rows)
    lines = [
        f"{'':<{name_w}}  {'precision':>9}  {'recall':>9}  {'f1-score':>9}  {'support':>9}"
    ]
    for i, (name, c) in enumerate(rows):
        if i == len(r.labels):
            lines.append("-" * len(lines[0]))
        lines.append(
            f"{name:<{name_w}}  {c.precision:>9.3f}  {c.recall:>9.3f}  "
            f"{c.f1:>9.3f}  {c.support:>9d}"
        )
    return "\n".join(lines)


def report_to_dict(r: EvalReport) -> dict:
    """Machine-readable twin of the rendered table."""

    def row(c: ClassMetrics) -> dict:
        return {
            "precision": c.precision,
            "recall": c.recall,
            "f1-score": c.f1,
            "support": c.support,
        }

    out = {_label_name(lab): row(r.per_label[lab]) for lab in r.labels}
    out["Micro AVG"] = row(r.micro)
    out["Macro AVG"] = row(r.macro)
    out["Weighted AVG"] = row(r.weighted)
    return out
