"""Confusion matrices, precision/recall/F1, and classification reports.

Aggregates are computed with plain Python arithmetic from the integer
confusion counts, so results are exactly reproducible from the raw
prediction pairs.  Zero-denominator rates are defined as 0: small test sets
make never-predicted classes entirely plausible and the report must stay
well-formed.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    """C x C counts; rows are true classes, columns predicted classes."""

    counts: np.ndarray
    classes: tuple[str, ...]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self) -> str:
        """Header row/column carry the class names; cells are counts."""
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow([""] + list(self.classes))
        for i, name in enumerate(self.classes):
            writer.writerow([name] + [int(v) for v in self.counts[i]])
        return buf.getvalue()


@dataclass(frozen=True)
class ClassRow:
    name: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class Averages:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class ClassificationReport:
    """Per-class rates plus accuracy and macro / weighted aggregates."""

    task: str
    classes: tuple[ClassRow, ...]
    accuracy: float
    macro: Averages
    weighted: Averages
    total_support: int


def confusion(y_true, y_pred, classes) -> ConfusionMatrix:
    """Count (true, predicted) pairs.

    ``classes`` is either the ordered class-name sequence or a plain class
    count (names then default to "0".."C-1").
    """
    if isinstance(classes, int):
        names = tuple(str(i) for i in range(classes))
    else:
        names = tuple(classes)
    c = len(names)
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape or y_true.ndim != 1:
        raise ValueError(
            f"prediction vectors must be 1-D and equal length, got "
            f"{y_true.shape} and {y_pred.shape}"
        )
    for name, v in (("y_true", y_true), ("y_pred", y_pred)):
        if v.size and (v.min() < 0 or v.max() >= c):
            raise ValueError(f"{name} contains indices outside [0, {c})")
    counts = np.zeros((c, c), dtype=np.int64)
    if y_true.size:
        np.add.at(counts, (y_true.astype(np.int64), y_pred.astype(np.int64)), 1)
    return ConfusionMatrix(counts=counts, classes=names)


def macro_average(values) -> float:
    """Unweighted mean over classes."""
    return sum(values) / len(values)


def weighted_average(values, supports) -> float:
    """Support-weighted mean over classes."""
    return sum(v * s for v, s in zip(values, supports)) / sum(supports)


def report(cm: ConfusionMatrix, task: str = "") -> ClassificationReport:
    """Per-class precision/recall/F1 with macro and weighted aggregates."""
    if cm.total == 0:
        raise ValueError("cannot report on an empty confusion matrix")
    rows = []
    for i, name in enumerate(cm.classes):
        tp = int(cm.counts[i, i])
        fp = int(cm.counts[:, i].sum()) - tp
        fn = int(cm.counts[i, :].sum()) - tp
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = (
            2.0 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        rows.append(ClassRow(name, precision, recall, f1, tp + fn))

    supports = [r.support for r in rows]
    macro = Averages(
        macro_average([r.precision for r in rows]),
        macro_average([r.recall for r in rows]),
        macro_average([r.f1 for r in rows]),
    )
    weighted = Averages(
        weighted_average([r.precision for r in rows], supports),
        weighted_average([r.recall for r in rows], supports),
        weighted_average([r.f1 for r in rows], supports),
    )
    accuracy = int(np.trace(cm.counts)) / cm.total
    return ClassificationReport(
        task=task,
        classes=tuple(rows),
        accuracy=accuracy,
        macro=macro,
        weighted=weighted,
        total_support=cm.total,
    )


def macro_f1(y_true, y_pred, classes) -> float:
    """Convenience: unweighted mean F1 straight from prediction pairs."""
    return report(confusion(y_true, y_pred, classes)).macro.f1


def _round2(value: float) -> str:
    # Decimal(repr(..)) keeps the shortest decimal form, so 0.715 rounds to
    # 0.72 (half away from zero) instead of tripping on binary representation.
    return str(Decimal(repr(value)).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def render_report(rep: ClassificationReport) -> tuple[str, str]:
    """Text table in the per-class / Accuracy / Macro / Weighted layout,
    plus a JSON document carrying full precision.

    Rendered rates are rounded to two decimals, half away from zero.
    """
    widths = (14, 11, 11, 11, 9)
    header = ("Class", "Precision", "Recall", "F1-score", "Support")

    def line(cells):
        return "".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()

    lines = []
    if rep.task:
        lines.append(f"{rep.task} classification report")
    lines.append(line(header))
    for r in rep.classes:
        lines.append(
            line((r.name, _round2(r.precision), _round2(r.recall), _round2(r.f1), r.support))
        )
    lines.append(line(("Accuracy", "", "", _round2(rep.accuracy), rep.total_support)))
    for label, avg in (("Macro Avg", rep.macro), ("Weighted Avg", rep.weighted)):
        lines.append(
            line((label, _round2(avg.precision), _round2(avg.recall), _round2(avg.f1), rep.total_support))
        )
    text = "\n".join(lines) + "\n"

    doc = {
        "task": rep.task,
        "classes": [
            {
                "name": r.name,
                "precision": r.precision,
                "recall": r.recall,
                "f1": r.f1,
                "support": r.support,
            }
            for r in rep.classes
        ],
        "accuracy": rep.accuracy,
        "macro": vars(rep.macro).copy(),
        "weighted": vars(rep.weighted).copy(),
        "total_support": rep.total_support,
    }
    return text, json.dumps(doc, indent=2) + "\n"


def report_from_json(doc: str | dict) -> ClassificationReport:
    """Inverse of the JSON side of render_report."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    return ClassificationReport(
        task=doc["task"],
        classes=tuple(
            ClassRow(c["name"], c["precision"], c["recall"], c["f1"], c["support"])
            for c in doc["classes"]
        ),
        accuracy=doc["accuracy"],
        macro=Averages(**doc["macro"]),
        weighted=Averages(**doc["weighted"]),
        total_support=doc["total_support"],
    )
