"""Evaluation: confusion tallies, one-vs-rest metrics, and report
rendering.

Labels are 0 = tornado, 1 = hail, 2 = wind throughout.  Every ratio
follows the 0/0 -> 0 convention so degenerate tallies stay defined.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, UsageError, ValidationError

LABELS = (0, 1, 2)


@dataclass(frozen=True)
class MetricsReport:
    """One evaluated classifier: its one-vs-rest scores for the chosen
    positive class, macro averages, and the raw confusion matrix."""

    name: str
    positive_class: int
    precision: float
    recall: float
    f1: float
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: np.ndarray

    def row(self):
        return (self.precision, self.recall, self.f1, self.accuracy)


def confusion(predictions, truth):
    """3x3 tally; entry [i, j] counts truth i predicted as j."""
    predictions = list(predictions)
    truth = list(truth)
    if len(predictions) != len(truth):
        raise UsageError(
            f"got {len(predictions)} predictions for {len(truth)} true labels"
        )
    if len(truth) == 0:
        raise UsageError("confusion needs at least one prediction")
    cm = np.zeros((3, 3), dtype=np.int64)
    for p, t in zip(predictions, truth):
        if p not in LABELS or t not in LABELS:
            raise ValidationError(f"labels must be 0, 1, or 2, got prediction {p}, truth {t}")
        cm[t, p] += 1
    return cm


def _ratio(num, den):
    # float() so numpy int inputs do not leak numpy scalars into reports.
    return float(num / den) if den > 0 else 0.0


def metrics(cm, positive: int):
    """(precision, recall, f1, accuracy) treating `positive` one-vs-rest.

    TP is cm[p, p], FP the rest of column p, FN the rest of row p, TN
    everything else; accuracy is (TP + TN) / total.  Undefined ratios
    evaluate to 0.
    """
    cm = np.asarray(cm, dtype=np.int64)
    if cm.shape != (3, 3):
        raise UsageError(f"confusion matrix must be 3x3, got {cm.shape}")
    if positive not in LABELS:
        raise UsageError(f"positive class must be 0, 1, or 2, got {positive}")
    tp = cm[positive, positive]
    fp = cm[:, positive].sum() - tp
    fn = cm[positive, :].sum() - tp
    tn = cm.sum() - tp - fp - fn
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = _ratio(2.0 * precision * recall, precision + recall)
    accuracy = _ratio(tp + tn, cm.sum())
    return (precision, recall, f1, accuracy)


def multiclass_accuracy(cm):
    """Trace over total: the fraction of exactly correct predictions."""
    cm = np.asarray(cm, dtype=np.int64)
    return _ratio(np.trace(cm), cm.sum())


def evaluate(classify, test_set, positive: int = 0, name: str = "model") -> MetricsReport:
    """Score a classifier (any sample -> label callable) on a test set."""
    if len(test_set) == 0:
        raise UsageError("evaluate needs a nonempty test set")
    preds = [classify(s) for s in test_set]
    truth = [s.label for s in test_set]
    cm = confusion(preds, truth)
    precision, recall, f1, accuracy = metrics(cm, positive)
    per_class = [metrics(cm, c) for c in LABELS]
    return MetricsReport(
        name=name,
        positive_class=positive,
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=accuracy,
        macro_precision=sum(m[0] for m in per_class) / 3.0,
        macro_recall=sum(m[1] for m in per_class) / 3.0,
        macro_f1=sum(m[2] for m in per_class) / 3.0,
        confusion=cm,
    )


def format_metrics_row(name: str, report) -> str:
    """`name precision recall f1 accuracy` with four decimals and
    single spaces."""
    p, r, f1, a = report.row() if hasattr(report, "row") else tuple(report)
    return f"{name} {p:.4f} {r:.4f} {f1:.4f} {a:.4f}"


def render_table(reports) -> str:
    """Aligned text table of one row per report."""
    header = ("Model", "Precision", "Recall", "F1-Score", "Accuracy")
    rows = [header]
    for rep in reports:
        rows.append((rep.name,) + tuple(f"{v:.4f}" for v in rep.row()))
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    lines = []
    for r in rows:
        cells = [r[0].ljust(widths[0])] + [r[i].rjust(widths[i]) for i in range(1, 5)]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"


_CSV_FIELDS = (
    "model", "positive_class", "precision", "recall", "f1", "accuracy",
    "macro_precision", "macro_recall", "macro_f1",
) + tuple(f"cm{i}{j}" for i in LABELS for j in LABELS)


def write_report_csv(path, reports):
    """Machine-readable report: full-precision scores plus the flattened
    confusion matrix, one row per classifier."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_FIELDS)
        for rep in reports:
            row = [rep.name, rep.positive_class]
            row += [repr(v) for v in (rep.precision, rep.recall, rep.f1, rep.accuracy,
                                      rep.macro_precision, rep.macro_recall, rep.macro_f1)]
            row += [int(rep.confusion[i, j]) for i in LABELS for j in LABELS]
            writer.writerow(row)


def read_report_csv(path):
    """Inverse of write_report_csv."""
    reports = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != _CSV_FIELDS:
            raise ParseError(f"{path}: unrecognized report header")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(_CSV_FIELDS):
                raise ParseError(f"{path}:{lineno}: expected {len(_CSV_FIELDS)} fields, got {len(row)}")
            try:
                cm = np.array([int(v) for v in row[9:]], dtype=np.int64).reshape(3, 3)
                reports.append(MetricsReport(
                    name=row[0],
                    positive_class=int(row[1]),
                    precision=float(row[2]),
                    recall=float(row[3]),
                    f1=float(row[4]),
                    accuracy=float(row[5]),
                    macro_precision=float(row[6]),
                    macro_recall=float(row[7]),
                    macro_f1=float(row[8]),
                    confusion=cm,
                ))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from None
    return reports
