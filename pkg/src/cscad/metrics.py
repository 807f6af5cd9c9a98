"""Detection quality metrics over id-aligned predictions.

The anomaly class is the positive class: TP counts anomalies flagged as
anomalies, FP normal samples flagged, FN anomalies missed. Zero
denominators resolve to 0.0 so degenerate predictors score rather than
crash.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import IdMismatch


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    stage_seconds: dict = field(default_factory=dict)

    @property
    def n_samples(self):
        return self.tp + self.fp + self.fn + self.tn


def confusion_counts(predicted, actual):
    """predicted/actual: boolean arrays, True = anomaly."""
    predicted = np.asarray(predicted, dtype=bool)
    actual = np.asarray(actual, dtype=bool)
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    tn = int(np.sum(~predicted & ~actual))
    return tp, fp, fn, tn


def report_from_counts(tp, fp, fn, tn):
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    denom = precision + recall
    f1 = 2.0 * precision * recall / denom if denom else 0.0
    return EvalReport(precision=precision, recall=recall, f1=f1, tp=tp, fp=fp, fn=fn, tn=tn)


def evaluate_predictions(pred_ids, pred_labels, true_ids, true_labels):
    """Align both sides by sample id, then count the confusion."""
    pred_ids = np.asarray(pred_ids, dtype=np.int64)
    true_ids = np.asarray(true_ids, dtype=np.int64)
    if len(pred_ids) != len(set(pred_ids.tolist())):
        raise IdMismatch("duplicate prediction ids")
    if sorted(pred_ids.tolist()) != sorted(true_ids.tolist()):
        raise IdMismatch(
            f"{len(pred_ids)} predicted ids do not cover the {len(true_ids)} ground-truth ids"
        )
    pred_order = np.argsort(pred_ids)
    true_order = np.argsort(true_ids)
    tp, fp, fn, tn = confusion_counts(
        np.asarray(pred_labels)[pred_order], np.asarray(true_labels)[true_order]
    )
    return report_from_counts(tp, fp, fn, tn)


def save_report_json(report, path):
    # timing lives in its own artifact so reports stay byte-reproducible
    payload = {
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "tp": report.tp,
        "fp": report.fp,
        "fn": report.fn,
        "tn": report.tn,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return EvalReport(**payload)


def format_report_text(report):
    lines = [
        f"precision {report.precision:.4f}",
        f"recall    {report.recall:.4f}",
        f"f1        {report.f1:.4f}",
        f"tp {report.tp}  fp {report.fp}  fn {report.fn}  tn {report.tn}",
        f"samples {report.n_samples}",
    ]
    return "\n".join(lines) + "\n"


def save_report_text(report, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_report_text(report))


def save_timings_json(stage_seconds, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(stage_seconds, fh, indent=2, sort_keys=True)
        fh.write("\n")
