"""Regression metrics and per-(model, dataset) reports."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import MetricError

DATASETS = ("train", "validation", "test")
RESULTS_HEADER = ["model", "dataset", "n", "rmse", "relerror", "r2"]


def _pair(y_pred, y_true, min_len=1):
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    if len(y_pred) != len(y_true):
        raise MetricError(f"length mismatch: {len(y_pred)} predictions, {len(y_true)} targets")
    if len(y_true) < min_len:
        raise MetricError(f"need at least {min_len} value(s)")
    return y_pred, y_true


def rmse(y_pred, y_true) -> float:
    y_pred, y_true = _pair(y_pred, y_true)
    return float(np.sqrt(np.mean((y_pred - y_true) ** 2)))


def relerror(y_pred, y_true) -> float:
    """Mean absolute error as a percentage of the largest value seen.

    The denominator is the maximum over all predicted and true values of the
    evaluation set.
    """
    y_pred, y_true = _pair(y_pred, y_true)
    top = max(y_pred.max(), y_true.max())
    if not top > 0:
        raise MetricError("relative error needs a positive maximum value")
    return float(100.0 * np.mean(np.abs(y_pred - y_true)) / top)


def r2_score(y_pred, y_true) -> float:
    y_pred, y_true = _pair(y_pred, y_true, min_len=2)
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        raise MetricError("R^2 is undefined for constant targets")
    return 1.0 - float(np.sum((y_true - y_pred) ** 2)) / ss_tot


@dataclass(frozen=True)
class MetricsReport:
    model: str
    dataset: str
    rmse: float
    relerror: float
    r2: float
    n: int

    def row(self):
        return [self.model, self.dataset, str(self.n), repr(self.rmse), repr(self.relerror), repr(self.r2)]


def report(model_name, dataset, y_pred, y_true) -> MetricsReport:
    return MetricsReport(model_name, dataset, rmse(y_pred, y_true), relerror(y_pred, y_true),
                         r2_score(y_pred, y_true), len(np.ravel(y_true)))


def evaluate(model, datasets: dict, name: str | None = None) -> list[MetricsReport]:
    """One report per named ``(X, y)`` dataset, in the given order."""
    name = name or model.kind
    return [report(name, ds, model.predict(X), y) for ds, (X, y) in datasets.items()]


def write_results(reports, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(RESULTS_HEADER)
    for r in reports:
        w.writerow(r.row())


def read_results(fh) -> list[MetricsReport]:
    reader = csv.reader(fh)
    if next(reader, None) != RESULTS_HEADER:
        raise MetricError("bad results header")
    return [MetricsReport(m, d, float(a), float(b), float(c), int(n)) for m, d, n, a, b, c in reader]


def render_tables(reports, display_names=None) -> str:
    """Plain-text tables, one per dataset: Model | RMSE | RELERROR | R^2."""
    display_names = display_names or {}
    titles = {"train": "Training Set", "validation": "Validation Set", "test": "Test Set"}
    order = [d for d in DATASETS if any(r.dataset == d for r in reports)]
    order += sorted({r.dataset for r in reports} - set(order))
    out = []
    for ds in order:
        rows = [r for r in reports if r.dataset == ds]
        labels = [display_names.get(r.model, r.model) for r in rows]
        width = max([len("Model")] + [len(s) for s in labels])
        out.append(f"Supervised Training Results on {titles.get(ds, ds)}")
        out.append(f"{'Model':<{width}}  {'RMSE':>16}  {'RELERROR':>16}  {'R^2':>20}")
        for label, r in zip(labels, rows):
            out.append(f"{label:<{width}}  {r.rmse:>16.12g}  {r.relerror:>16.12g}  {r.r2:>20.15g}")
        out.append("")
    return "\n".join(out)
