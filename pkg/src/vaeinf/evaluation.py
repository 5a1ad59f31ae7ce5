"""Threshold-free and threshold-based metrics, and the validation/test tau sweep.

Scores are "higher means more anomalous"; labels use 1 = majority, 2 = minority.
Undefined quantities (a class is absent) are returned as ``None``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .data import MAJORITY, MINORITY


@dataclass
class ErrorRates:
    type1: float | None
    type2: float | None
    tp: int
    fp: int
    tn: int
    fn: int


def _as_arrays(scores, labels):
    s = np.asarray(scores, dtype=float).ravel()
    y = np.asarray(labels, dtype=int).ravel()
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    return s, y


def type1_type2(scores, labels, tau) -> ErrorRates:
    """Error rates of the rule "minority iff score > tau"."""
    s, y = _as_arrays(scores, labels)
    flagged = s > tau
    maj, mino = y == MAJORITY, y == MINORITY
    fp = int(np.sum(flagged & maj))
    tn = int(np.sum(~flagged & maj))
    tp = int(np.sum(flagged & mino))
    fn = int(np.sum(~flagged & mino))
    r1 = fp / (fp + tn) if fp + tn else None
    r2 = fn / (fn + tp) if fn + tp else None
    return ErrorRates(r1, r2, tp, fp, tn, fn)


def auc_roc(scores, labels) -> float | None:
    """Mann-Whitney AUC with mid-ranks for ties."""
    s, y = _as_arrays(scores, labels)
    pos = y == MINORITY
    n2, n1 = int(pos.sum()), int((~pos).sum())
    if n1 == 0 or n2 == 0:
        return None
    ranks = rankdata(s)
    u = ranks[pos].sum() - n2 * (n2 + 1) / 2.0
    return float(u / (n1 * n2))


def _descending_order(s):
    # stable: equal scores keep their original order
    return np.argsort(-s, kind="stable")


def auc_pr(scores, labels) -> float | None:
    """Average precision: mean over minority samples of precision at their rank."""
    s, y = _as_arrays(scores, labels)
    hits = (y[_descending_order(s)] == MINORITY)
    n_pos = int(hits.sum())
    if n_pos == 0:
        return None
    precision_at = np.cumsum(hits) / np.arange(1, hits.size + 1)
    return float(precision_at[hits].sum() / n_pos)


def flag_top_fraction(scores, rho) -> np.ndarray:
    """Boolean mask marking the ceil(rho * N) highest scores."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must lie in (0, 1)")
    s = np.asarray(scores, dtype=float).ravel()
    n_flag = math.ceil(rho * s.size)
    mask = np.zeros(s.size, dtype=bool)
    mask[_descending_order(s)[:n_flag]] = True
    return mask


def f1_from_counts(tp, fp, fn) -> float:
    return 2 * tp / (2 * tp + fp + fn) if tp else 0.0


@dataclass
class MetricsReport:
    split: str
    auc_roc: float | None
    auc_pr: float | None
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    rho: float

    def to_dict(self):
        return asdict(self)


def f1_at_proportion(scores, labels, rho, split: str = "test") -> MetricsReport:
    s, y = _as_arrays(scores, labels)
    flagged = flag_top_fraction(s, rho)
    mino = y == MINORITY
    tp = int(np.sum(flagged & mino))
    fp = int(np.sum(flagged & ~mino))
    fn = int(np.sum(~flagged & mino))
    tn = int(np.sum(~flagged & ~mino))
    return MetricsReport(split, auc_roc(s, y), auc_pr(s, y), f1_from_counts(tp, fp, fn), tp, fp, tn, fn, float(rho))


def metrics_report(scores, labels, rho, split: str = "test") -> MetricsReport:
    return f1_at_proportion(scores, labels, rho, split)


@dataclass
class ErrorCurves:
    tau: np.ndarray
    type1_val: np.ndarray
    type2_val: np.ndarray
    type1_test: np.ndarray
    type2_test: np.ndarray
    mad: float

    COLUMNS = ("tau", "type1_val", "type2_val", "type1_test", "type2_test")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for row in zip(*(getattr(self, c) for c in self.COLUMNS)):
            w.writerow(["" if (isinstance(v, float) and math.isnan(v)) else repr(float(v)) for v in row])
        return buf.getvalue()


def _curve(scores, labels, grid):
    r1 = np.full(grid.size, np.nan)
    r2 = np.full(grid.size, np.nan)
    for i, tau in enumerate(grid):
        er = type1_type2(scores, labels, tau)
        if er.type1 is not None:
            r1[i] = er.type1
        if er.type2 is not None:
            r2[i] = er.type2
    return r1, r2


def threshold_sweep(val_scores, val_labels, test_scores, test_labels, n_points: int = 100) -> ErrorCurves:
    """Type-I/II curves on both splits over a uniform tau grid spanning the pooled scores."""
    vs, vy = _as_arrays(val_scores, val_labels)
    ts, ty = _as_arrays(test_scores, test_labels)
    pooled = np.concatenate([vs, ts])
    grid = np.linspace(pooled.min(), pooled.max(), n_points)
    r1v, r2v = _curve(vs, vy, grid)
    r1t, r2t = _curve(ts, ty, grid)
    mad = float(np.nanmean(np.abs(r1v - r1t)))
    return ErrorCurves(grid, r1v, r2v, r1t, r2t, mad)
