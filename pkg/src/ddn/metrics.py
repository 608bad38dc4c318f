"""Multi-label evaluation metrics.

Set-based scores compare hard predictions with the truth; LRAP and mAP
rank labels by per-label scores and are computed only when scores are given.
Conventions for empty sets: an example whose true and predicted label sets
are both empty scores 1 on Jaccard and example-F1, and a label whose F1 has a
zero denominator contributes 0 to the macro average.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class EvalReport:
    sa: float
    ji: float
    hl: float
    macro_f1: float
    micro_f1: float
    example_f1: float
    lrap: float | None
    map: float | None
    n_examples: int

    def to_dict(self) -> dict:
        return asdict(self)


def _as_bits(y, name: str) -> np.ndarray:
    a = np.asarray(y)
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array of label vectors, got shape {a.shape}")
    if a.size and not np.all((a == 0) | (a == 1)):
        raise ValueError(f"{name} must contain only 0/1 values")
    return a.astype(bool)


def _safe_div(num: np.ndarray, den: np.ndarray, empty: float) -> np.ndarray:
    out = np.full(np.shape(num), empty, dtype=float)
    np.divide(num, den, out=out, where=den > 0)
    return out


def _sum(a) -> float:
    # fsum keeps the result independent of summation order
    return math.fsum(np.ravel(a).tolist())


def label_ranking_average_precision(y_true, scores) -> float:
    """Mean over examples of the precision at each true label's rank.

    Ties are ranked pessimistically.  Examples with no true labels, or with
    every label true, score 1.
    """
    t = _as_bits(y_true, "y_true")
    s = np.asarray(scores, dtype=float)
    if s.shape != t.shape:
        raise ValueError(f"scores shape {s.shape} does not match labels {t.shape}")
    per = []
    for row_t, row_s in zip(t, s):
        k = int(row_t.sum())
        if k == 0 or k == row_t.size:
            per.append(1.0)
            continue
        rel = row_s[row_t]
        rank = (row_s[None, :] >= rel[:, None]).sum(axis=1)
        rank_rel = (rel[None, :] >= rel[:, None]).sum(axis=1)
        per.append(_sum(rank_rel / rank) / k)
    return _sum(per) / len(per) if per else 0.0


def average_precision(truth: np.ndarray, score: np.ndarray) -> float:
    """Step-wise area under the precision-recall curve; tied scores form one step."""
    truth = np.asarray(truth, dtype=bool)
    score = np.asarray(score, dtype=float)
    pos = int(truth.sum())
    if pos == 0:
        raise ValueError("average precision is undefined without positives")
    order = np.argsort(-score, kind="stable")
    s, t = score[order], truth[order]
    tp = np.cumsum(t)
    fp = np.cumsum(~t)
    # keep only the last index of each run of equal scores
    last = np.r_[np.flatnonzero(np.diff(s) != 0), s.size - 1]
    tp, fp = tp[last], fp[last]
    precision = tp / (tp + fp)
    recall = tp / pos
    return _sum(np.diff(np.r_[0.0, recall]) * precision)


def mean_average_precision(y_true, scores) -> float:
    """Per-label average precision over examples, averaged over labels with a positive."""
    t = _as_bits(y_true, "y_true")
    s = np.asarray(scores, dtype=float)
    if s.shape != t.shape:
        raise ValueError(f"scores shape {s.shape} does not match labels {t.shape}")
    aps = [average_precision(t[:, j], s[:, j]) for j in range(t.shape[1]) if t[:, j].any()]
    return _sum(aps) / len(aps) if aps else 0.0


def evaluate(y_true, y_pred, scores=None) -> EvalReport:
    t = _as_bits(y_true, "y_true")
    p = _as_bits(y_pred, "y_pred")
    if t.shape != p.shape:
        raise ValueError(f"y_true shape {t.shape} does not match y_pred shape {p.shape}")
    m, n = t.shape
    if m == 0:
        raise ValueError("no examples to evaluate")

    inter = (t & p).sum(axis=1)
    union = (t | p).sum(axis=1)
    sizes = t.sum(axis=1) + p.sum(axis=1)
    sa = _sum(np.all(t == p, axis=1)) / m
    ji = _sum(_safe_div(inter, union, 1.0)) / m
    hl = _sum(t != p) / (m * n) if n else 0.0
    example_f1 = _sum(_safe_div(2 * inter, sizes, 1.0)) / m

    tp = (t & p).sum(axis=0)
    fp = (~t & p).sum(axis=0)
    fn = (t & ~p).sum(axis=0)
    macro_f1 = _sum(_safe_div(2 * tp, 2 * tp + fp + fn, 0.0)) / n if n else 0.0
    TP, FP, FN = int(tp.sum()), int(fp.sum()), int(fn.sum())
    micro_f1 = 2 * TP / (2 * TP + FP + FN) if (2 * TP + FP + FN) else 0.0

    lrap = mAP = None
    if scores is not None:
        lrap = label_ranking_average_precision(t, scores)
        mAP = mean_average_precision(t, scores)
    return EvalReport(
        sa=sa,
        ji=ji,
        hl=hl,
        macro_f1=macro_f1,
        micro_f1=micro_f1,
        example_f1=example_f1,
        lrap=lrap,
        map=mAP,
        n_examples=m,
    )
