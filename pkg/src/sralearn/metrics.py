"""Evaluation metrics with explicit tie handling.

`auc_roc` is the Mann-Whitney statistic computed from average ranks, so
ties contribute 1/2.  `auc_pr` is average precision with equal scores
grouped into a single cut point.  `tpr_topk` measures feature
identification: for each instance, the fraction of the known relevant
features recovered among the k largest-magnitude contributions, averaged
over instances (ties broken toward the lower feature index).
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

Array = np.ndarray


def _scores_labels(scores, labels) -> tuple[Array, Array]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels, dtype=np.float64).ravel()
    if s.shape != y.shape:
        raise ValueError(f"scores and labels differ in length: {s.size} vs {y.size}")
    if s.size == 0:
        raise ValueError("empty input")
    if not np.isin(np.unique(y), (0.0, 1.0)).all():
        raise ValueError("labels must be binary 0/1")
    return s, y


def _average_ranks(values: Array) -> Array:
    """1-based ranks; tied values share the mean of their rank range."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc_roc(scores, labels) -> float:
    """P(score+ > score-) + 0.5 P(tie), via the rank-sum identity."""
    s, y = _scores_labels(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc_roc needs both classes present")
    ranks = _average_ranks(s)
    rank_sum = float(ranks[y == 1.0].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auc_pr(scores, labels) -> float:
    """Average precision over descending-score cuts, ties grouped."""
    s, y = _scores_labels(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise ValueError("auc_pr needs at least one positive")
    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    ap = 0.0
    tp = fp = 0
    prev_recall = 0.0
    i = 0
    n = s.size
    while i < n:
        j = i
        while j + 1 < n and s_sorted[j + 1] == s_sorted[i]:
            j += 1
        tp += int(y_sorted[i : j + 1].sum())
        fp += (j - i + 1) - int(y_sorted[i : j + 1].sum())
        recall = tp / n_pos
        precision = tp / (tp + fp)
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return ap


def r2(y_true, y_pred) -> float:
    """Coefficient of determination, 1 - SSres/SStot."""
    y = np.asarray(y_true, dtype=np.float64).ravel()
    p = np.asarray(y_pred, dtype=np.float64).ravel()
    if y.shape != p.shape:
        raise ValueError(f"length mismatch: {y.size} vs {p.size}")
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ValueError("r2 undefined for constant targets")
    ss_res = float(((y - p) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def accuracy(y_true, y_pred) -> float:
    y = np.asarray(y_true).ravel()
    p = np.asarray(y_pred).ravel()
    if y.shape != p.shape:
        raise ValueError(f"length mismatch: {y.size} vs {p.size}")
    if y.size == 0:
        raise ValueError("empty input")
    return float(np.mean(y == p))


def topk_features(contributions: Array, k: int) -> Array:
    """Per-row indices of the k largest |contribution|, ties to lower index."""
    c = np.abs(np.asarray(contributions, dtype=np.float64))
    if c.ndim != 2:
        raise ValueError(f"contributions must be 2-D, got shape {c.shape}")
    if not 1 <= k <= c.shape[1]:
        raise ValueError(f"k must be in [1, {c.shape[1]}], got {k}")
    # stable sort on negated magnitudes keeps lower indices first among ties
    return np.argsort(-c, axis=1, kind="stable")[:, :k]


def tpr_topk(contributions: Array, relevant, k: int | None = None) -> float:
    """Mean fraction of the relevant feature set recovered in the top k.

    `relevant` holds 0-based column indices.  k defaults to the size of
    the relevant set (the usual protocol).
    """
    rel = sorted(set(int(i) for i in relevant))
    if not rel:
        raise ValueError("relevant feature set is empty")
    c = np.asarray(contributions, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError(f"contributions must be 2-D, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("contributions must be finite")
    if max(rel) >= c.shape[1] or min(rel) < 0:
        raise ValueError(f"relevant indices {rel} out of range for p={c.shape[1]}")
    if k is None:
        k = len(rel)
    top = topk_features(c, k)
    hits = np.isin(top, rel).sum(axis=1)
    return float(np.mean(hits / len(rel)))


@dataclass
class CvReport:
    """Per-fold metric values for one model, with mean and spread."""

    model: str
    metric: str
    values: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std(self) -> float:
        # population spread over exactly the k folds
        return float(np.std(self.values))

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("model,metric,fold,value\n")
        for fold, value in enumerate(self.values):
            out.write(f"{self.model},{self.metric},{fold},{value!r}\n")
        out.write(f"{self.model},{self.metric},mean,{self.mean!r}\n")
        out.write(f"{self.model},{self.metric},std,{self.std!r}\n")
        return out.getvalue()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())

    def __str__(self) -> str:
        return (f"{self.model} {self.metric}: {self.mean:.4f} +/- {self.std:.4f} "
                f"over {len(self.values)} folds")
