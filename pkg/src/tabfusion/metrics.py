"""Binary-classification metrics: cross-entropy, ROC curves, AUC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Shared with the training losses so reported BCE matches the optimized one.
PROB_CLIP = 1e-12


def clip_probs(p: np.ndarray) -> np.ndarray:
    """Clip probabilities away from {0, 1} before any log is taken."""
    return np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)


def sigmoid(z) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    t = np.exp(-np.abs(z))
    return np.where(z >= 0.0, 1.0 / (1.0 + t), t / (1.0 + t))


def logit(p: float) -> float:
    return float(np.log(p) - np.log1p(-p))


def bce(y, p) -> float:
    """Mean binary cross-entropy of predicted probabilities against 0/1 labels."""
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if y.size == 0:
        raise ValueError("bce requires at least one example")
    if y.shape != p.shape:
        raise ValueError(f"label/probability shape mismatch: {y.shape} vs {p.shape}")
    p = clip_probs(p)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


@dataclass(frozen=True)
class RocCurve:
    """ROC points from (0,0) to (1,1); thresholds[i] is the cut producing points[i]."""

    points: tuple[tuple[float, float], ...]
    thresholds: tuple[float, ...]


@dataclass(frozen=True)
class EvalReport:
    model: str
    auc: float
    bce: float
    n: int
    positives: int


def _class_counts(y: np.ndarray) -> tuple[int, int]:
    n_pos = int(np.sum(y == 1))
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes must be present")
    return n_pos, n_neg


def roc_curve(y, s) -> RocCurve:
    """Sweep thresholds over the distinct scores, descending, grouping ties."""
    y = np.asarray(y, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    n_pos, n_neg = _class_counts(y)
    order = np.argsort(-s, kind="stable")
    ys, ss = y[order], s[order]
    tp = np.cumsum(ys)
    fp = np.cumsum(1.0 - ys)
    # one point per tie group: last index of each run of equal scores
    idx = np.concatenate([np.nonzero(np.diff(ss))[0], [ss.size - 1]])
    points = [(0.0, 0.0)] + list(zip((fp[idx] / n_neg).tolist(), (tp[idx] / n_pos).tolist()))
    thresholds = [float("inf")] + ss[idx].tolist()
    return RocCurve(points=tuple(points), thresholds=tuple(thresholds))


def _midranks(s: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean rank of their group."""
    order = np.argsort(s, kind="stable")
    ss = s[order]
    start = np.concatenate([[0], np.nonzero(np.diff(ss))[0] + 1])
    end = np.concatenate([start[1:], [ss.size]])
    ranks = np.empty(ss.size, dtype=np.float64)
    ranks[order] = np.repeat((start + end + 1) / 2.0, end - start)
    return ranks


def auc(y, s) -> float:
    """Probability a random positive outranks a random negative, ties half-credited.

    Computed via the rank statistic; equals the trapezoidal area under
    roc_curve(y, s).
    """
    y = np.asarray(y, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    n_pos, n_neg = _class_counts(y)
    rank_sum = float(np.sum(_midranks(s)[y == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def evaluate(model_name: str, y, p) -> EvalReport:
    y_arr = np.asarray(y)
    return EvalReport(
        model=model_name,
        auc=auc(y, p),
        bce=bce(y, p),
        n=int(y_arr.size),
        positives=int(np.sum(y_arr == 1)),
    )


def format_report_table(reports: list[EvalReport]) -> str:
    """Aligned plain-text table with one row per model."""
    width = max(len("Model"), *(len(r.model) for r in reports))
    lines = [f"{'Model':<{width}}  {'AUC':>8}  {'BCE':>8}"]
    for r in reports:
        lines.append(f"{r.model:<{width}}  {r.auc:>8.4f}  {r.bce:>8.4f}")
    return "\n".join(lines)


def roc_points_csv(curve: RocCurve) -> str:
    """CSV dump of ROC points for external plotting."""
    lines = ["fpr,tpr,threshold"]
    for (fpr, tpr), thr in zip(curve.points, curve.thresholds):
        lines.append(f"{fpr!r},{tpr!r},{thr!r}")
    return "\n".join(lines) + "\n"
