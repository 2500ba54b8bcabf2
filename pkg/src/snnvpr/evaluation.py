"""Place-recognition metrics, distance matrices and the SAD baseline."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError


@dataclass
class PRCurve:
    recall: np.ndarray
    precision: np.ndarray
    auc: float
    r_at_100p: float
    p_at_100r: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.recall.tolist(), self.precision.tolist()))

    def summary(self) -> dict:
        return {"auc": self.auc, "r_at_100p": self.r_at_100p, "p_at_100r": self.p_at_100r}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["recall", "precision"])
            for r, p in self.points:
                w.writerow([repr(r), repr(p)])

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def to_distance(scores: np.ndarray) -> np.ndarray:
    """Distance matrix ``max(scores) - scores``; lower means a better match."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        return scores.copy()
    return scores.max() - scores


def predictions_from_distance(D: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Best reference per query and its confidence ``max(D) - D[q, best]``."""
    D = np.asarray(D, dtype=np.float64)
    best = np.argmin(D, axis=1)
    conf = D.max() - D[np.arange(len(D)), best]
    return best, conf


def predictions_from_scores(scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Winning label per query and its score as the confidence."""
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    best = np.argmax(scores, axis=1)
    return best, scores[np.arange(len(scores)), best]


def pr_curve(predicted, confidence, truth) -> PRCurve:
    """Precision-recall sweep over the distinct confidence values, highest first.

    At threshold ``c`` every query with confidence ``>= c`` is accepted.
    Precision is correct / accepted, recall is correct / all queries (only
    exact label matches count). AUC is the trapezoid over the sweep points,
    with the first point's precision held flat back to recall 0.
    """
    predicted = np.asarray(predicted)
    confidence = np.asarray(confidence, dtype=np.float64)
    truth = np.asarray(truth)
    n = len(truth)
    if n == 0:
        raise ValidationError("pr_curve needs at least one query")
    if predicted.shape != (n,) or confidence.shape != (n,):
        raise ValidationError("predicted, confidence and truth must have the same length")

    order = np.argsort(-confidence, kind="stable")
    correct = (predicted == truth)[order].astype(np.int64)
    conf = confidence[order]
    tp = np.cumsum(correct)
    accepted = np.arange(1, n + 1)
    # last index of each run of equal confidences
    ends = np.flatnonzero(np.append(conf[1:] != conf[:-1], True))
    recall = tp[ends] / n
    precision = tp[ends] / accepted[ends]

    exact = precision == 1.0
    r100 = float(recall[exact].max()) if exact.any() else 0.0
    r = np.concatenate(([0.0], recall))
    p = np.concatenate(([precision[0]], precision))
    auc = math.fsum((r[1:] - r[:-1]) * (p[1:] + p[:-1]) / 2.0)
    return PRCurve(recall=recall, precision=precision, auc=auc,
                   r_at_100p=r100, p_at_100r=float(precision[-1]))


def sad_distance(qimg: np.ndarray, rimg: np.ndarray) -> float:
    """Mean absolute pixel difference between two equally sized images."""
    q = np.asarray(qimg, dtype=np.float64)
    r = np.asarray(rimg, dtype=np.float64)
    if q.shape != r.shape:
        raise ValidationError(f"image sizes differ: {q.shape} vs {r.shape}")
    return float(np.abs(q - r).mean())


def sad_matrix(queries, references, ref_labels=None) -> np.ndarray:
    """SAD between every query and reference image.

    With ``ref_labels`` the columns are labels and each entry is the smallest
    distance over that label's reference images.
    """
    Q = np.stack([np.asarray(q, dtype=np.float64).ravel() for q in queries])
    R = np.stack([np.asarray(r, dtype=np.float64).ravel() for r in references])
    if Q.shape[1] != R.shape[1]:
        raise ValidationError(f"image sizes differ: {Q.shape[1]} vs {R.shape[1]} pixels")
    D = np.abs(Q[:, None, :] - R[None, :, :]).mean(axis=2)
    if ref_labels is None:
        return D
    ref_labels = np.asarray(ref_labels)
    n_labels = int(ref_labels.max()) + 1
    out = np.full((len(Q), n_labels), np.inf)
    for l in range(n_labels):
        cols = ref_labels == l
        if cols.any():
            out[:, l] = D[:, cols].min(axis=1)
    return out


def sequence_aggregate(D: np.ndarray, L: int) -> np.ndarray:
    """Average each entry with its ``L - 1`` predecessors along the diagonal.

    ``D'[q, r] = mean(D[q - k, r - k])`` over ``k < L`` with both indices
    non-negative. Assumes aligned traverses at constant velocity.
    """
    if L < 1:
        raise ValidationError(f"sequence length must be >= 1, got {L}")
    D = np.asarray(D, dtype=np.float64)
    total = D.copy()
    count = np.ones_like(D)
    for k in range(1, L):
        if k >= D.shape[0] or k >= D.shape[1]:
            break
        total[k:, k:] += D[:-k, :-k]
        count[k:, k:] += 1.0
    return total / count


def write_matrix_csv(M: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in np.atleast_2d(M):
            w.writerow([repr(float(x)) for x in row])


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(x) for x in row] for row in csv.reader(fh) if row]
    return np.array(rows, dtype=np.float64)


def heatmap(M: np.ndarray) -> np.ndarray:
    """Linear map of a matrix to 8-bit, min to 0 and max to 255."""
    M = np.asarray(M, dtype=np.float64)
    lo, hi = M.min(), M.max()
    if hi == lo:
        return np.zeros(M.shape, dtype=np.uint8)
    return np.floor((M - lo) / (hi - lo) * 255.0 + 0.5).astype(np.uint8)
