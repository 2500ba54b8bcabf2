"""Neuron-to-place assignment and decoding of query spike counts.

Four decoding schemes turn a query's per-neuron spike counts into per-label
scores (higher is better):

``standard``
    Sum the counts of the neurons whose strongest training response was the
    label.
``weighted``
    Shrink the counts of neurons that responded to many labels, split each
    neuron's count across its labels by training response share, and
    penalize labels whose training-time responders stayed silent.
``prob``
    Min-max normalize the query counts, divide by their total, then score
    as ``standard``.
``weighted_prob``
    Weighted counts collapsed per neuron, normalized as in ``prob``, then
    summed over every neuron that responded to the label in training.

A neuron "learned" label ``l`` when it fired at least once for ``l`` during
the labeling pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ValidationError

SCHEMES = ("standard", "weighted", "prob", "weighted_prob")
UNASSIGNED = -1


@dataclass
class AssignmentTable:
    labels: np.ndarray   # argmax label per neuron, UNASSIGNED for silent rows
    omega: np.ndarray    # number of labels each neuron learned
    frac: np.ndarray     # (neurons, labels) share of each neuron's training spikes
    learned: np.ndarray  # (neurons, labels) bool, S_R > 0

    @property
    def n_labels(self) -> int:
        return self.frac.shape[1]

    def members(self, label: int) -> np.ndarray:
        """Neurons whose argmax assignment is ``label``."""
        return np.flatnonzero(self.labels == label)

    @property
    def M(self) -> list[np.ndarray]:
        return [self.members(l) for l in range(self.n_labels)]


def build_counts(records: Iterable[tuple[int, np.ndarray]], n_labels: int | None = None) -> np.ndarray:
    """Sum labeling-pass spike counts per (neuron, label).

    ``records`` yields ``(label, counts)`` pairs, one per presentation.
    Returns an ``(n_neurons, n_labels)`` float matrix.
    """
    records = [(int(l), np.asarray(c)) for l, c in records]
    if not records:
        raise ValidationError("no labeling records")
    n_neurons = records[0][1].shape[0]
    seen = {l for l, _ in records}
    if n_labels is None:
        n_labels = max(seen) + 1
    missing = sorted(set(range(n_labels)) - seen)
    if missing:
        raise ValidationError(f"labels without any labeling presentation: {missing}")
    S = np.zeros((n_neurons, n_labels))
    for label, counts in records:
        if counts.shape != (n_neurons,):
            raise ValidationError(
                f"record for label {label} has {counts.shape[0]} neurons, expected {n_neurons}"
            )
        if not 0 <= label < n_labels:
            raise ValidationError(f"label {label} outside 0..{n_labels - 1}")
        S[:, label] += counts
    return S


def assign_standard(S: np.ndarray) -> AssignmentTable:
    """Assign each responsive neuron to its argmax label (ties to the lowest index)."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[1] < 1:
        raise ValidationError(f"spike-count matrix must be (neurons, labels), got {S.shape}")
    if (S < 0).any():
        raise ValidationError("spike counts must be nonnegative")
    responsive = S.max(axis=1) > 0
    labels = np.where(responsive, S.argmax(axis=1), UNASSIGNED)
    learned = S > 0
    totals = S.sum(axis=1, keepdims=True)
    frac = np.divide(S, totals, out=np.zeros_like(S), where=totals > 0)
    return AssignmentTable(
        labels=labels.astype(np.int64),
        omega=learned.sum(axis=1).astype(np.int64),
        frac=frac,
        learned=learned,
    )


def score_standard(q: np.ndarray, A: AssignmentTable) -> np.ndarray:
    """Per-label sum of query counts over argmax-assigned neurons."""
    q = np.asarray(q, dtype=np.float64)
    scores = np.zeros(A.n_labels)
    assigned = A.labels >= 0
    np.add.at(scores, A.labels[assigned], q[assigned])
    return scores


def weight_involvement(q: np.ndarray, A: AssignmentTable, gamma: float, R: int) -> np.ndarray:
    """Divide the counts of neurons that learned more than ``gamma * R`` labels by their label count.

    Neurons that learned nothing contribute 0.
    """
    if not 0 < gamma <= 1:
        raise ValidationError(f"gamma must lie in (0, 1], got {gamma}")
    q = np.asarray(q, dtype=np.float64)
    omega = A.omega.astype(np.float64)
    out = np.where(omega <= gamma * R, q, q / np.maximum(omega, 1.0))
    out[A.omega == 0] = 0.0
    return out


def weight_response_strength(counts: np.ndarray, A: AssignmentTable) -> np.ndarray:
    """Split each neuron's count across its learned labels by training response share."""
    return np.asarray(counts, dtype=np.float64)[:, None] * A.frac


def label_fire_factors(q: np.ndarray, S: np.ndarray) -> np.ndarray:
    """Training-spike share of each label's learners that also fired for the query."""
    fired = (np.asarray(q) > 0).astype(np.float64)
    denom = S.sum(axis=0)
    num = fired @ S
    return np.divide(num, denom, out=np.zeros_like(denom), where=denom > 0)


def penalize_silent(weighted: np.ndarray, q: np.ndarray, S: np.ndarray) -> np.ndarray:
    return weighted * label_fire_factors(q, S)[None, :]


def probability_normalize(v: np.ndarray) -> np.ndarray:
    """``(v - min) / (max - min) / sum(v)``; constant or all-zero input gives zeros."""
    v = np.asarray(v, dtype=np.float64)
    total = v.sum()
    lo, hi = v.min(), v.max()
    if hi == lo or total == 0:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo) / total


def weighted_counts(q: np.ndarray, A: AssignmentTable, S: np.ndarray, gamma: float) -> np.ndarray:
    """The (neurons, labels) matrix after involvement, strength and silence weighting."""
    involved = weight_involvement(q, A, gamma, A.n_labels)
    return penalize_silent(weight_response_strength(involved, A), q, S)


def score(q: np.ndarray, A: AssignmentTable, S: np.ndarray, scheme: str,
          gamma: float = 0.02) -> np.ndarray:
    """Per-label scores for one query under ``scheme``."""
    q = np.asarray(q, dtype=np.float64)
    if scheme == "standard":
        return score_standard(q, A)
    if scheme == "prob":
        return score_standard(probability_normalize(q), A)
    if scheme == "weighted":
        return weighted_counts(q, A, S, gamma).sum(axis=0)
    if scheme == "weighted_prob":
        per_neuron = weighted_counts(q, A, S, gamma).sum(axis=1)
        return probability_normalize(per_neuron) @ A.learned.astype(np.float64)
    raise ValidationError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}")


def score_all(Q: np.ndarray, A: AssignmentTable, S: np.ndarray, scheme: str,
              gamma: float = 0.02) -> np.ndarray:
    """Score every row of a ``(queries, neurons)`` count matrix."""
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}")
    return np.stack([score(q, A, S, scheme, gamma) for q in Q]) if len(Q) else np.zeros((0, A.n_labels))


def predict(scores: np.ndarray) -> np.ndarray:
    """Argmax label per query row; ties go to the lowest label."""
    return np.argmax(np.atleast_2d(scores), axis=1)
