"""Training, labeling, querying and evaluation on top of the network core."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import evaluation
from .assignment import SCHEMES, assign_standard, build_counts, predict, score_all
from .checkpoint import Checkpoint
from .config import RunConfig
from .data import DatasetManifest, write_pgm
from .errors import ValidationError
from .network import NetworkState, build_network, present
from .signal import encode_poisson, preprocess

log = logging.getLogger(__name__)

# Presentation-seed namespaces; a seed is (encoding seed, phase, epoch, index, attempt).
PHASE_TRAIN, PHASE_LABEL, PHASE_QUERY = 0, 1, 2
_PHASE_ORDER = 3


def prepare_images(images: Sequence[np.ndarray], cfg: RunConfig) -> list[np.ndarray]:
    return [preprocess(img, cfg.image_size, cfg.patch_size) for img in images]


def training_order(labels: np.ndarray, traverses: Sequence[str]) -> np.ndarray:
    """Interleave traverses place by place: (place 0, trav a), (place 0, trav b), ..."""
    rank = {t: i for i, t in enumerate(dict.fromkeys(traverses))}
    keys = [(int(l), rank[t]) for l, t in zip(labels, traverses)]
    return np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=np.int64)


def _state_from(cfg: RunConfig, W: np.ndarray, theta: np.ndarray) -> NetworkState:
    state = build_network(cfg.n_input, cfg.run.n_neurons, cfg.exc, cfg.inh, cfg.synapse, seed=cfg.run.seed)
    state.W[:] = W
    state.theta[:] = theta
    return state


def _check_finite(state: NetworkState, where: str) -> None:
    for name in ("W", "theta", "v_exc", "v_inh", "ge_exc", "gi_exc"):
        arr = getattr(state, name)
        if not np.isfinite(arr).all():
            bad = np.flatnonzero(~np.isfinite(arr.ravel()))
            raise FloatingPointError(
                f"non-finite {name} after {where}: {bad.size} entries, first at flat index {bad[0]}"
            )


def respond(state: NetworkState, images: Sequence[np.ndarray], cfg: RunConfig,
            phase: int, epoch: int = 0, threads: int = 1) -> np.ndarray:
    """Frozen-network spike counts for preprocessed images, one row per image.

    Every image starts from resting fast state with the shared ``W`` and
    ``theta``, so rows do not depend on order or on ``threads``.
    """
    enc = cfg.encoding
    n = len(images)
    out = np.zeros((n, state.n_exc), dtype=np.int64)

    def run(indices):
        local = state.copy()
        for i in indices:
            local.reset_fast_state()
            train = encode_poisson(images[i], enc, (enc.seed, phase, epoch, i, 0))
            out[i] = present(local, train, enc.t_present, enc.t_rest, learning=False, dt=enc.dt).counts_exc

    threads = max(1, min(int(threads), n))
    if threads == 1:
        run(range(n))
    else:
        chunks = [range(k, n, threads) for k in range(threads)]
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(run, chunks))
    return out


def train(reference: DatasetManifest, cfg: RunConfig, threads: int = 1,
          progress: Callable[[int, int], None] | None = None) -> Checkpoint:
    """Unsupervised training on all reference images, then a frozen labeling pass."""
    if not reference.images or len(reference.images) != len(reference.entries):
        raise ValidationError("reference manifest has no loaded images")
    images = prepare_images(reference.images, cfg)
    labels = reference.labels
    n_labels = int(labels.max()) + 1
    base_order = training_order(labels, [e.traverse for e in reference.entries])
    enc, rs = cfg.encoding, cfg.run

    state = build_network(cfg.n_input, rs.n_neurons, cfg.exc, cfg.inh, cfg.synapse, seed=rs.seed)
    presentations = 0
    for epoch in range(rs.epochs):
        if rs.shuffle:
            perm = np.random.default_rng((rs.seed, _PHASE_ORDER, epoch)).permutation(len(base_order))
            order = base_order[perm]
        else:
            order = base_order
        silent = 0
        for idx in order:
            boost = 0.0
            for attempt in range(rs.max_retries + 1):
                spikes = encode_poisson(images[idx], enc, (enc.seed, PHASE_TRAIN, epoch, int(idx), attempt), boost)
                record = present(state, spikes, enc.t_present, enc.t_rest, learning=True, dt=enc.dt)
                presentations += 1
                if record.total >= rs.retry_min_spikes:
                    break
                boost += rs.retry_boost
            else:
                silent += 1
            _check_finite(state, f"epoch {epoch}, image {idx}")
        log.info("epoch %d/%d done (%d presentations, %d images below %d spikes)",
                 epoch + 1, rs.epochs, presentations, silent, rs.retry_min_spikes)
        if progress:
            progress(epoch + 1, rs.epochs)

    records = []
    for p in range(rs.label_passes):
        counts = respond(state, images, cfg, PHASE_LABEL, epoch=p, threads=threads)
        records.extend(zip(labels.tolist(), counts))
    S = build_counts(records, n_labels)
    table = assign_standard(S)
    log.info("labeling: %d of %d neurons responsive", int((table.labels >= 0).sum()), rs.n_neurons)
    return Checkpoint(cfg, state.W.copy(), state.theta.copy(), S, table,
                      epochs_completed=rs.epochs, presentations=presentations)


@dataclass
class QueryResult:
    counts: np.ndarray       # (queries, neurons)
    scores: np.ndarray       # (queries, labels)
    predicted: np.ndarray
    confidence: np.ndarray
    scheme: str

    @property
    def distance(self) -> np.ndarray:
        return evaluation.to_distance(self.scores)

    def rescore(self, ckpt: Checkpoint, scheme: str) -> "QueryResult":
        return decode(ckpt, self.counts, scheme)


def decode(ckpt: Checkpoint, counts: np.ndarray, scheme: str) -> QueryResult:
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}")
    scores = score_all(counts, ckpt.assignment, ckpt.S_R, scheme, ckpt.config.run.gamma)
    predicted = predict(scores)
    confidence = scores[np.arange(len(scores)), predicted]
    return QueryResult(counts, scores, predicted, confidence, scheme)


def query(ckpt: Checkpoint, images: Sequence[np.ndarray], scheme: str | None = None,
          threads: int = 1) -> QueryResult:
    """Present query images to the frozen network and score them."""
    cfg = ckpt.config
    scheme = scheme or cfg.run.scheme
    if scheme not in SCHEMES:
        raise ValidationError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}")
    prepared = prepare_images(images, cfg)
    for i, img in enumerate(prepared):
        if img.size != ckpt.W.shape[0]:
            raise ValidationError(f"query {i} has {img.size} pixels, network expects {ckpt.W.shape[0]}")
    state = _state_from(cfg, ckpt.W, ckpt.theta)
    counts = respond(state, prepared, cfg, PHASE_QUERY, threads=threads)
    return decode(ckpt, counts, scheme)


def write_predictions(path, predicted, confidence, paths=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "path", "predicted", "confidence"])
        for i, (p, c) in enumerate(zip(predicted, confidence)):
            w.writerow([i, "" if paths is None else Path(paths[i]).as_posix(), int(p), repr(float(c))])


def read_predictions(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"predicted", "confidence"} <= set(rows[0]):
        raise ValidationError(f"{path}: expected columns predicted,confidence")
    return (np.array([int(r["predicted"]) for r in rows], dtype=np.int64),
            np.array([float(r["confidence"]) for r in rows]))


def write_distance(out_dir, D: np.ndarray, stem: str = "distance") -> None:
    out = Path(out_dir)
    evaluation.write_matrix_csv(D, out / f"{stem}.csv")
    write_pgm(out / f"{stem}.pgm", evaluation.heatmap(D))


def evaluate(predicted, confidence, truth, out_dir, distance: np.ndarray | None = None) -> evaluation.PRCurve:
    """PR curve plus ``pr.csv``, ``summary.json`` and, when given, the distance matrix files."""
    predicted, truth = np.asarray(predicted), np.asarray(truth)
    if len(predicted) != len(truth):
        raise ValidationError(f"{len(predicted)} predictions for {len(truth)} ground-truth labels")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curve = evaluation.pr_curve(predicted, confidence, truth)
    curve.write_csv(out / "pr.csv")
    curve.write_json(out / "summary.json")
    if distance is not None:
        write_distance(out, distance)
    return curve


def sad_baseline(reference: DatasetManifest, queries: DatasetManifest, cfg: RunConfig) -> np.ndarray:
    """Query-by-label SAD distances on preprocessed images (min over reference traverses)."""
    refs = prepare_images(reference.images, cfg)
    qs = prepare_images(queries.images, cfg)
    return evaluation.sad_matrix(qs, refs, reference.labels)
