"""Partial-label datasets: CSV ingestion, splitting and candidate corruption.

CSV layout: header ``f0,...,f{q-1},candidates,true``; ``candidates`` holds
semicolon-separated zero-based class indices and ``true`` one index or is
empty.
"""
import csv
import json
import logging
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import objectives
from .models import ModelSpec, PredictiveModel, predict
from .numeric.optim import adam_step
from .numeric.random import RngState

log = logging.getLogger(__name__)


class DatasetError(ValueError):
    """Input data violates the partial-label format or invariants."""


@dataclass(frozen=True)
class PllDataset:
    features: np.ndarray
    candidates: np.ndarray
    true_labels: Optional[np.ndarray] = None
    class_count: int = 0
    split_tag: str = "train"

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        cand = np.asarray(self.candidates)
        if x.ndim != 2 or cand.ndim != 2 or x.shape[0] != cand.shape[0]:
            raise DatasetError("features and candidates must be matrices with equal row counts")
        if not np.all((cand == 0) | (cand == 1)):
            raise DatasetError("candidate entries must be exactly 0 or 1")
        cand = cand.astype(np.int8)
        empty = np.nonzero(cand.sum(axis=1) == 0)[0]
        if empty.size:
            raise DatasetError(f"row {empty[0]} has an empty candidate set")
        c = self.class_count or cand.shape[1]
        if cand.shape[1] != c:
            raise DatasetError(f"candidate matrix has {cand.shape[1]} columns, expected {c}")
        y = self.true_labels
        if y is not None:
            y = np.asarray(y, dtype=np.int64)
            if y.shape != (x.shape[0],) or np.any(y < 0) or np.any(y >= c):
                raise DatasetError("true labels must be class indices, one per row")
            missing = np.nonzero(cand[np.arange(y.size), y] != 1)[0]
            if missing.size:
                raise DatasetError(f"row {missing[0]}: true label {y[missing[0]]} not in candidate set")
        if self.split_tag not in ("train", "test"):
            raise DatasetError(f"split_tag must be train or test, got {self.split_tag!r}")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "candidates", cand)
        object.__setattr__(self, "true_labels", y)
        object.__setattr__(self, "class_count", c)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def avg_candidates(self):
        return float(self.candidates.sum(axis=1).mean())

    def subset(self, idx, split_tag=None):
        idx = np.asarray(idx)
        return PllDataset(
            self.features[idx],
            self.candidates[idx],
            None if self.true_labels is None else self.true_labels[idx],
            self.class_count,
            split_tag or self.split_tag,
        )

    def with_candidates(self, candidates):
        return replace(self, candidates=candidates)


@dataclass
class CsvSchema:
    standardize: bool = False
    class_count: Optional[int] = None


def _parse_indices(cell, row):
    cell = cell.strip()
    if not cell:
        return []
    out = []
    for tok in cell.split(";"):
        tok = tok.strip()
        try:
            out.append(int(tok))
        except ValueError:
            raise DatasetError(f"row {row}: candidate entry {tok!r} is not a class index") from None
    return out


def load_csv(path, schema=None):
    """Read and validate a PLL CSV; optionally z-score the feature columns."""
    schema = schema or CsvSchema()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[-2:] != ["candidates", "true"]:
            raise DatasetError("header must end with 'candidates,true'")
        q = len(header) - 2
        feats, cands, trues = [], [], []
        for r, line in enumerate(reader):
            if not line:
                continue
            if len(line) != q + 2:
                raise DatasetError(f"row {r}: expected {q + 2} fields, got {len(line)}")
            try:
                feats.append([float(v) for v in line[:q]])
            except ValueError:
                raise DatasetError(f"row {r}: non-numeric feature") from None
            cands.append(_parse_indices(line[q], r))
            t = line[q + 1].strip()
            trues.append(int(t) if t else None)
    if not feats:
        raise DatasetError("no data rows")
    seen = [i for c in cands for i in c] + [t for t in trues if t is not None]
    c = schema.class_count or (max(seen) + 1)
    cand = np.zeros((len(cands), c), dtype=np.int8)
    for r, idx in enumerate(cands):
        if any(i < 0 or i >= c for i in idx):
            raise DatasetError(f"row {r}: candidate index out of range [0, {c})")
        cand[r, idx] = 1
    has_true = [t is not None for t in trues]
    if any(has_true) and not all(has_true):
        raise DatasetError("true labels must be given for all rows or none")
    y = np.array(trues, dtype=np.int64) if all(has_true) else None
    x = np.array(feats, dtype=np.float64)
    if schema.standardize:
        x = standardize(x)
    return PllDataset(x, cand, y, c)


def standardize(x):
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    return (x - mu) / np.where(sd > 0, sd, 1.0)


def write_csv(dataset, path):
    q = dataset.features.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{i}" for i in range(q)] + ["candidates", "true"])
        for i in range(dataset.n):
            cand = ";".join(str(j) for j in np.nonzero(dataset.candidates[i])[0])
            true = "" if dataset.true_labels is None else str(int(dataset.true_labels[i]))
            w.writerow([repr(float(v)) for v in dataset.features[i]] + [cand, true])


@dataclass
class CorruptionConfig:
    mode: str = "uniform"
    xi_uniform: float = 0.5
    clean_model_spec: ModelSpec = field(default_factory=ModelSpec)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("uniform", "instance_dependent"):
            raise ValueError(f"unknown corruption mode {self.mode!r}")
        if not 0 < self.xi_uniform < 1:
            raise ValueError("xi_uniform must lie strictly between 0 and 1")


@dataclass
class CorruptionReport:
    avg_candidates: float
    per_class_flip_rate: list
    true_label_coverage: float
    mode: str = ""
    seed: Optional[int] = None

    def to_json(self):
        return json.dumps(asdict(self), indent=2)


def _require_clean(clean):
    if clean.true_labels is None:
        raise DatasetError("corruption needs true labels")
    onehot = np.zeros_like(clean.candidates)
    onehot[np.arange(clean.n), clean.true_labels] = 1
    if not np.array_equal(onehot, clean.candidates):
        raise DatasetError("corruption expects singleton candidate sets equal to the true labels")
    return onehot


def _report(out, y, c, mode, seed):
    flip = []
    for j in range(c):
        others = y != j
        flip.append(float(out[others, j].mean()) if others.any() else 0.0)
    coverage = float(out[np.arange(y.size), y].mean())
    return CorruptionReport(float(out.sum(axis=1).mean()), flip, coverage, mode, seed)


def _flip(clean, xi, rng, mode):
    onehot = _require_clean(clean)
    draws = rng.gen.random(onehot.shape)
    out = np.where(onehot == 1, 1, (draws < xi).astype(np.int8)).astype(np.int8)
    seed = getattr(rng.seq, "entropy", None)
    return clean.with_candidates(out), _report(out, clean.true_labels, clean.class_count, mode, seed)


def corrupt_uniform(clean, xi, rng):
    """Flip every incorrect label into the candidate set with probability xi."""
    if not 0 <= xi <= 1:
        raise ValueError("xi must be a probability")
    return _flip(clean, np.full(clean.candidates.shape, float(xi)), rng, "uniform")


def flip_probabilities(probs, true_labels):
    """Confidence over each incorrect label divided by the largest incorrect one.

    Rows where every incorrect confidence is zero get probability 0 for all.
    """
    probs = np.asarray(probs, dtype=np.float64)
    rows = np.arange(probs.shape[0])
    wrong = probs.copy()
    wrong[rows, true_labels] = 0.0
    top = wrong.max(axis=1, keepdims=True)
    xi = np.where(top > 0, wrong / np.where(top > 0, top, 1.0), 0.0)
    xi[rows, true_labels] = 0.0
    return xi


def corrupt_instance_dependent(clean, clean_model, rng):
    """Instance-dependent candidates from a clean model's softmax confidences."""
    probs = predict(clean_model, clean.features)
    if probs.shape[1] != clean.class_count:
        raise DatasetError("clean model output size does not match the class count")
    xi = flip_probabilities(probs, clean.true_labels)
    return _flip(clean, xi, rng, "instance_dependent")


def iterate_minibatches(n, batch_size, rng):
    order = rng.gen.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


def train_clean_model(clean, spec, rng):
    """Fit the predictive model with cross-entropy on the true labels."""
    if clean.true_labels is None:
        raise DatasetError("clean model training needs true labels")
    model = PredictiveModel.from_spec(spec, clean.features.shape[1], clean.class_count, rng.stream("init"))
    onehot = np.zeros((clean.n, clean.class_count))
    onehot[np.arange(clean.n), clean.true_labels] = 1.0
    shuffle = rng.stream("shuffle")
    for epoch in range(spec.epochs):
        for batch in iterate_minibatches(clean.n, spec.batch_size, shuffle):
            logits, _ = model.forward(clean.features[batch])
            loss = objectives.risk_estimator(logits, onehot[batch], onehot[batch])
            if not np.isfinite(loss.item()):
                raise FloatingPointError(f"non-finite clean-model loss at epoch {epoch}")
            loss.backward()
            adam_step(model.store, spec.lr, spec.weight_decay)
    return model


def corrupt(clean, config):
    """Dispatch on ``config.mode``; returns (dataset, report, clean_model or None)."""
    root = RngState(config.seed)
    if config.mode == "uniform":
        ds, rep = corrupt_uniform(clean, config.xi_uniform, root.stream("corruption"))
        rep.seed = config.seed
        return ds, rep, None
    model = train_clean_model(clean, config.clean_model_spec, root.stream("clean-model"))
    ds, rep = corrupt_instance_dependent(clean, model, root.stream("corruption"))
    rep.seed = config.seed
    return ds, rep, model


def write_report(report, path):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(report.to_json() + "\n")
    os.replace(tmp, path)


def make_blobs(n, centers, scale=1.0, seed=0):
    """Gaussian blobs with equal class sizes; returns a clean singleton dataset."""
    centers = np.asarray(centers, dtype=np.float64)
    c, q = centers.shape
    gen = RngState(seed).stream("blobs").gen
    y = np.arange(n) % c
    gen.shuffle(y)
    x = centers[y] + scale * gen.standard_normal((n, q))
    cand = np.zeros((n, c), dtype=np.int8)
    cand[np.arange(n), y] = 1
    return PllDataset(x, cand, y, c)


SEPARABLE_CENTERS = [[8.0, 0.0, 0.0, 0.0, 0.0], [0.0, 8.0, 0.0, 0.0, 0.0], [0.0, 0.0, 8.0, 0.0, 0.0]]
# classes 0 and 1 overlap; class 2 sits far away
OVERLAP_CENTERS = [[0.0, 0.0, 0.0, 0.0, 0.0], [1.5, 1.5, 0.0, 0.0, 0.0], [6.0, -6.0, 3.0, 0.0, 0.0]]


def blob_benchmark(n=1500, separable=True, seed=0):
    centers = SEPARABLE_CENTERS if separable else OVERLAP_CENTERS
    return make_blobs(n, centers, 1.0, seed)


def kfold_indices(n, folds, rng):
    """Shuffled (train_idx, test_idx) pairs for k-fold cross-validation."""
    if not 2 <= folds <= n:
        raise ValueError("need 2 <= folds <= n")
    order = rng.gen.permutation(n)
    parts = np.array_split(order, folds)
    return [(np.sort(np.concatenate(parts[:i] + parts[i + 1 :])), np.sort(parts[i])) for i in range(folds)]


def train_test_split(dataset, test_fraction, rng):
    order = rng.gen.permutation(dataset.n)
    cut = int(round(dataset.n * (1 - test_fraction)))
    return dataset.subset(np.sort(order[:cut]), "train"), dataset.subset(np.sort(order[cut:]), "test")
