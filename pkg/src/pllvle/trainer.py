"""Warm-up, label enhancement and classifier training, plus diagnostics."""
import csv
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import objectives
from .data import DatasetError, iterate_minibatches, kfold_indices
from .dirichlet import DirichletParams, LabelDistributionMatrix, dirichlet_mean, empirical_mean, kl_term, rsample
from .graph import build_knn_graph
from .models import (
    InferenceModel,
    ModelBundle,
    ObservationModel,
    PredictiveModel,
    extract_features,
    predict,
    save_models,
)
from .numeric import autograd as ag
from .numeric.optim import adam_step
from .numeric.random import RngState

log = logging.getLogger(__name__)

LOSS_KEYS = ("min_loss", "kl", "recon_label", "recon_graph", "compat", "risk")


class TrainingAborted(RuntimeError):
    pass


@dataclass
class TrainConfig:
    arch: str = "linear"
    hidden: tuple = ()
    warmup_epochs: int = 10
    total_epochs: int = 500
    batch_size: int = 100
    lr: float = 1e-2
    weight_decay: float = 1e-4
    lr_inference: float = 1e-2
    weight_decay_inference: float = 1e-4
    lr_observation: float = 1e-2
    weight_decay_observation: float = 1e-4
    lam: float = 1.0
    epsilon: float = 0.01
    k: int = 3
    metric: str = "euclidean"
    symmetrize: bool = False
    gcn_hidden: int = 64
    obs_hidden: tuple = (64, 64)
    mc_samples: int = 1
    d_estimate: str = "mean"
    d_samples: int = 10
    seed: int = 0
    graph_refresh: str = "once"
    eval_every: int = 1

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        self.obs_hidden = tuple(int(h) for h in self.obs_hidden)
        if not 0 <= self.warmup_epochs < self.total_epochs:
            raise ValueError("need 0 <= warmup_epochs < total_epochs")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.graph_refresh not in ("once", "per_epoch"):
            raise ValueError("graph_refresh must be 'once' or 'per_epoch'")
        if self.d_estimate not in ("mean", "empirical"):
            raise ValueError("d_estimate must be 'mean' or 'empirical'")
        if self.mc_samples < 1 or self.k < 1 or self.eval_every < 1:
            raise ValueError("mc_samples, k and eval_every must be >= 1")
        if self.lam < 0 or self.epsilon <= 0:
            raise ValueError("lambda must be >= 0 and epsilon > 0")
        if self.arch not in ("linear", "mlp") or (self.arch == "mlp" and not self.hidden):
            raise ValueError("arch must be 'linear' or 'mlp' with hidden sizes")

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        d["obs_hidden"] = list(self.obs_hidden)
        return d


@dataclass
class TrainState:
    bundle: ModelBundle
    epoch: int = 0
    phi: Optional[np.ndarray] = None
    graph: object = None
    dist: Optional[LabelDistributionMatrix] = None
    prev_dist: Optional[LabelDistributionMatrix] = None
    history: list = field(default_factory=list)
    inference_lr_scale: float = 1.0
    skipped_batches: int = 0

    @property
    def model(self):
        return self.bundle.predictive


def init_state(dataset, config):
    root = RngState(config.seed)
    init = root.stream("init")
    q, c = dataset.features.shape[1], dataset.class_count
    theta = PredictiveModel(config.arch, q, c, config.hidden, init)
    inf = InferenceModel(theta.feature_dim, c, config.gcn_hidden, init)
    obs = ObservationModel(c, config.obs_hidden, init)
    return TrainState(ModelBundle(theta, inf, obs))


def _stream(config, name, epoch):
    return RngState(config.seed).stream(f"{name}/{epoch}")


def warmup(dataset, config, state):
    """Weighted minimal-loss epochs on the predictive model only."""
    theta = state.model
    for _ in range(config.warmup_epochs):
        _min_loss_epoch(dataset, config, state, phase="warmup")
    return state


def _min_loss_epoch(dataset, config, state, phase):
    theta = state.model
    snapshot = {k: v.copy() for k, v in theta.store}
    rng = _stream(config, "shuffle", state.epoch)
    losses = []
    for batch in iterate_minibatches(dataset.n, config.batch_size, rng):
        logits, _ = theta.forward(dataset.features[batch])
        loss = objectives.weighted_min_loss(logits, dataset.candidates[batch])
        if not np.isfinite(loss.item()):
            for k, v in snapshot.items():
                theta.store.params[k][...] = v
            raise TrainingAborted(f"non-finite {phase} loss at epoch {state.epoch}; parameters restored")
        loss.backward()
        adam_step(theta.store, config.lr, config.weight_decay)
        losses.append(loss.item())
    state.epoch += 1
    state.history.append({"epoch": state.epoch, "phase": phase, "min_loss": float(np.mean(losses))})


def build_epoch_context(dataset, state, config):
    """Extract features from the predictive model and build the k-NN graph.

    With ``graph_refresh='once'`` an existing graph is kept.
    """
    if state.graph is not None and config.graph_refresh == "once":
        return state
    state.phi = extract_features(state.model, dataset.features)
    k = min(config.k, dataset.n - 1) if dataset.n > 1 else 1
    state.graph = build_knn_graph(state.phi, k, config.metric, config.symmetrize)
    return state


def _alphas(dataset, state):
    inf = state.bundle.inference
    return inf.forward(state.graph.normalized, state.phi, dataset.candidates.astype(np.float64))


def label_distributions(dataset, state, config):
    """Recovered D over the whole training set from the current inference model."""
    params = DirichletParams(_alphas(dataset, state).value)
    if config.d_estimate == "empirical":
        return empirical_mean(params, _stream(config, "d-estimate", state.epoch), config.d_samples)
    return dirichlet_mean(params)


def train_epoch(dataset, state, config, rng=None):
    """One pass of joint updates of the classifier, inference and observation models."""
    theta, inf, obs = state.bundle.predictive, state.bundle.inference, state.bundle.observation
    shuffle = rng if rng is not None else _stream(config, "shuffle", state.epoch)
    sampling = _stream(config, "sampling", state.epoch)
    logical = dataset.candidates.astype(np.float64)
    adjacency = state.graph.adjacency
    sums = {k: 0.0 for k in LOSS_KEYS}
    sums["total"] = 0.0
    steps = 0
    halved = False
    for batch in iterate_minibatches(dataset.n, config.batch_size, shuffle):
        alpha = ag.take_rows(_alphas(dataset, state), batch)
        logits, _ = theta.forward(dataset.features[batch])
        preds = ag.softmax(logits.detach()).value
        zeta = objectives.candidate_confidence(preds, logical[batch])
        d_mean = alpha.value / alpha.value.sum(axis=1, keepdims=True)
        samples = [rsample(alpha, s) for s in sampling.spawn(config.mc_samples)]
        taus = [obs.forward(s) for s in samples]
        a_batch = adjacency[batch][:, batch].toarray()
        m = float(len(samples))
        recon_label = sum((objectives.bernoulli_loglik(logical[batch], t) for t in taus[1:]),
                          objectives.bernoulli_loglik(logical[batch], taus[0])) * (1.0 / m)
        recon_graph = sum((objectives.graph_reconstruction_error(a_batch, s) for s in samples[1:]),
                          objectives.graph_reconstruction_error(a_batch, samples[0])) * (1.0 / m)
        recon = recon_label - recon_graph
        kl = kl_term(alpha, config.epsilon)
        compat = sum((objectives.compatibility_loss(s, zeta) for s in samples[1:]),
                     objectives.compatibility_loss(samples[0], zeta)) * (1.0 / m)
        le = objectives.le_objective(kl, recon, compat, config.lam)
        risk = objectives.risk_estimator(logits, logical[batch], d_mean)
        total = le + risk
        stores = (theta.store, inf.store, obs.store)
        if np.isfinite(total.item()):
            total.backward()
        if not np.isfinite(total.item()) or not all(np.all(np.isfinite(g)) for s in stores for g in s.grads.values()):
            for s in stores:
                s.zero_grad()
            state.skipped_batches += 1
            log.warning("skipping batch with non-finite loss at epoch %d", state.epoch)
            if not halved:
                state.inference_lr_scale *= 0.5
                halved = True
            continue
        adam_step(theta.store, config.lr, config.weight_decay)
        adam_step(inf.store, config.lr_inference * state.inference_lr_scale, config.weight_decay_inference)
        adam_step(obs.store, config.lr_observation, config.weight_decay_observation)
        for key, val in (
            ("kl", kl), ("recon_label", recon_label), ("recon_graph", recon_graph),
            ("compat", compat), ("risk", risk), ("total", total),
        ):
            sums[key] += val.item()
        steps += 1
    state.epoch += 1
    state.prev_dist = state.dist
    state.dist = label_distributions(dataset, state, config)
    row = {"epoch": state.epoch, "phase": "le", "steps": steps}
    row.update({k: sums[k] / max(steps, 1) for k in ("total", "kl", "recon_label", "recon_graph", "compat", "risk")})
    # sanity diagnostic: should rise over LE training
    row["elbo"] = row["recon_label"] - row["recon_graph"] - row["kl"]
    state.history.append(row)
    return state


def convergence_metric(state):
    """||D_t - D_{t-1}||_F / n between the last two recovered distributions."""
    if state.dist is None or state.prev_dist is None:
        raise ValueError("need two epochs of label distributions")
    diff = state.dist.dist - state.prev_dist.dist
    return float(np.linalg.norm(diff) / diff.shape[0])


def le_quality(dist, true_labels):
    d = getattr(dist, "dist", dist)
    return float(np.mean(np.asarray(d).argmax(axis=1) == np.asarray(true_labels)))


def evaluate(model, test, dist=None, train=None):
    """Top-1 test accuracy; LE quality as well when D and labelled training data are given."""
    if test.true_labels is None:
        raise DatasetError("evaluation needs true labels")
    acc = float(np.mean(predict(model, test.features).argmax(axis=1) == test.true_labels))
    out = {"accuracy": acc}
    if dist is not None and train is not None and train.true_labels is not None:
        out["le_quality"] = le_quality(dist, train.true_labels)
    return out


def _eval_row(state, config, train, test):
    row = state.history[-1]
    if test is not None and (state.epoch % config.eval_every == 0 or state.epoch == config.total_epochs):
        row["test_acc"] = evaluate(state.model, test)["accuracy"]
    if state.dist is not None and train.true_labels is not None:
        row["le_quality"] = le_quality(state.dist, train.true_labels)
    if state.prev_dist is not None:
        row["d_convergence"] = convergence_metric(state)


def fit(train, config, test=None, state=None):
    """Warm-up, then label enhancement and classifier training until total_epochs."""
    state = state or init_state(train, config)
    for _ in range(config.warmup_epochs):
        _min_loss_epoch(train, config, state, "warmup")
        _eval_row(state, config, train, test)
    while state.epoch < config.total_epochs:
        build_epoch_context(train, state, config)
        if state.dist is None:
            state.dist = label_distributions(train, state, config)
        train_epoch(train, state, config)
        _eval_row(state, config, train, test)
    return state


def ablate_no_le(dataset, config, test=None):
    """Train with the weighted minimal loss only for total_epochs."""
    state = init_state(dataset, config)
    state.bundle = ModelBundle(state.bundle.predictive)
    while state.epoch < config.total_epochs:
        _min_loss_epoch(dataset, config, state, "min_loss")
        _eval_row(state, config, dataset, test)
    metrics = {}
    if test is not None:
        metrics.update(evaluate(state.model, test))
    return metrics, state


def run(train, config, test=None, ablate=False):
    start = time.perf_counter()
    if ablate:
        metrics, state = ablate_no_le(train, config, test)
    else:
        state = fit(train, config, test)
        metrics = evaluate(state.model, test) if test is not None else {}
        if train.true_labels is not None and state.dist is not None:
            metrics["le_quality"] = le_quality(state.dist, train.true_labels)
    metrics["seconds"] = time.perf_counter() - start
    return metrics, state


def cross_validate(dataset, config, folds=5, ablate=False, split_seed=0):
    """k-fold CV; fold i trains with seed ``config.seed + i``."""
    results = []
    for i, (tr, te) in enumerate(kfold_indices(dataset.n, folds, RngState(split_seed).stream("folds"))):
        cfg = TrainConfig(**{**config.to_dict(), "seed": config.seed + i})
        metrics, _ = run(dataset.subset(tr, "train"), cfg, dataset.subset(te, "test"), ablate)
        results.append(metrics)
    accs = np.array([r["accuracy"] for r in results])
    return {"accuracies": accs.tolist(), "mean": float(accs.mean()), "std": float(accs.std()), "folds": results}


METRIC_COLUMNS = ["epoch", "phase", "total", "min_loss", "kl", "recon_label", "recon_graph", "compat", "risk", "elbo",
                  "test_acc", "le_quality", "d_convergence"]
ABLATION_COLUMNS = ["epoch", "phase", "min_loss", "test_acc"]


def write_metrics(history, path, ablate=False):
    cols = ABLATION_COLUMNS if ablate else METRIC_COLUMNS
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in history:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items() if k in cols})
    os.replace(tmp, path)


def write_checkpoint(state, config, directory, ablate=False, extra=None):
    os.makedirs(directory, exist_ok=True)
    payload = {"train": config.to_dict(), "ablate_no_le": ablate, **(extra or {})}
    tmp = os.path.join(directory, "config.json.tmp")
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2)
    os.replace(tmp, os.path.join(directory, "config.json"))
    save_models(state.bundle, directory, seed=config.seed)
    write_metrics(state.history, os.path.join(directory, "metrics.csv"), ablate)
