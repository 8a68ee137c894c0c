"""Training losses.

Classifier-side losses take *logits* as a Tensor and use a stable
log-softmax internally; weights derived from predictions or label
distributions are constants (no gradient flows through them).
"""
from dataclasses import dataclass, field

import numpy as np

from .numeric import autograd as ag

MASS_FLOOR = 1e-12
LOG_FLOOR = 1e-12


@dataclass
class LossReport:
    total: float
    components: dict = field(default_factory=dict)

    def row(self, step):
        return {"step": step, "total": self.total, **self.components}


def _candidates(candidates):
    cand = np.asarray(candidates, dtype=np.float64)
    if np.any(cand.sum(axis=1) == 0):
        raise ValueError("every example needs a non-empty candidate set")
    return cand


def _renormalize_on_candidates(weights, cand):
    w = np.asarray(weights, dtype=np.float64) * cand
    mass = w.sum(axis=1, keepdims=True)
    uniform = cand / cand.sum(axis=1, keepdims=True)
    low = mass[:, 0] < MASS_FLOOR
    out = np.where(low[:, None], uniform, w / np.maximum(mass, MASS_FLOOR))
    return out


def candidate_confidence(preds, candidates):
    """Predictions renormalized over each candidate set, zero elsewhere.

    Falls back to uniform over the candidates when their mass underflows.
    """
    return _renormalize_on_candidates(preds, _candidates(candidates))


def _weighted_ce(logits, weights):
    logp = ag.log_softmax(logits)
    n = logp.shape[0]
    return -(ag.total(ag.mul(logp, weights)) * (1.0 / n))


def weighted_min_loss(logits, candidates):
    """Cross-entropy on candidates weighted by the current candidate confidence.

    The relaxed minimal loss for warm-up training: weights are the detached
    ``candidate_confidence`` of the current softmax.
    """
    logits = ag.as_tensor(logits)
    cand = _candidates(candidates)
    preds = ag.softmax(logits.detach()).value
    return _weighted_ce(logits, candidate_confidence(preds, cand))


def risk_estimator(logits, candidates, d):
    """Candidate cross-entropies weighted by d renormalized on each candidate set."""
    logits = ag.as_tensor(logits)
    cand = _candidates(candidates)
    d = np.asarray(getattr(d, "dist", d), dtype=np.float64)
    return _weighted_ce(logits, _renormalize_on_candidates(d, cand))


def bernoulli_loglik(logical, tau):
    """sum (1 - l) log(1 - tau) + l log tau."""
    tau = ag.as_tensor(tau)
    if np.any(tau.value <= 0) or np.any(tau.value >= 1):
        raise ValueError("tau must lie strictly inside (0, 1)")
    logical = np.asarray(logical, dtype=np.float64)
    return ag.total(logical * ag.log(tau)) + ag.total((1.0 - logical) * ag.log(1.0 - tau))


def graph_reconstruction_error(adjacency, d):
    """||A - sigmoid(D D^T)||_F^2 over the rows of d."""
    d = ag.as_tensor(d)
    gram = ag.matmul(d, ag.transpose(d))
    return ag.frobenius_sq(ag.sub(np.asarray(adjacency, dtype=np.float64), ag.sigmoid(gram)))


def reconstruction_term(logical, taus, adjacency, d_samples):
    """Monte-Carlo estimate of the expected log-likelihood of labels and graph.

    ``taus`` and ``d_samples`` are single tensors (M = 1) or equal-length
    sequences of per-sample tensors. Higher is better.
    """
    if isinstance(taus, (list, tuple)):
        pairs = list(zip(taus, d_samples))
        if len(pairs) != len(taus) or len(taus) != len(d_samples):
            raise ValueError("taus and d_samples must have the same length")
    else:
        pairs = [(taus, d_samples)]
    if not pairs:
        raise ValueError("need at least one Monte-Carlo sample")
    acc = None
    for tau, d in pairs:
        term = bernoulli_loglik(logical, tau) - graph_reconstruction_error(adjacency, d)
        acc = term if acc is None else acc + term
    return acc * (1.0 / len(pairs))


def compatibility_loss(d, zeta):
    """-(1/n) sum_ij zeta_ij log d_ij, with d floored at 1e-12 inside the log."""
    d = ag.as_tensor(getattr(d, "dist", d))
    zeta = np.asarray(zeta, dtype=np.float64)
    n = d.shape[0]
    return -(ag.total(ag.mul(ag.log(d, floor=LOG_FLOOR), zeta)) * (1.0 / n))


def le_objective(kl, recon, compat, lam):
    """lam * compat - (recon - kl); works on floats or tensors."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    return compat * lam - (recon - kl)
