"""Dirichlet posteriors: means, sampling with implicit gradients, KL to the prior."""
from dataclasses import dataclass

import numpy as np

from .numeric import autograd as ag
from .numeric import special
from .numeric.random import RngState, sample_log_gamma

ALPHA_FLOOR = 1e-4


@dataclass(frozen=True)
class DirichletParams:
    """Per-example concentration vectors, one row per example."""

    alphas: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("alphas must be an n x c matrix")
        if not np.all(np.isfinite(a)):
            raise ValueError("alphas must be finite")
        if np.any(a < ALPHA_FLOOR * (1 - 1e-12)):
            raise ValueError(f"alphas must be >= {ALPHA_FLOOR}")
        object.__setattr__(self, "alphas", a)


@dataclass(frozen=True)
class LabelDistributionMatrix:
    dist: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=np.float64)
        if d.ndim != 2 or np.any(d < 0) or np.any(d > 1):
            raise ValueError("label distributions must be an n x c matrix in [0, 1]")
        if not np.allclose(d.sum(axis=1), 1.0, atol=1e-9, rtol=0):
            raise ValueError("label distribution rows must sum to 1")
        object.__setattr__(self, "dist", d)

    def argmax(self):
        return self.dist.argmax(axis=1)


@dataclass(frozen=True)
class DirichletPrior:
    epsilon: float = 0.01

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("prior epsilon must be positive")


def dirichlet_mean(params):
    a = params.alphas
    return LabelDistributionMatrix(a / a.sum(axis=1, keepdims=True))


def _column_streams(rng, c):
    if isinstance(rng, RngState):
        return rng.spawn(c)
    streams = list(rng)
    if len(streams) != c:
        raise ValueError(f"need one stream per column ({c}), got {len(streams)}")
    return streams


def _log_sample(alphas, rng):
    # each column draws from its own stream, so permuting columns together
    # with their streams permutes the sample
    streams = _column_streams(rng, alphas.shape[1])
    logz = np.empty_like(alphas)
    for j, s in enumerate(streams):
        logz[:, j] = sample_log_gamma(alphas[:, j], s)
    m = logz.max(axis=1, keepdims=True)
    logd = logz - m - np.log(np.exp(logz - m).sum(axis=1, keepdims=True))
    return logz, logd


def sample_dirichlet(params, rng):
    """Rows drawn as normalized Gamma(alpha, 1) variates.

    Normalization happens in log space, so rows never collapse to 0/0 even
    when every Gamma draw underflows.
    """
    _, logd = _log_sample(params.alphas, rng)
    return LabelDistributionMatrix(_renormalize(np.exp(logd)))


def _renormalize(d):
    return d / d.sum(axis=1, keepdims=True)


def sample_dirichlet_with_grad(params, rng):
    """A sample plus ``backward(grad_d) -> grad_alpha`` by implicit differentiation.

    For each underlying Gamma draw, dz/dalpha = -(dF/dalpha) / p(z); the chain
    through d = z / sum(z) gives
    grad_alpha_k = (g_k - sum_j g_j d_j) * d_k * dlog z_k / dalpha_k.
    """
    alphas = params.alphas
    logz, logd = _log_sample(alphas, rng)
    d = _renormalize(np.exp(logd))
    dlogz = special.gamma_log_sample_grad(alphas, logz)

    def backward(grad_d):
        g = np.asarray(grad_d, dtype=np.float64)
        centered = g - (g * d).sum(axis=1, keepdims=True)
        return centered * d * dlogz

    return LabelDistributionMatrix(d), backward


def rsample(alpha, rng):
    """Differentiable Dirichlet sample: a Tensor whose backward is implicit."""
    alpha = ag.as_tensor(alpha)
    sample, backward = sample_dirichlet_with_grad(DirichletParams(alpha.value), rng)
    return ag.custom(sample.dist, (alpha,), lambda g: (backward(g),))


def empirical_mean(params, rng, m):
    """Average of ``m`` samples, the finite-sample alternative to the mean."""
    acc = np.zeros_like(params.alphas)
    for s in rng.spawn(m):
        acc += sample_dirichlet(params, s).dist
    return LabelDistributionMatrix(_renormalize(acc / m))


def kl_term(alpha, epsilon):
    """Summed KL(Dir(alpha_i) || Dir(epsilon, ..., epsilon)) as a Tensor."""
    alpha = ag.as_tensor(alpha)
    c = alpha.shape[1]
    total = ag.row_sum(alpha)
    const = special.log_gamma(c * epsilon) - c * special.log_gamma(epsilon)
    per_row = (
        ag.lgamma(total)
        - ag.row_sum(ag.lgamma(alpha))
        - const
        + ag.row_sum((alpha - epsilon) * (ag.digamma(alpha) - ag.digamma(total)))
    )
    return per_row.sum()


def kl_dirichlet_to_prior(params, prior):
    return max(kl_term(params.alphas, prior.epsilon).item(), 0.0)
