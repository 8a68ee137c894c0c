"""Independent numerical oracles for the core math, runnable from the CLI.

Each oracle computes an error measure against a reference that does not
share code with the implementation under test (scipy/numpy references,
brute force, or finite differences) and compares it with a tolerance.
"""
import time
from dataclasses import dataclass

import numpy as np
from scipy import special as sps

from . import objectives
from .dirichlet import DirichletParams, _log_sample, kl_term, sample_dirichlet_with_grad
from .graph import build_knn_graph
from .numeric import autograd as ag
from .numeric import special
from .numeric.optim import ParamStore, grad_check
from .numeric.random import RngState


@dataclass
class OracleResult:
    name: str
    tolerance: float
    achieved: float
    seconds: float

    @property
    def passed(self):
        return bool(np.isfinite(self.achieved) and self.achieved <= self.tolerance)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name:<14} achieved={self.achieved:.3e} tolerance={self.tolerance:.1e} ({self.seconds:.2f}s)"


ORACLES = {}


def oracle(name, tolerance):
    def register(fn):
        ORACLES[name] = (fn, tolerance)
        return fn

    return register


def kl_monte_carlo(pairs=50, samples=200_000, seed=0, fault=False):
    """Max over random (alpha, eps) of |analytic - MC| in MC standard errors."""
    gen = np.random.default_rng(seed)
    worst = 0.0
    for i in range(pairs):
        c = (2, 5, 10)[i % 3]
        alpha = gen.uniform(0.3, 5.0, size=c)
        eps = gen.uniform(0.3, 3.0)
        analytic = kl_term(alpha[None, :], eps).item()
        if fault:
            analytic *= 1.05
        d = gen.dirichlet(alpha, size=samples)
        logd = np.log(d)
        log_q = sps.gammaln(alpha.sum()) - sps.gammaln(alpha).sum() + logd @ (alpha - 1)
        log_p = sps.gammaln(c * eps) - c * sps.gammaln(eps) + (eps - 1) * logd.sum(axis=1)
        diff = log_q - log_p
        se = diff.std(ddof=1) / np.sqrt(samples)
        worst = max(worst, abs(analytic - diff.mean()) / se)
    return worst


def implicit_gradient(vectors=20, seed=0, fault=False):
    """Relative error of the pathwise Jacobian against finite differences.

    The reference holds the underlying uniforms u = F(z; alpha) fixed and
    moves each concentration, re-inverting the Gamma CDF with scipy.
    """
    gen = np.random.default_rng(seed)
    worst = 0.0
    for i in range(vectors):
        c = (2, 3, 5, 10)[i % 4]
        alpha = gen.uniform(0.5, 5.0, size=(1, c))
        _, backward = sample_dirichlet_with_grad(DirichletParams(alpha), RngState(seed + i))
        # replaying the same streams gives the Gamma draws behind the sample
        z = np.exp(_log_sample(alpha, RngState(seed + i))[0][0])
        u = sps.gammainc(alpha[0], z)
        ana = np.stack([backward(np.eye(c)[k][None, :])[0] for k in range(c)])
        num = np.empty((c, c))
        for j in range(c):
            h = 1e-6 * max(1.0, alpha[0, j])
            zz = []
            for sign in (1, -1):
                a = alpha[0].copy()
                a[j] += sign * h
                zj = z.copy()
                zj[j] = sps.gammaincinv(a[j], u[j])
                zz.append(zj / zj.sum())
            num[:, j] = (zz[0] - zz[1]) / (2 * h)
        if fault:
            ana = ana * 1.01
        worst = max(worst, np.abs(ana - num).max() / max(np.abs(num).max(), 1e-12))
    return worst


def graph_normalization(seed=0, fault=False):
    """Sparse k-NN graph and its normalization against a dense brute force."""
    gen = np.random.default_rng(seed)
    worst = 0.0
    for n, k in ((12, 3), (40, 5), (7, 1)):
        x = gen.standard_normal((n, 4))
        g = build_knn_graph(x, k)
        dist = ((x[:, None, :] - x[None, :, :]) ** 2).sum(-1)
        np.fill_diagonal(dist, np.inf)
        a = np.eye(n)
        for j in range(n):
            a[np.argsort(dist[:, j], kind="stable")[:k], j] = 1.0
        deg = a.sum(axis=1)
        ref = a / np.sqrt(deg)[:, None] / np.sqrt(deg)[None, :]
        got = g.dense_normalized()
        if fault:
            got = got * 1.01
        worst = max(worst, np.abs(g.dense_adjacency() - a).max(), np.abs(got - ref).max())
    return worst


def special_functions(fault=False):
    """Worst scaled error of log-gamma, digamma and the Gamma CDF against scipy."""
    x = np.geomspace(1e-3, 1e6, 400)
    lg = special.log_gamma(x)
    if fault:
        lg = lg + 1e-6
    ref = sps.gammaln(x)
    err_lg = np.abs(lg - ref) / np.maximum(np.abs(ref), 1.0)
    err_dg = np.abs(special.digamma(x) - sps.digamma(x))
    a = np.geomspace(1e-2, 1e3, 60)[:, None]
    z = np.geomspace(1e-3, 2e3, 60)[None, :]
    err_cdf = np.abs(special.gamma_cdf(z, a) - sps.gammainc(a, z))
    return float(max(err_lg.max() / 1e-10, err_dg.max() / 1e-8, err_cdf.max() / 1e-12))


def _loss_cases(gen):
    n, c = 6, 4
    cand = (gen.random((n, c)) < 0.5).astype(float)
    cand[np.arange(n), gen.integers(0, c, n)] = 1.0
    adj = (gen.random((n, n)) < 0.4).astype(float)
    np.fill_diagonal(adj, 1.0)
    zeta = objectives.candidate_confidence(gen.dirichlet(np.ones(c), n), cand)
    dfix = gen.dirichlet(np.ones(c), n)
    store = ParamStore()
    store.add("logits", gen.standard_normal((n, c)))
    store.add("log_alpha", gen.uniform(-1.0, 1.5, (n, c)))
    store.add("tau_logit", gen.standard_normal((n, c)))

    def d_of(s):
        return ag.softmax(s.tensor("logits"))

    return {
        "risk_estimator": lambda s: objectives.risk_estimator(s.tensor("logits"), cand, dfix),
        "compatibility": lambda s: objectives.compatibility_loss(d_of(s), zeta),
        "bernoulli": lambda s: objectives.bernoulli_loglik(cand, ag.sigmoid(s.tensor("tau_logit"))),
        "graph_recon": lambda s: objectives.graph_reconstruction_error(adj, d_of(s)),
        "reconstruction": lambda s: objectives.reconstruction_term(
            cand, ag.sigmoid(s.tensor("tau_logit")), adj, d_of(s)
        ),
        "kl": lambda s: kl_term(ag.exp(s.tensor("log_alpha")), 0.5),
        "le_objective": lambda s: objectives.le_objective(
            kl_term(ag.exp(s.tensor("log_alpha")), 0.5),
            objectives.reconstruction_term(cand, ag.sigmoid(s.tensor("tau_logit")), adj, d_of(s)),
            objectives.compatibility_loss(d_of(s), zeta),
            0.7,
        ),
    }, store, cand


def _frozen_weight_error(store, cand):
    # the weights are detached, so the reference differentiates the same loss
    # with confidences frozen at the current logits
    logits = store.params["logits"]
    store.zero_grad()
    objectives.weighted_min_loss(store.tensor("logits"), cand).backward()
    ana = store.grads["logits"].copy()
    store.zero_grad()
    zeta = objectives.candidate_confidence(ag.softmax(ag.as_tensor(logits)).value, cand)
    frozen = ParamStore()
    frozen.add("logits", logits.copy())

    def surrogate(s):
        return -(ag.total(ag.mul(ag.log_softmax(s.tensor("logits")), zeta)) * (1.0 / logits.shape[0]))

    num = np.empty_like(logits)
    flat, out = frozen.params["logits"].reshape(-1), num.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + 1e-5
        up = surrogate(frozen).item()
        flat[i] = orig - 1e-5
        down = surrogate(frozen).item()
        flat[i] = orig
        out[i] = (up - down) / 2e-5
    return float((np.abs(ana - num) / np.maximum(1.0, np.abs(num))).max())


def loss_gradients(seed=0, fault=False):
    """Worst grad_check error over every training loss on a random instance."""
    cases, store, cand = _loss_cases(np.random.default_rng(seed))
    worst = _frozen_weight_error(store, cand)
    for name, f in cases.items():
        if fault and name == "kl":
            f = _skew_gradient(f)
        worst = max(worst, grad_check(f, store))
    return worst


def _skew_gradient(f):
    # same value, gradient scaled by 1.1
    def g(store):
        out = f(store)
        return ag.custom(out.value, (out,), lambda grad: (1.1 * grad,))

    return g


oracle("kl", 3.0)(kl_monte_carlo)
oracle("implicit-grad", 1e-3)(implicit_gradient)
oracle("graph", 1e-12)(graph_normalization)
oracle("special", 1.0)(special_functions)
oracle("gradients", 1e-4)(loss_gradients)


def run_oracles(only=None, fault=None):
    """Run the selected oracles; ``fault`` names one to sabotage (self-test)."""
    names = list(ORACLES) if not only else list(only)
    unknown = [n for n in names if n not in ORACLES]
    if unknown:
        raise KeyError(f"unknown oracle(s): {', '.join(unknown)}")
    results = []
    for name in names:
        fn, tol = ORACLES[name]
        start = time.perf_counter()
        achieved = float(fn(fault=(fault == name)))
        results.append(OracleResult(name, tol, achieved, time.perf_counter() - start))
    return results
