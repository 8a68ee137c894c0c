import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special as sps

from pllvle.dirichlet import (
    ALPHA_FLOOR,
    DirichletParams,
    DirichletPrior,
    LabelDistributionMatrix,
    dirichlet_mean,
    empirical_mean,
    kl_dirichlet_to_prior,
    kl_term,
    sample_dirichlet,
    sample_dirichlet_with_grad,
)
from pllvle.numeric import RngState, grad_check
from pllvle.numeric import autograd as ag
from pllvle.numeric.optim import ParamStore
from pllvle.numeric.random import sample_log_gamma


def P(*rows):
    return DirichletParams(np.array(rows, dtype=float))


def test_mean_examples():
    assert np.allclose(dirichlet_mean(P([2, 2])).dist, [[0.5, 0.5]])
    assert np.allclose(dirichlet_mean(P([1, 3])).dist, [[0.25, 0.75]])


def test_mean_matches_samples():
    alpha = np.array([0.7, 2.0, 4.5])
    d = sample_dirichlet(DirichletParams(np.tile(alpha, (100_000, 1))), RngState(4)).dist
    se = d.std(axis=0) / np.sqrt(len(d))
    assert np.all(np.abs(d.mean(axis=0) - alpha / alpha.sum()) < 3 * se)


def test_concentrated_sample():
    d = sample_dirichlet(DirichletParams(np.tile([1000.0, 1.0], (2000, 1))), RngState(0)).dist
    assert (d[:, 0] > 0.99).mean() > 0.99


def test_rows_on_simplex_and_deterministic():
    p = DirichletParams(np.random.default_rng(0).uniform(1e-4, 5, (50, 6)))
    a = sample_dirichlet(p, RngState(1)).dist
    assert np.allclose(a.sum(axis=1), 1.0, atol=1e-12)
    assert np.array_equal(a, sample_dirichlet(p, RngState(1)).dist)


def test_tiny_alphas_do_not_collapse():
    d = sample_dirichlet(DirichletParams(np.full((200, 4), ALPHA_FLOOR)), RngState(3)).dist
    assert np.all(np.isfinite(d))
    assert np.allclose(d.sum(axis=1), 1.0)


def test_validation():
    with pytest.raises(ValueError):
        DirichletParams(np.array([[1.0, 0.0]]))
    with pytest.raises(ValueError):
        LabelDistributionMatrix(np.array([[0.5, 0.6]]))
    with pytest.raises(ValueError):
        DirichletPrior(0.0)


def test_permutation_equivariance():
    alpha = np.array([[0.5, 3.0, 1.2, 7.0]])
    perm = np.array([2, 0, 3, 1])
    streams = RngState(8).spawn(4)
    base = sample_dirichlet(DirichletParams(alpha), streams).dist
    replay = RngState(8).spawn(4)
    permuted = sample_dirichlet(DirichletParams(alpha[:, perm]), [replay[j] for j in perm]).dist
    assert np.allclose(permuted, base[:, perm], rtol=0, atol=1e-15)


def test_gradient_of_row_sum_is_zero():
    _, backward = sample_dirichlet_with_grad(P([0.4, 2.0, 6.0]), RngState(0))
    assert np.allclose(backward(np.ones((1, 3))), 0.0, atol=1e-12)


def _fixed_uniform_path(alpha, logz):
    u = sps.gammainc(alpha, np.exp(logz))
    return lambda a: sps.gammaincinv(a, u)


@pytest.mark.parametrize("shape", [0.3, 1.0, 4.0, 25.0])
def test_scalar_gamma_gradient_fixed_uniforms(shape):
    from pllvle.numeric.special import gamma_log_sample_grad

    logz = sample_log_gamma(np.array([shape]), RngState(6))
    path = _fixed_uniform_path(np.array([shape]), logz)
    h = 1e-6 * shape
    fd = (path(shape + h) - path(shape - h)) / (2 * h)
    implicit = np.exp(logz) * gamma_log_sample_grad(np.array([shape]), logz)
    assert abs(implicit[0] - fd[0]) / abs(fd[0]) < 1e-3


def test_pathwise_gradient_of_mean():
    alpha = np.array([0.8, 2.0, 3.5])
    n = 50_000
    _, backward = sample_dirichlet_with_grad(DirichletParams(np.tile(alpha, (n, 1))), RngState(12))
    g = np.zeros((n, 3))
    g[:, 0] = 1.0
    per_sample = backward(g)
    s = alpha.sum()
    analytic = -alpha[0] / s**2 * np.ones(3)
    analytic[0] += 1.0 / s
    se = per_sample.std(axis=0) / np.sqrt(n)
    assert np.all(np.abs(per_sample.mean(axis=0) - analytic) < 3 * se)


def test_kl_zero_at_prior():
    assert kl_dirichlet_to_prior(P([0.3, 0.3, 0.3], [0.3, 0.3, 0.3]), DirichletPrior(0.3)) == pytest.approx(0, abs=1e-12)
    assert kl_dirichlet_to_prior(P([0.4, 0.3, 0.3]), DirichletPrior(0.3)) > 1e-6


def test_kl_hand_value():
    assert kl_dirichlet_to_prior(P([2, 2]), DirichletPrior(1.0)) == pytest.approx(0.12519, abs=1e-4)


def test_kl_sums_rows():
    one = kl_dirichlet_to_prior(P([2, 2]), DirichletPrior(1.0))
    assert kl_dirichlet_to_prior(P([2, 2], [2, 2]), DirichletPrior(1.0)) == pytest.approx(2 * one)


def test_kl_grad_check():
    s = ParamStore()
    s.add("log_alpha", np.random.default_rng(2).uniform(-2, 2, (3, 4)))
    assert grad_check(lambda p: kl_term(ag.exp(p.tensor("log_alpha")), 0.05), s) < 1e-5


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(1e-3, 50), min_size=2, max_size=6), st.floats(1e-3, 5))
def test_kl_nonnegative(alpha, eps):
    assert kl_term(np.array([alpha]), eps).item() >= -1e-9


def test_empirical_mean_converges():
    p = P([1.0, 2.0, 5.0])
    est = empirical_mean(p, RngState(0), 20_000).dist
    assert np.allclose(est, dirichlet_mean(p).dist, atol=0.01)
