import itertools

import numpy as np
import pytest

from oakeshmm import ProbParams, loglik, score_at, simulate
from oakeshmm import oracle
from oakeshmm.errors import OracleError
from oakeshmm.params import LogitParams, logits_to_probs

from conftest import random_params


def test_single_occasion_likelihood(rng):
    p = random_params(rng, 3, 4)
    for y in range(4):
        assert oracle.enum_likelihood(p, [y]) == pytest.approx(p.initial @ p.response[y], rel=1e-14)


def test_path_table_is_a_distribution(rng):
    p = random_params(rng, 2, 3)
    tab = oracle.path_table(p, 3)
    assert tab.prior.sum() == pytest.approx(1.0, abs=1e-14)
    total = sum(tab.joint(y).sum() for y in itertools.product(range(3), repeat=3))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_posteriors_sum_to_one(rng):
    p = random_params(rng, 3, 2)
    y = [0, 1, 1, 0]
    for t in range(4):
        assert oracle.enum_posterior_states(p, y, t).sum() == pytest.approx(1.0, abs=1e-14)
    for t in range(1, 4):
        pair = oracle.enum_posterior_pairs(p, y, t)
        assert pair.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.allclose(pair.sum(axis=0), oracle.enum_posterior_states(p, y, t), atol=1e-14)


def test_size_guard(rng):
    p = random_params(rng, 4, 2)
    with pytest.raises(OracleError):
        oracle.path_table(p, 11)
    with pytest.raises(OracleError):
        oracle.path_table(p, 3).joint([0, 1])


def test_quadratic_hessian_exact():
    a = np.array([[3.0, 1.0, -0.5], [1.0, 2.0, 0.25], [-0.5, 0.25, 1.5]])
    b = np.array([1.0, -2.0, 0.5])
    f = lambda x: 0.5 * x @ a @ x + b @ x
    x0 = np.array([0.3, -1.2, 2.0])
    # default second-difference step trades truncation for rounding, about eps / h**2
    assert np.abs(oracle.fd_hessian(f, x0) - a).max() < 1e-6
    assert np.abs(oracle.fd_hessian(None, x0, grad=lambda x: a @ x + b) - a).max() < 1e-9
    assert np.allclose(oracle.fd_gradient(f, x0), a @ x0 + b, rtol=1e-9)


def test_quadratic_hessian_with_chosen_step():
    a = np.array([[2.0, -1.0], [-1.0, 4.0]])
    f = lambda x: 0.5 * x @ a @ x
    assert np.abs(oracle.fd_hessian(f, np.array([0.5, 0.25]), h=1e-2) - a).max() < 1e-9


def test_non_finite_values_raise():
    with pytest.raises(OracleError), np.errstate(invalid="ignore"):
        oracle.fd_gradient(lambda x: np.log(x[0]), np.array([0.0]))
    with pytest.raises(OracleError):
        oracle.fd_jacobian(lambda x: x, np.array([1.0]), points=4)


def test_accepts_logit_params(rng):
    t = LogitParams(rng.normal(size=7), 2, 3)
    g1 = oracle.fd_gradient(lambda x: x @ x, t)
    assert np.allclose(g1, 2 * t.theta, rtol=1e-8)


def test_step_halving_stability(rng, p_k2c3):
    d = simulate(p_k2c3, 100, 5, seed=30)
    theta = rng.normal(size=7)
    f = lambda x: loglik(logits_to_probs(LogitParams(x, 2, 3)), d)
    h = oracle.default_step(theta, order=3)
    g1 = oracle.fd_gradient(f, theta, h=h)
    g2 = oracle.fd_gradient(f, theta, h=h / 2)
    assert np.abs(g1 - g2).max() < 1e-5 * np.abs(g1).max()
    grad = lambda x: score_at(d, LogitParams(x, 2, 3))
    h5 = oracle.default_step(theta, order=5)
    h1 = oracle.fd_hessian(None, theta, grad=grad, h=h5)
    h2 = oracle.fd_hessian(None, theta, grad=grad, h=h5 / 2)
    assert np.abs(h1 - h2).max() < 1e-5 * np.abs(h1).max()


def test_gradient_of_loglik_matches_score(rng, p_k2c3):
    d = simulate(p_k2c3, 100, 5, seed=31)
    theta = rng.normal(size=7)
    num = oracle.fd_gradient(lambda x: loglik(logits_to_probs(LogitParams(x, 2, 3)), d), theta)
    assert np.allclose(score_at(d, LogitParams(theta, 2, 3)), num, rtol=1e-6, atol=1e-6 * np.abs(num).max())


def test_deterministic(rng):
    p = random_params(rng, 2, 2)
    y = [1, 0, 1]
    assert oracle.enum_posterior_pairs(p, y, 2).tolist() == oracle.enum_posterior_pairs(p, y, 2).tolist()
