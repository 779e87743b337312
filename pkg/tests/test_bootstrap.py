import numpy as np
import pytest

from oakeshmm import FitOptions, ProbParams, bootstrap_se, simulate
from oakeshmm.errors import BootstrapUnreliableError, InputError


def test_simulate_is_deterministic(p_k2c3):
    a = simulate(p_k2c3, 100, 5, seed=3)
    b = simulate(p_k2c3, 100, 5, seed=3)
    c = simulate(p_k2c3, 100, 5, seed=4)
    assert a.same_as(b)
    assert not a.same_as(c)
    assert a.n == 100 and a.T == 5 and a.c == 3


def test_noiseless_channel_reveals_chain():
    trans = np.array([[0.7, 0.2, 0.1], [0.1, 0.6, 0.3], [0.25, 0.25, 0.5]])
    p = ProbParams([0.2, 0.3, 0.5], trans, np.eye(3))
    seqs = simulate(p, 20000, 4, seed=5).sequences()
    counts = np.zeros((3, 3))
    for t in range(1, 4):
        np.add.at(counts, (seqs[:, t - 1], seqs[:, t]), 1)
    emp = counts / counts.sum(axis=1, keepdims=True)
    assert np.abs(emp - trans).max() < 0.02


def test_absorbing_start():
    p = ProbParams([1.0, 0.0], np.eye(2), [[0.6, 0.1], [0.4, 0.9]])
    # state 1 throughout, so category 1 appears at its own rate at every occasion
    seqs = simulate(p, 5000, 3, seed=6).sequences()
    assert abs(seqs.mean() - 0.4) < 4 * np.sqrt(0.24 / seqs.size)
    p = ProbParams([1.0, 0.0], np.eye(2), np.eye(2))
    assert np.all(simulate(p, 50, 6, seed=7).sequences() == 0)


def test_first_occasion_marginal(p_k2c3):
    n = 100_000
    seqs = simulate(p_k2c3, n, 1, seed=8).sequences()
    freq = np.bincount(seqs[:, 0], minlength=3) / n
    target = p_k2c3.response @ p_k2c3.initial
    assert np.all(np.abs(freq - target) < 3 * np.sqrt(target * (1 - target) / n))


def test_simulate_rejects_bad_sizes(p_k2c3):
    with pytest.raises(InputError):
        simulate(p_k2c3, 0, 5, seed=1)


def test_bootstrap_seed_determinism(p_k2c3):
    a = bootstrap_se(p_k2c3, 60, 4, 2, 6, seed=9)
    b = bootstrap_se(p_k2c3, 60, 4, 2, 6, seed=9)
    assert np.array_equal(a.estimates, b.estimates)
    assert np.array_equal(a.se_theta, b.se_theta)
    assert a.n_failed + a.n_succeeded == a.B == 6
    assert np.all(a.se_eta >= 0)
    assert a.se_response.shape == (3, 2) and a.se_transition.shape == (2, 2)


def test_degenerate_model_matches_binomial():
    lam = np.array([0.3, 0.7])
    p = ProbParams(lam, np.eye(2), np.eye(2))
    n, B = 100, 200
    res = bootstrap_se(p, n, 3, 2, B, seed=10)
    expected = np.sqrt(lam * (1 - lam) / n)
    assert res.n_failed == 0
    assert np.all(np.abs(res.se_initial / expected - 1) < 3 / np.sqrt(B))
    # the structural zeros never move
    assert np.all(res.se_response[1, 0] == 0) and np.all(res.se_transition == 0)


def test_unreliable_bootstrap(p_k2c3):
    with pytest.raises(BootstrapUnreliableError):
        bootstrap_se(p_k2c3, 50, 4, 2, 5, seed=11, opts=FitOptions(max_iter=1))


def test_bootstrap_input_checks(p_k2c3):
    with pytest.raises(InputError):
        bootstrap_se(p_k2c3, 50, 4, 2, 1, seed=1)
    with pytest.raises(InputError):
        bootstrap_se(p_k2c3, 50, 4, 3, 5, seed=1)
