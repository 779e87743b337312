import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oakeshmm import Dataset, DegenerateConfigurationError, InputError, ProbParams
from oakeshmm import oracle
from oakeshmm.recursions import (
    backward,
    forward,
    forward_backward,
    log_manifest_probs,
    posterior_pairs,
    posterior_states,
)

from conftest import random_params


def test_single_step_symmetric_mixture():
    p = ProbParams([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]], [[0.9, 0.1], [0.1, 0.9]])
    _, _, logf = forward(p, [0])
    assert np.exp(logf) == pytest.approx(0.5, rel=1e-15)


def test_single_step_marginalization(rng):
    p = random_params(rng, 3, 4)
    for y in range(4):
        _, _, logf = forward(p, [y])
        assert np.exp(logf) == pytest.approx(p.initial @ p.response[y], rel=1e-13)
        fb = forward_backward(p, [y])
        post = p.initial * p.response[y]
        assert np.allclose(posterior_states(fb, 0), post / post.sum(), rtol=1e-13)


def test_forward_matches_enumeration_all_sequences(rng):
    p = random_params(rng, 2, 2)
    total = 0.0
    for y in itertools.product(range(2), repeat=4):
        _, _, logf = forward(p, y)
        ref = oracle.enum_likelihood(p, y)
        assert np.exp(logf) == pytest.approx(ref, rel=1e-12)
        total += np.exp(logf)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_manifest_probabilities_sum_to_one(rng):
    p = random_params(rng, 3, 2)
    ys = list(itertools.product(range(2), repeat=5))
    d = Dataset(np.array(ys), np.ones(len(ys), dtype=int), 2)
    assert np.exp(log_manifest_probs(p, d)).sum() == pytest.approx(1.0, abs=1e-12)


def test_backward_matches_enumeration(rng):
    p = random_params(rng, 2, 3)
    y = [2, 0, 1]
    fb = forward_backward(p, y)
    unscaled = fb.unscaled_backward()
    assert np.all(unscaled[-1] == 1.0)
    for t in range(3):
        assert np.allclose(unscaled[t], oracle.enum_backward(p, y, t), rtol=1e-12)


def test_total_probability_identity(rng):
    p = random_params(rng, 3, 3)
    y = [0, 2, 1, 1, 0, 2]
    fb = forward_backward(p, y)
    f = np.exp(fb.log_prob)
    q, qbar = fb.unscaled_forward(), fb.unscaled_backward()
    for t in range(len(y)):
        assert (q[t] * qbar[t]).sum() == pytest.approx(f, rel=1e-12)
    assert np.allclose(backward(p, y), fb.backward)


def test_posteriors_match_enumeration(rng):
    p = random_params(rng, 2, 3)
    y = [0, 2, 2, 1]
    fb = forward_backward(p, y)
    for t in range(4):
        ref = oracle.enum_posterior_states(p, y, t)
        assert np.allclose(posterior_states(fb, t), ref, rtol=1e-10, atol=0)
    for t in range(1, 4):
        ref = oracle.enum_posterior_pairs(p, y, t)
        assert np.allclose(posterior_pairs(fb, p, t), ref, rtol=1e-10, atol=0)


def test_pairs_factorize_with_identical_rows(rng):
    p0 = random_params(rng, 3, 3)
    row = np.array([0.2, 0.5, 0.3])
    p = ProbParams(p0.initial, np.tile(row, (3, 1)), p0.response)
    fb = forward_backward(p, [0, 1, 2, 1])
    for t in range(1, 4):
        pair = posterior_pairs(fb, p, t)
        assert np.allclose(pair, np.outer(posterior_states(fb, t - 1), posterior_states(fb, t)), atol=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(2, 4), st.integers(1, 8))
def test_posterior_identities(seed, k, c, T):
    rng = np.random.default_rng(seed)
    p = random_params(rng, k, c)
    y = rng.integers(0, c, size=T)
    fb = forward_backward(p, y)
    for t in range(T):
        f_t = posterior_states(fb, t)
        assert f_t.sum() == pytest.approx(1.0, abs=1e-10)
        if t > 0:
            pair = posterior_pairs(fb, p, t)
            assert pair.sum() == pytest.approx(1.0, abs=1e-10)
            assert np.allclose(pair.sum(axis=1), posterior_states(fb, t - 1), atol=1e-10)
            assert np.allclose(pair.sum(axis=0), f_t, atol=1e-10)


def test_scaled_equals_unscaled_for_moderate_T(rng):
    p = random_params(rng, 3, 3)
    y = rng.integers(0, 3, size=20)
    _, _, logf = forward(p, y)
    q = p.initial * p.response[y[0]]
    for t in range(1, 20):
        q = (q @ p.transition) * p.response[y[t]]
    assert logf == pytest.approx(np.log(q.sum()), rel=1e-12)


def test_long_sequence_does_not_underflow(rng):
    p = random_params(rng, 3, 4)
    y = rng.integers(0, 4, size=10_000)
    fb = forward_backward(p, y)
    assert np.isfinite(fb.log_prob) and fb.log_prob < -1000
    assert np.allclose((fb.forward * fb.backward).sum(axis=1), 1.0, atol=1e-10)


def test_degenerate_configuration():
    p = ProbParams([1.0, 0.0], [[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(DegenerateConfigurationError):
        forward_backward(p, [0, 1])


def test_out_of_range_category(p_k2c3):
    with pytest.raises(InputError):
        forward(p_k2c3, [0, 3])
    fb = forward_backward(p_k2c3, [0, 1])
    with pytest.raises(InputError):
        posterior_states(fb, 2)
    with pytest.raises(InputError):
        posterior_pairs(fb, p_k2c3, 0)
