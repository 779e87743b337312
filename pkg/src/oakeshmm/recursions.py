"""Scaled forward-backward recursions for a single sequence or a whole dataset.

Occasions are 0-based: ``t`` runs over ``0..T-1`` and the pair posterior at
``t`` refers to the states at ``(t-1, t)``.
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateConfigurationError, InputError


def _as_sequence(y, c):
    y = np.asarray(y)
    if y.ndim != 1 or y.size == 0:
        raise InputError("a sequence must be a non-empty 1-d array")
    if not np.issubdtype(y.dtype, np.integer):
        raise InputError("sequence entries must be integer category codes")
    if y.min() < 0 or y.max() >= c:
        raise InputError(f"category code outside 0..{c - 1}")
    return y.astype(np.int64)


@dataclass(frozen=True, eq=False)
class ForwardBackward:
    """Scaled forward/backward vectors of one sequence.

    ``forward[t]`` sums to one; the unscaled forward vector is
    ``forward[t] * exp(cumsum(log scale)[t])``.  ``backward[t]`` is the
    unscaled backward vector divided by ``prod(scale[t+1:])``.
    """

    y: np.ndarray
    forward: np.ndarray
    backward: np.ndarray
    scale: np.ndarray

    @property
    def T(self):
        return self.y.size

    @property
    def log_prob(self):
        """log f(y), the log manifest probability."""
        return float(np.log(self.scale).sum())

    def unscaled_forward(self):
        return self.forward * np.exp(np.cumsum(np.log(self.scale)))[:, None]

    def unscaled_backward(self):
        tail = np.concatenate([np.cumsum(np.log(self.scale[::-1]))[::-1][1:], [0.0]])
        return self.backward * np.exp(tail)[:, None]


def _check_scale(scale, y):
    if not np.all(scale > 0):
        raise DegenerateConfigurationError(
            f"sequence {np.asarray(y).tolist()} has zero probability under the parameters"
        )


def forward_backward(p, y):
    """Run both recursions for one sequence.

    Raises:
        InputError: for codes outside ``0..c-1``.
        DegenerateConfigurationError: if the sequence has probability zero.
    """
    y = _as_sequence(y, p.c)
    alpha, beta, scale = _kernels.forward_backward(
        y[None, :], p.initial, p.transition, p.response
    )
    _check_scale(scale[0], y)
    return ForwardBackward(y, alpha[0], beta[0], scale[0])


def forward(p, y):
    """Scaled forward vectors, per-step scale factors and log f(y)."""
    fb = forward_backward(p, y)
    return fb.forward, fb.scale, fb.log_prob


def backward(p, y):
    """Scaled backward vectors (see :class:`ForwardBackward`)."""
    return forward_backward(p, y).backward


def posterior_states(fb, t):
    """Posterior distribution of the state at occasion ``t`` given the whole sequence."""
    if not 0 <= t < fb.T:
        raise InputError(f"occasion {t} outside 0..{fb.T - 1}")
    return fb.forward[t] * fb.backward[t]


def posterior_pairs(fb, p, t):
    """Joint posterior of the states at ``(t-1, t)``; rows index the earlier state."""
    if not 1 <= t < fb.T:
        raise InputError(f"pair occasion {t} outside 1..{fb.T - 1}")
    right = p.response[fb.y[t]] * fb.backward[t] / fb.scale[t]
    return fb.forward[t - 1][:, None] * p.transition * right[None, :]


def batch_forward_backward(p, d):
    """Scaled forward/backward arrays for every configuration of a dataset.

    Returns ``(forward, backward, scale)`` with shapes (m, T, k), (m, T, k),
    (m, T).
    """
    alpha, beta, scale = _kernels.forward_backward(d.configs, p.initial, p.transition, p.response)
    bad = np.flatnonzero(~np.all(scale > 0, axis=1))
    if bad.size:
        _check_scale(scale[bad[0]], d.configs[bad[0]])
    return alpha, beta, scale


def log_manifest_probs(p, d):
    """(m,) vector of log f(y) for each configuration."""
    _, _, scale = batch_forward_backward(p, d)
    return np.log(scale).sum(axis=1)
