"""Slow reference computations used to check the fast code paths.

Nothing here shares code with the recursions or the information module:
likelihoods and posteriors are sums over every latent path, derivatives are
finite differences.
"""
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import OracleError

MAX_PATHS = 10**6


@dataclass(frozen=True, eq=False)
class PathTable:
    """All ``k**T`` latent paths with their prior probabilities.

    ``joint(y)`` multiplies in the response probabilities of one observed
    sequence.
    """

    paths: np.ndarray
    prior: np.ndarray
    response: np.ndarray

    def joint(self, y):
        y = np.asarray(y)
        if y.size != self.paths.shape[1]:
            raise OracleError("sequence length does not match the path table")
        return self.prior * np.prod(self.response[y[None, :], self.paths], axis=1)


def path_table(p, T):
    k = p.k
    if k**T > MAX_PATHS:
        raise OracleError(f"{k}**{T} latent paths exceed the enumeration limit {MAX_PATHS}")
    paths = np.array(list(itertools.product(range(k), repeat=T)), dtype=np.int64).reshape(-1, T)
    prior = p.initial[paths[:, 0]].copy()
    for t in range(1, T):
        prior *= p.transition[paths[:, t - 1], paths[:, t]]
    return PathTable(paths, prior, np.asarray(p.response))


def enum_likelihood(p, y):
    return float(path_table(p, len(y)).joint(y).sum())


def enum_posterior_states(p, y, t):
    tab = path_table(p, len(y))
    w = tab.joint(y)
    out = np.zeros(p.k)
    np.add.at(out, tab.paths[:, t], w)
    return out / w.sum()


def enum_posterior_pairs(p, y, t):
    """Joint posterior of the states at ``(t-1, t)``."""
    tab = path_table(p, len(y))
    w = tab.joint(y)
    out = np.zeros((p.k, p.k))
    np.add.at(out, (tab.paths[:, t - 1], tab.paths[:, t]), w)
    return out / w.sum()


def enum_loglik(p, d):
    return float(sum(n * np.log(enum_likelihood(p, y)) for y, n in zip(d.configs, d.counts)))


def enum_backward(p, y, t):
    """Probability of the observations after ``t`` given each state at ``t``."""
    y = np.asarray(y)
    T, k = y.size, p.k
    out = np.zeros(k)
    if k ** (T - t - 1) > MAX_PATHS:
        raise OracleError("too many future paths to enumerate")
    for u in range(k):
        for future in itertools.product(range(k), repeat=T - t - 1):
            prob, prev = 1.0, u
            for step, state in enumerate(future):
                prob *= p.transition[prev, state] * p.response[y[t + 1 + step], state]
                prev = state
            out[u] += prob
    return out


def _eps():
    return np.finfo(float).eps


def default_step(theta, order=3):
    """Relative step ``eps**(1/order) * (1 + |theta_j|)``."""
    return _eps() ** (1.0 / order) * (1.0 + np.abs(theta))


def _theta(t):
    return np.array(t.theta if hasattr(t, "theta") else t, dtype=float)


def _check(val):
    val = np.asarray(val, dtype=float)
    if not np.all(np.isfinite(val)):
        raise OracleError("function returned non-finite values during differencing")
    return val


def fd_jacobian(f, t, h=None, points=5):
    """Central-difference Jacobian of a vector function; column ``j`` is d f / d theta_j.

    ``points`` selects the 3-point or 5-point stencil.
    """
    x = _theta(t)
    if h is None:
        h = default_step(x, order=3 if points == 3 else 5)
    h = np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h[j]
        if points == 3:
            col = (_check(f(x + e)) - _check(f(x - e))) / (2 * h[j])
        elif points == 5:
            col = (
                -_check(f(x + 2 * e)) + 8 * _check(f(x + e)) - 8 * _check(f(x - e)) + _check(f(x - 2 * e))
            ) / (12 * h[j])
        else:
            raise OracleError("points must be 3 or 5")
        cols.append(np.atleast_1d(col))
    return np.stack(cols, axis=-1)


def fd_gradient(f, t, h=None, points=3):
    """Central-difference gradient of a scalar function of the packed logits."""
    return fd_jacobian(lambda x: np.atleast_1d(f(x)), t, h, points)[0]


def fd_hessian(f, t, h=None, grad=None, points=5):
    """Finite-difference Hessian.

    With ``grad`` the Hessian is the symmetrized central-difference Jacobian of
    the analytic gradient; otherwise second differences of ``f`` with step
    ``eps**(1/4) * (1 + |theta_j|)``.
    """
    x = _theta(t)
    if grad is not None:
        jac = fd_jacobian(grad, x, h, points)
        return 0.5 * (jac + jac.T)
    if h is None:
        h = default_step(x, order=4)
    h = np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    s = x.size
    f0 = float(_check(f(x)))
    hess = np.empty((s, s))
    for i in range(s):
        ei = np.zeros(s)
        ei[i] = h[i]
        hess[i, i] = (float(_check(f(x + ei))) - 2 * f0 + float(_check(f(x - ei)))) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(s)
            ej[j] = h[j]
            val = (
                float(_check(f(x + ei + ej)))
                - float(_check(f(x + ei - ej)))
                - float(_check(f(x - ei + ej)))
                + float(_check(f(x - ei - ej)))
            ) / (4 * h[i] * h[j])
            hess[i, j] = hess[j, i] = val
    return hess
