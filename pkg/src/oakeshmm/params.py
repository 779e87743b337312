"""Probability-scale and logit-scale parametrizations of a categorical HMM.

The logit vector ``theta`` is packed in a fixed order that every derivative
index in the package refers to:

1. response logits, state by state, categories 1..c-1 against category 0;
2. initial-state logits, states 1..k-1 against state 0;
3. transition logits, row by row, destinations ascending (skipping the
   diagonal) against the diagonal element.

States are 0-based in code and 1-based in printed labels.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BoundaryError, InputError

SUM_TOL = 1e-12


def n_free_params(k, c):
    """Length of the packed logit vector for ``k`` states and ``c`` categories."""
    return (c - 1) * k + (k - 1) + k * (k - 1)


def _check_simplex(name, arr, axis):
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite entries")
    if np.any(arr < 0) or np.any(arr > 1):
        raise InputError(f"{name} has entries outside [0, 1]")
    err = np.max(np.abs(arr.sum(axis=axis) - 1.0))
    if err > SUM_TOL:
        raise InputError(f"{name} does not sum to 1 (max error {err:.3g})")


@dataclass(frozen=True, eq=False)
class ProbParams:
    """Model parameters on the probability scale.

    Attributes:
        initial: (k,) initial-state distribution.
        transition: (k, k) row-stochastic matrix; row ``i`` is the distribution
            of the next state given current state ``i``.
        response: (c, k) column-stochastic matrix; column ``u`` is the
            distribution of the observed category given state ``u``.
    """

    initial: np.ndarray
    transition: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        lam = np.array(self.initial, dtype=float)
        pi = np.array(self.transition, dtype=float)
        phi = np.array(self.response, dtype=float)
        if lam.ndim != 1 or lam.size < 1:
            raise InputError("initial must be a non-empty vector")
        k = lam.size
        if pi.shape != (k, k):
            raise InputError(f"transition must have shape ({k}, {k}), got {pi.shape}")
        if phi.ndim != 2 or phi.shape[1] != k or phi.shape[0] < 2:
            raise InputError(f"response must have shape (c >= 2, {k}), got {phi.shape}")
        _check_simplex("initial", lam, 0)
        _check_simplex("transition", pi, 1)
        _check_simplex("response", phi, 0)
        for arr in (lam, pi, phi):
            arr.setflags(write=False)
        object.__setattr__(self, "initial", lam)
        object.__setattr__(self, "transition", pi)
        object.__setattr__(self, "response", phi)

    @property
    def k(self):
        return self.initial.size

    @property
    def c(self):
        return self.response.shape[0]

    @property
    def n_params(self):
        return n_free_params(self.k, self.c)

    def is_interior(self):
        return bool(
            np.all(self.initial > 0) and np.all(self.transition > 0) and np.all(self.response > 0)
        )

    def permute_states(self, order):
        """Relabel states so that new state ``i`` is old state ``order[i]``."""
        order = np.asarray(order)
        return ProbParams(
            self.initial[order],
            self.transition[np.ix_(order, order)],
            self.response[:, order],
        )

    def to_eta(self):
        """Flatten as (response by state, initial, transition by row)."""
        return np.concatenate([self.response.T.ravel(), self.initial, self.transition.ravel()])

    def to_dict(self):
        return {
            "initial": self.initial.tolist(),
            "transition": self.transition.tolist(),
            "response": self.response.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(d["initial"], d["transition"], d["response"])
        except KeyError as exc:
            raise InputError(f"parameter mapping lacks key {exc.args[0]!r}") from None


@dataclass(frozen=True, eq=False)
class LogitParams:
    """Unconstrained parametrization, stored as the packed vector ``theta``."""

    theta: np.ndarray
    k: int
    c: int

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).ravel()
        if self.k < 1 or self.c < 2:
            raise InputError("need k >= 1 and c >= 2")
        s = n_free_params(self.k, self.c)
        if theta.size != s:
            raise InputError(f"theta must have length {s} for k={self.k}, c={self.c}; got {theta.size}")
        if not np.all(np.isfinite(theta)):
            raise InputError("theta must be finite")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def n_params(self):
        return self.theta.size

    @property
    def response_logits(self):
        """(k, c-1) array; row ``u`` holds the logits of state ``u``."""
        k, c = self.k, self.c
        return self.theta[: k * (c - 1)].reshape(k, c - 1)

    @property
    def initial_logits(self):
        k, c = self.k, self.c
        off = k * (c - 1)
        return self.theta[off : off + k - 1]

    @property
    def transition_logits(self):
        """(k, k-1) array; row ``i`` holds the off-diagonal logits of row ``i``."""
        k, c = self.k, self.c
        off = k * (c - 1) + k - 1
        return self.theta[off:].reshape(k, k - 1)

    @classmethod
    def from_blocks(cls, response_logits, initial_logits, transition_logits):
        resp = np.asarray(response_logits, dtype=float)
        k, cm1 = resp.shape
        theta = np.concatenate(
            [resp.ravel(), np.ravel(initial_logits), np.ravel(transition_logits)]
        )
        return cls(theta, k, cm1 + 1)


@dataclass(frozen=True)
class ContrastMatrices:
    """Constant 0/+-1 matrices mapping log-probabilities to logits and back.

    ``response @ log(phi_u)`` gives the response logits of state ``u``;
    ``softmax(response_inv @ alpha_u)`` inverts it.  ``transition[i]`` and
    ``transition_inv[i]`` do the same for row ``i`` of the transition matrix,
    with the diagonal element as the reference.
    """

    response: np.ndarray
    response_inv: np.ndarray
    initial: np.ndarray
    initial_inv: np.ndarray
    transition: np.ndarray
    transition_inv: np.ndarray


def _baseline_first(h):
    fwd = np.hstack([-np.ones((h - 1, 1)), np.eye(h - 1)])
    inv = np.vstack([np.zeros((1, h - 1)), np.eye(h - 1)])
    return fwd, inv


def _baseline_at(h, ref):
    keep = [u for u in range(h) if u != ref]
    fwd = np.zeros((h - 1, h))
    fwd[np.arange(h - 1), keep] = 1.0
    fwd[:, ref] = -1.0
    inv = np.zeros((h, h - 1))
    inv[keep, np.arange(h - 1)] = 1.0
    return fwd, inv


@lru_cache(maxsize=64)
def contrast_matrices(k, c):
    a, a_inv = _baseline_first(c)
    b, b_inv = _baseline_first(k)
    ct = np.empty((k, k - 1, k))
    ct_inv = np.empty((k, k, k - 1))
    for i in range(k):
        ct[i], ct_inv[i] = _baseline_at(k, i)
    mats = ContrastMatrices(a, a_inv, b, b_inv, ct, ct_inv)
    for arr in (a, a_inv, b, b_inv, ct, ct_inv):
        arr.setflags(write=False)
    return mats


def softmax(z, axis=-1):
    z = np.asarray(z, dtype=float)
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _positive_log(name, arr):
    bad = np.argwhere(~(arr > 0))
    if bad.size:
        idx = tuple(int(i) for i in bad[0])
        raise BoundaryError(f"{name}{list(idx)}", float(arr[idx]))
    return np.log(arr)


def probs_to_logits(p):
    """Map interior probabilities to the packed logit vector.

    Raises:
        BoundaryError: if any probability is zero.
    """
    cm = contrast_matrices(p.k, p.c)
    log_phi = _positive_log("response", p.response)
    log_lam = _positive_log("initial", p.initial)
    log_pi = _positive_log("transition", p.transition)
    alpha = (cm.response @ log_phi).T
    beta = cm.initial @ log_lam
    gamma = np.einsum("iab,ib->ia", cm.transition, log_pi)
    return LogitParams.from_blocks(alpha, beta, gamma)


def logits_to_probs(t):
    cm = contrast_matrices(t.k, t.c)
    phi = softmax(t.response_logits @ cm.response_inv.T, axis=1).T
    lam = softmax(cm.initial_inv @ t.initial_logits)
    pi = softmax(np.einsum("iab,ib->ia", cm.transition_inv, t.transition_logits), axis=1)
    return ProbParams(lam, pi, phi)


def omega(v):
    """Covariance matrix diag(v) - v v' of a multinomial with cell probabilities ``v``."""
    v = np.asarray(v, dtype=float)
    return np.diag(v) - np.outer(v, v)


def jacobian_blocks(p):
    """Per-block derivatives of the probabilities with respect to their own logits.

    Returns ``(d_response, d_initial, d_transition)`` with shapes
    (k, c, c-1), (k, k-1), (k, k, k-1); e.g. ``d_response[u]`` is the
    derivative of column ``u`` of the response matrix with respect to the
    response logits of state ``u``.  Defined on the closed simplex, so it is
    usable at boundary estimates.
    """
    cm = contrast_matrices(p.k, p.c)
    d_resp = np.stack([omega(p.response[:, u]) @ cm.response_inv for u in range(p.k)])
    d_init = omega(p.initial) @ cm.initial_inv
    d_trans = np.stack([omega(p.transition[i]) @ cm.transition_inv[i] for i in range(p.k)])
    return d_resp, d_init, d_trans


def jacobian_probs_wrt_logits(p):
    """Block-diagonal Jacobian of ``ProbParams.to_eta()`` with respect to ``theta``.

    Accepts either parametrization; shape is (c*k + k + k*k, s).
    """
    if isinstance(p, LogitParams):
        p = logits_to_probs(p)
    k, c = p.k, p.c
    d_resp, d_init, d_trans = jacobian_blocks(p)
    g = np.zeros((c * k + k + k * k, n_free_params(k, c)))
    row, col = 0, 0
    for u in range(k):
        g[row : row + c, col : col + c - 1] = d_resp[u]
        row += c
        col += c - 1
    g[row : row + k, col : col + k - 1] = d_init
    row += k
    col += k - 1
    for i in range(k):
        g[row : row + k, col : col + k - 1] = d_trans[i]
        row += k
        col += k - 1
    return g


def elementary_derivatives(p):
    """Derivatives of every probability with respect to every logit.

    Returns arrays ``(d_initial, d_transition, d_response)`` of shapes
    (s, k), (s, k, k), (s, c, k), indexed first by the position ``j`` in the
    packed logit vector.  Most slices are zero: a response logit of state
    ``u`` only moves column ``u`` of the response matrix, and so on.
    """
    if isinstance(p, LogitParams):
        p = logits_to_probs(p)
    k, c = p.k, p.c
    s = n_free_params(k, c)
    d_resp_blk, d_init_blk, d_trans_blk = jacobian_blocks(p)
    d_init = np.zeros((s, k))
    d_trans = np.zeros((s, k, k))
    d_resp = np.zeros((s, c, k))
    j = 0
    for u in range(k):
        for y in range(c - 1):
            d_resp[j, :, u] = d_resp_blk[u][:, y]
            j += 1
    for u in range(k - 1):
        d_init[j] = d_init_blk[:, u]
        j += 1
    for i in range(k):
        for col in range(k - 1):
            d_trans[j, i, :] = d_trans_blk[i][:, col]
            j += 1
    return d_init, d_trans, d_resp


def elementary_derivative(t, j):
    """Single-index view of :func:`elementary_derivatives`: ``(d_initial, d_transition, d_response)``."""
    s = n_free_params(t.k, t.c)
    if not 0 <= j < s:
        raise InputError(f"parameter index {j} outside 0..{s - 1}")
    d_init, d_trans, d_resp = elementary_derivatives(t)
    return d_init[j], d_trans[j], d_resp[j]


def theta_labels(k, c):
    """Human-readable names for the packed logit vector, 1-based states."""
    labels = [f"response_logit[y={y}|u={u + 1}]" for u in range(k) for y in range(1, c)]
    labels += [f"initial_logit[u={u + 1}]" for u in range(1, k)]
    labels += [
        f"transition_logit[{i + 1}->{u + 1}]" for i in range(k) for u in range(k) if u != i
    ]
    return labels


def eta_labels(k, c):
    labels = [f"response[y={y}|u={u + 1}]" for u in range(k) for y in range(c)]
    labels += [f"initial[u={u + 1}]" for u in range(k)]
    labels += [f"transition[{i + 1}->{u + 1}]" for i in range(k) for u in range(k)]
    return labels
