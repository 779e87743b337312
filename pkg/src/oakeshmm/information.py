"""Observed information of the logit parameters through the Oakes identity.

The observed information is assembled as minus the sum of two pieces of the
expected complete-data log-likelihood ``Q(theta | theta_bar)``:

* its Hessian in ``theta`` at ``theta_bar = theta``, block diagonal and in
  closed form given the expected frequencies;
* its mixed derivative in ``(theta_bar, theta)``, which needs the first
  derivatives of the expected frequencies with respect to ``theta_bar``.
  These come from differentiating the forward and backward recursions once.

Everything is evaluated from probability-scale quantities, so the same code
also handles estimates on the boundary of the parameter space, where the
information is singular.
"""
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .em import e_step
from .errors import DegenerateConfigurationError, InputError, NonMaximumWarning
from .params import (
    LogitParams,
    contrast_matrices,
    elementary_derivatives,
    jacobian_probs_wrt_logits,
    logits_to_probs,
    n_free_params,
    omega,
    probs_to_logits,
    theta_labels,
)
from .recursions import _as_sequence

RANK_SAFETY = 64


def _probs(t, allow_boundary=True):
    if isinstance(t, LogitParams):
        return logits_to_probs(t)
    if not allow_boundary:
        probs_to_logits(t)
    return t


# single-sequence derivative recursions


@dataclass(frozen=True, eq=False)
class DerivativeBundle:
    """First derivatives of the recursions of one sequence for every logit.

    Arrays carry the parameter index ``j`` first.  ``d_forward`` and
    ``d_backward`` use the scaling of :class:`~.recursions.ForwardBackward`;
    ``d_log_prob[j]`` is the derivative of log f(y), so the derivative of
    f(y) itself is ``f(y) * d_log_prob[j]``.
    """

    y: np.ndarray
    forward: np.ndarray
    backward: np.ndarray
    scale: np.ndarray
    d_initial: np.ndarray
    d_transition: np.ndarray
    d_response: np.ndarray
    d_forward: np.ndarray
    d_backward: np.ndarray
    d_log_prob: np.ndarray
    d_states: np.ndarray
    d_pairs: np.ndarray

    @property
    def d_manifest(self):
        return np.exp(np.log(self.scale).sum()) * self.d_log_prob

    def unscaled_d_forward(self):
        return self.d_forward * np.exp(np.cumsum(np.log(self.scale)))[None, :, None]

    def unscaled_d_backward(self):
        tail = np.concatenate([np.cumsum(np.log(self.scale[::-1]))[::-1][1:], [0.0]])
        return self.d_backward * np.exp(tail)[None, :, None]


def derivative_bundle(p, y, elementary=None):
    """Differentiate the recursions of sequence ``y`` with respect to all logits.

    ``elementary`` optionally overrides the seed derivatives
    ``(d_initial, d_transition, d_response)``, each with a leading parameter
    axis; by default they come from :func:`~.params.elementary_derivatives`.
    """
    p = _probs(p)
    y = _as_sequence(y, p.c)
    obs = y[None, :]
    d_init, d_trans, d_resp = elementary if elementary is not None else elementary_derivatives(p)
    d_init, d_trans, d_resp = (np.asarray(a, dtype=float) for a in (d_init, d_trans, d_resp))
    alpha, beta, scale = _kernels.forward_backward_np(obs, p.initial, p.transition, p.response)
    if not np.all(scale > 0):
        raise DegenerateConfigurationError(f"sequence {y.tolist()} has zero probability")
    da, dlogf = _kernels.dforward_np(
        obs, p.initial, p.transition, p.response, alpha, scale, d_init, d_trans, d_resp
    )
    db = _kernels.dbackward_np(obs, p.transition, p.response, beta, scale, d_trans, d_resp)
    dg, dxi = _kernels.dposteriors_np(
        obs, p.transition, p.response, alpha, beta, scale, da, db, dlogf, d_trans, d_resp
    )
    return DerivativeBundle(
        y, alpha[0], beta[0], scale[0], d_init, d_trans, d_resp,
        da[:, 0], db[:, 0], dlogf[:, 0], dg[:, 0], dxi[:, 0],
    )


def derivative_forward(p, elementary, y):
    """Scaled derivative forward vectors, shape (s, T, k), and d log f(y), shape (s,)."""
    b = derivative_bundle(p, y, elementary)
    return b.d_forward, b.d_log_prob


def derivative_backward(p, elementary, y):
    """Scaled derivative backward vectors, shape (s, T, k); zero at the last occasion."""
    return derivative_bundle(p, y, elementary).d_backward


def derivative_posteriors(bundle, t, j):
    """Derivatives of the state posterior at ``t`` and the pair posterior at ``(t-1, t)``.

    The pair derivative is ``None`` for ``t == 0``.
    """
    T = bundle.y.size
    if not 0 <= t < T:
        raise InputError(f"occasion {t} outside 0..{T - 1}")
    if not 0 <= j < bundle.d_log_prob.size:
        raise InputError(f"parameter index {j} out of range")
    pairs = bundle.d_pairs[j, t] if t > 0 else None
    return bundle.d_states[j, t], pairs


# dataset-level pieces


@dataclass(frozen=True, eq=False)
class FrequencyDerivatives:
    """Derivatives of :class:`~.em.ExpectedFrequencies` with respect to each logit.

    Every array has the parameter index first: ``emission`` is (s, k, c),
    ``initial``/``from_state``/``occupancy`` are (s, k), ``transition`` is
    (s, k, k).  ``loglik`` (s,) is the score obtained by differentiating the
    forward recursion directly.
    """

    emission: np.ndarray
    initial: np.ndarray
    from_state: np.ndarray
    transition: np.ndarray
    occupancy: np.ndarray
    loglik: np.ndarray


def expected_frequency_derivatives(d, t):
    p = _probs(t)
    d_init, d_trans, d_resp = elementary_derivatives(p)
    out, bad = _kernels.dpass(
        d.configs, d.counts.astype(float), p.initial, p.transition, p.response, d_init, d_trans, d_resp
    )
    if out is None:
        raise DegenerateConfigurationError(
            f"configuration {d.configs[bad].tolist()} has zero probability under the parameters"
        )
    dll, d_emis, d_first, d_from, d_tr, d_occ = out
    return FrequencyDerivatives(d_emis, d_first, d_from, d_tr, d_occ, dll)


def complete_data_hessian(t, ef):
    """Hessian of the expected complete-data log-likelihood in the logits.

    Block diagonal and negative semidefinite; depends on the frequencies only
    through the occupancies, the first-occasion total and the transition
    origin totals.
    """
    p = _probs(t)
    k, c = p.k, p.c
    cm = contrast_matrices(k, c)
    blocks = []
    for u in range(k):
        ai = cm.response_inv
        blocks.append(-ef.occupancy[u] * ai.T @ omega(p.response[:, u]) @ ai)
    bi = cm.initial_inv
    blocks.append(-ef.initial.sum() * bi.T @ omega(p.initial) @ bi)
    for i in range(k):
        ci = cm.transition_inv[i]
        blocks.append(-ef.from_state[i] * ci.T @ omega(p.transition[i]) @ ci)
    s = n_free_params(k, c)
    h = np.zeros((s, s))
    pos = 0
    for blk in blocks:
        w = blk.shape[0]
        h[pos : pos + w, pos : pos + w] = blk
        pos += w
    return h


def _score_from_frequencies(p, ef):
    k = p.k
    cm = contrast_matrices(k, p.c)
    parts = [
        cm.response_inv.T @ (ef.emission[u] - ef.occupancy[u] * p.response[:, u]) for u in range(k)
    ]
    parts.append(cm.initial_inv.T @ (ef.initial - ef.initial.sum() * p.initial))
    parts += [
        cm.transition_inv[i].T @ (ef.transition[i] - ef.from_state[i] * p.transition[i])
        for i in range(k)
    ]
    return np.concatenate(parts)


def score_at(d, t):
    """Score of the log-likelihood in the logits, from one E-step."""
    p = _probs(t)
    return _score_from_frequencies(p, e_step(p, d))


def _cross_from_derivatives(p, fd):
    k = p.k
    cm = contrast_matrices(k, p.c)
    cols = [
        (fd.emission[:, u, :] - fd.occupancy[:, u, None] * p.response[None, :, u]) @ cm.response_inv
        for u in range(k)
    ]
    cols.append(fd.initial @ cm.initial_inv)
    cols += [
        (fd.transition[:, i, :] - fd.from_state[:, i, None] * p.transition[None, i, :])
        @ cm.transition_inv[i]
        for i in range(k)
    ]
    return np.hstack(cols)


def cross_term(d, t_hat, allow_boundary=False):
    """Mixed second derivative of Q, rows = ``theta_bar``, columns = ``theta``.

    Raises:
        BoundaryError: if ``t_hat`` has a zero probability and
            ``allow_boundary`` is false.
    """
    p = _probs(t_hat, allow_boundary)
    return _cross_from_derivatives(p, expected_frequency_derivatives(d, p))


@dataclass(frozen=True, eq=False)
class InformationResult:
    """Observed information and everything derived from it.

    ``se_theta`` and the probability-scale standard errors are ``None``
    when the information is rank deficient; ``null_direction`` is then the
    unit vector spanning (numerically) the null space, and
    ``null_parameter`` names its largest component.
    """

    information: np.ndarray
    complete_hessian: np.ndarray
    cross_term: np.ndarray
    singular_values: np.ndarray
    rank: int
    identifiable: bool
    score: np.ndarray
    se_theta: np.ndarray = None
    cov_theta: np.ndarray = None
    se_response: np.ndarray = None
    se_initial: np.ndarray = None
    se_transition: np.ndarray = None
    null_direction: np.ndarray = None
    null_parameter: str = None

    @property
    def n_params(self):
        return self.information.shape[0]

    @property
    def se_eta(self):
        if self.se_response is None:
            return None
        return np.concatenate([self.se_response.T.ravel(), self.se_initial, self.se_transition.ravel()])


def numerical_rank(mat):
    """Rank with the relative cutoff ``s * sigma_max * eps * 64``; returns ``(rank, singular values)``."""
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv.size == 0:
        return 0, sv
    cutoff = mat.shape[0] * sv[0] * np.finfo(float).eps * RANK_SAFETY
    return int(np.sum(sv > cutoff)), sv


def observed_information(d, t_hat):
    """Observed information at an estimate, with standard errors and rank check.

    ``t_hat`` may be a :class:`~.params.LogitParams` or a
    :class:`~.params.ProbParams`; the latter may lie on the boundary, in which
    case the limiting (singular) information is returned.
    """
    p = _probs(t_hat)
    k, c = p.k, p.c
    s = n_free_params(k, c)
    ef = e_step(p, d)
    fd = expected_frequency_derivatives(d, p)
    hess = complete_data_hessian(p, ef)
    cross = _cross_from_derivatives(p, fd)
    raw = -(hess + cross)
    scale = max(np.max(np.abs(raw)), np.finfo(float).tiny) if raw.size else 1.0
    asym = np.max(np.abs(raw - raw.T)) if raw.size else 0.0
    if asym > 1e-6 * scale:
        warnings.warn(
            f"information matrix asymmetric by {asym:.3g} (relative {asym / scale:.3g}); "
            "estimate may not be converged",
            RuntimeWarning,
            stacklevel=2,
        )
    info = 0.5 * (raw + raw.T)
    rank, sv = numerical_rank(info)
    identifiable = rank == s
    score = _score_from_frequencies(p, ef)

    if s:
        eig_min = np.linalg.eigvalsh(info)[0]
        if eig_min < -np.sqrt(np.finfo(float).eps) * sv[0]:
            warnings.warn(
                f"observed information has a negative eigenvalue ({eig_min:.3g}); "
                "the estimate is not a local maximum",
                NonMaximumWarning,
                stacklevel=2,
            )

    if not identifiable:
        _, _, vt = np.linalg.svd(info)
        v = vt[-1]
        v = v * np.sign(v[np.argmax(np.abs(v))])
        return InformationResult(
            info, hess, cross, sv, rank, False, score,
            null_direction=v,
            null_parameter=theta_labels(k, c)[int(np.argmax(np.abs(v)))],
        )

    cov = np.linalg.inv(info)
    cov = 0.5 * (cov + cov.T)
    se_theta = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    g = jacobian_probs_wrt_logits(p)
    v_eta = g @ cov @ g.T
    se_eta = np.sqrt(np.clip(np.diag(v_eta), 0.0, None))
    se_resp = se_eta[: c * k].reshape(k, c).T
    se_init = se_eta[c * k : c * k + k]
    se_trans = se_eta[c * k + k :].reshape(k, k)
    return InformationResult(
        info, hess, cross, sv, rank, True, score,
        se_theta=se_theta, cov_theta=cov,
        se_response=se_resp, se_initial=se_init, se_transition=se_trans,
    )
