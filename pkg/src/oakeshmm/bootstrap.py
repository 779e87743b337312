"""Simulation from a fitted model and parametric-bootstrap standard errors."""
import logging
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .em import FitOptions, fit, start_rng
from .errors import BootstrapUnreliableError, HMMError, InputError
from .params import probs_to_logits

log = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.2


def _draw(rng, probs):
    """One categorical draw per row of ``probs`` (rows sum to one)."""
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0
    return (rng.random((probs.shape[0], 1)) > cdf).sum(axis=1)


def simulate(p, n, T, seed):
    """Draw ``n`` independent sequences of length ``T`` from the model."""
    if n < 1 or T < 1:
        raise InputError("n and T must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    states = np.empty((n, T), dtype=np.int64)
    obs = np.empty((n, T), dtype=np.int64)
    states[:, 0] = _draw(rng, np.broadcast_to(p.initial, (n, p.k)))
    for t in range(1, T):
        states[:, t] = _draw(rng, p.transition[states[:, t - 1]])
    for t in range(T):
        obs[:, t] = _draw(rng, p.response.T[states[:, t]])
    return Dataset.from_sequences(obs, c=p.c)


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    """Standard deviations of replicate estimates.

    ``se_theta`` uses only replicates with an interior estimate; the count is
    ``n_interior``.
    """

    B: int
    n_failed: int
    se_response: np.ndarray
    se_initial: np.ndarray
    se_transition: np.ndarray
    se_theta: np.ndarray
    n_interior: int
    seed: int
    estimates: np.ndarray

    @property
    def n_succeeded(self):
        return self.B - self.n_failed

    @property
    def se_eta(self):
        return np.concatenate([self.se_response.T.ravel(), self.se_initial, self.se_transition.ravel()])


def _replicate(p_hat, n, T, k, seed, index, opts):
    data_seed = int(start_rng(seed, index).integers(2**63 - 1))
    d = simulate(p_hat, n, T, data_seed)
    if d.c != p_hat.c:
        raise InputError("category count mismatch")
    res = fit(d, k, FitOptions(max_iter=opts.max_iter, tol=opts.tol, n_starts=1, init=p_hat))
    if not res.converged:
        raise HMMError(f"replicate {index} did not converge in {opts.max_iter} iterations")
    return res.params


def bootstrap_se(p_hat, n, T, k, B, seed, opts=None):
    """Parametric-bootstrap standard errors on both scales.

    Each replicate simulates a dataset of the original size from ``p_hat``
    with its own random stream ``(seed, replicate)`` and refits starting from
    ``p_hat``, which keeps state labels aligned.  Replicates that fail to
    fit or converge are excluded and counted.

    Raises:
        BootstrapUnreliableError: if more than 20% of replicates fail.
    """
    if B < 2:
        raise InputError("need at least two bootstrap replicates")
    if k != p_hat.k:
        raise InputError("k does not match the fitted parameters")
    opts = opts or FitOptions()
    etas, thetas, failed = [], [], 0
    for b in range(B):
        try:
            est = _replicate(p_hat, n, T, k, seed, b, opts)
        except HMMError as exc:
            log.debug("bootstrap replicate %d failed: %s", b, exc)
            failed += 1
            continue
        etas.append(est.to_eta())
        if est.is_interior():
            thetas.append(probs_to_logits(est).theta)
    if failed > MAX_FAILURE_RATE * B:
        raise BootstrapUnreliableError(f"{failed} of {B} bootstrap replicates failed")
    eta = np.array(etas)
    se_eta = eta.std(axis=0, ddof=1)
    c = p_hat.c
    s_len = p_hat.n_params
    se_theta = np.array(thetas).std(axis=0, ddof=1) if len(thetas) > 1 else np.full(s_len, np.nan)
    return BootstrapResult(
        B=B,
        n_failed=failed,
        se_response=se_eta[: c * k].reshape(k, c).T,
        se_initial=se_eta[c * k : c * k + k],
        se_transition=se_eta[c * k + k :].reshape(k, k),
        se_theta=se_theta,
        n_interior=len(thetas),
        seed=seed,
        estimates=eta,
    )
