"""Hot loops: scaled forward-backward, E-step accumulation and derivative passes.

Each kernel exists twice, a numba version (``*_nb``) that loops over
configurations one at a time, and a numpy version (``*_np``) vectorized over
configurations (and over parameters, for the derivative pass).  The public
names at the bottom dispatch on :mod:`._accel`.

Scaling convention (shared by every kernel): ``scale[t]`` is the sum of the
unnormalized forward vector at step ``t``, forward vectors are normalized to
sum to one, and backward vectors are divided by ``scale[t + 1]``.  Then the
posterior of the state at ``t`` is ``alpha[t] * beta[t]`` and the pairwise
posterior is ``alpha[t-1, :, None] * trans * (resp[y_t] * beta[t]) / scale[t]``.
Derivative vectors carry the same scale as the vectors they differentiate.

Arguments are plain arrays: ``obs`` (m, T) int64, ``counts`` (m,) float,
``init`` (k,), ``trans`` (k, k), ``resp`` (c, k), ``d_init`` (s, k),
``d_trans`` (s, k, k), ``d_resp`` (s, c, k).
"""
import numpy as np

from ._accel import HAS_NUMBA, njit


# numpy path


def forward_backward_np(obs, init, trans, resp):
    m, T = obs.shape
    k = init.size
    alpha = np.empty((m, T, k))
    beta = np.empty((m, T, k))
    scale = np.empty((m, T))
    a = init[None, :] * resp[obs[:, 0], :]
    with np.errstate(invalid="ignore", divide="ignore"):
        for t in range(T):
            if t > 0:
                a = (alpha[:, t - 1, :] @ trans) * resp[obs[:, t], :]
            scale[:, t] = a.sum(axis=1)
            alpha[:, t, :] = a / scale[:, t, None]
        beta[:, T - 1, :] = 1.0
        for t in range(T - 2, -1, -1):
            beta[:, t, :] = ((resp[obs[:, t + 1], :] * beta[:, t + 1, :]) @ trans.T) / scale[:, t + 1, None]
    return alpha, beta, scale


def pair_posteriors_np(obs, trans, resp, alpha, beta, scale):
    """(m, T, k, k) pairwise posteriors; slice ``t = 0`` is left as zeros."""
    m, T, k = alpha.shape
    xi = np.zeros((m, T, k, k))
    for t in range(1, T):
        right = resp[obs[:, t], :] * beta[:, t, :] / scale[:, t, None]
        xi[:, t] = alpha[:, t - 1, :, None] * trans[None] * right[:, None, :]
    return xi


def estep_np(obs, counts, init, trans, resp):
    m, T = obs.shape
    k, c = init.size, resp.shape[0]
    alpha, beta, scale = forward_backward_np(obs, init, trans, resp)
    bad = np.flatnonzero(~np.all(scale > 0, axis=1))
    if bad.size:
        return None, int(bad[0])
    gamma = alpha * beta
    xi = pair_posteriors_np(obs, trans, resp, alpha, beta, scale)
    w_gamma = counts[:, None, None] * gamma
    emis = np.zeros((k, c))
    for t in range(T):
        onehot = np.zeros((m, c))
        onehot[np.arange(m), obs[:, t]] = 1.0
        emis += w_gamma[:, t, :].T @ onehot
    first = w_gamma[:, 0, :].sum(axis=0)
    frm = w_gamma[:, : T - 1, :].sum(axis=(0, 1))
    occ = w_gamma.sum(axis=(0, 1))
    tr = np.einsum("m,mtab->ab", counts, xi)
    loglik = float(counts @ np.log(scale).sum(axis=1))
    return (loglik, emis, first, frm, tr, occ), -1


def dforward_np(obs, init, trans, resp, alpha, scale, d_init, d_trans, d_resp):
    """Scaled derivative forward vectors (s, m, T, k) and d log f (s, m)."""
    m, T, k = alpha.shape
    s = d_init.shape[0]
    da = np.empty((s, m, T, k))
    y0 = obs[:, 0]
    da[:, :, 0, :] = (
        d_resp[:, y0, :] * init[None, None, :] + resp[None, y0, :] * d_init[:, None, :]
    ) / scale[None, :, 0, None]
    for t in range(1, T):
        y = obs[:, t]
        pred = alpha[:, t - 1, :] @ trans
        d_pred = np.einsum("ma,sab->smb", alpha[:, t - 1, :], d_trans) + da[:, :, t - 1, :] @ trans
        da[:, :, t, :] = (d_resp[:, y, :] * pred[None] + resp[None, y, :] * d_pred) / scale[None, :, t, None]
    dlogf = da[:, :, T - 1, :].sum(axis=2)
    return da, dlogf


def dbackward_np(obs, trans, resp, beta, scale, d_trans, d_resp):
    m, T, k = beta.shape
    s = d_trans.shape[0]
    db = np.empty((s, m, T, k))
    db[:, :, T - 1, :] = 0.0
    for t in range(T - 2, -1, -1):
        y = obs[:, t + 1]
        mb = resp[y, :] * beta[:, t + 1, :]
        term = np.einsum("sab,mb->sma", d_trans, mb)
        term += (d_resp[:, y, :] * beta[None, :, t + 1, :]) @ trans.T
        term += (resp[None, y, :] * db[:, :, t + 1, :]) @ trans.T
        db[:, :, t, :] = term / scale[None, :, t + 1, None]
    return db


def dposteriors_np(obs, trans, resp, alpha, beta, scale, da, db, dlogf, d_trans, d_resp):
    """Derivatives of the state and pair posteriors: (s, m, T, k) and (s, m, T, k, k)."""
    s, m, T, k = da.shape
    gamma = alpha * beta
    dgamma = da * beta[None] + alpha[None] * db - gamma[None] * dlogf[:, :, None, None]
    dxi = np.zeros((s, m, T, k, k))
    for t in range(1, T):
        y = obs[:, t]
        right = resp[y, :] * beta[:, t, :]
        d_right = d_resp[:, y, :] * beta[None, :, t, :] + resp[None, y, :] * db[:, :, t, :]
        xi_t = alpha[:, t - 1, :, None] * trans[None] * right[:, None, :]
        term = da[:, :, t - 1, :, None] * trans[None, None] * right[None, :, None, :]
        term += alpha[None, :, t - 1, :, None] * d_trans[:, None] * right[None, :, None, :]
        term += alpha[None, :, t - 1, :, None] * trans[None, None] * d_right[:, :, None, :]
        dxi[:, :, t] = (term - xi_t[None] * dlogf[:, :, None, None]) / scale[None, :, t, None, None]
    return dgamma, dxi


def dpass_np(obs, counts, init, trans, resp, d_init, d_trans, d_resp):
    m, T = obs.shape
    k, c = init.size, resp.shape[0]
    s = d_init.shape[0]
    alpha, beta, scale = forward_backward_np(obs, init, trans, resp)
    bad = np.flatnonzero(~np.all(scale > 0, axis=1))
    if bad.size:
        return None, int(bad[0])
    da, dlogf = dforward_np(obs, init, trans, resp, alpha, scale, d_init, d_trans, d_resp)
    db = dbackward_np(obs, trans, resp, beta, scale, d_trans, d_resp)
    dgamma, dxi = dposteriors_np(obs, trans, resp, alpha, beta, scale, da, db, dlogf, d_trans, d_resp)
    w = counts[None, :, None, None] * dgamma
    d_emis = np.zeros((s, k, c))
    for t in range(T):
        onehot = np.zeros((m, c))
        onehot[np.arange(m), obs[:, t]] = 1.0
        d_emis += np.einsum("smk,mc->skc", w[:, :, t, :], onehot)
    d_first = w[:, :, 0, :].sum(axis=1)
    d_from = w[:, :, : T - 1, :].sum(axis=(1, 2))
    d_occ = w.sum(axis=(1, 2))
    d_tr = np.einsum("m,smtab->sab", counts, dxi)
    d_loglik = dlogf @ counts
    return (d_loglik, d_emis, d_first, d_from, d_tr, d_occ), -1


# numba path


@njit
def _fb_one_nb(y, init, trans, resp, alpha, beta, scale):
    T = y.shape[0]
    k = init.shape[0]
    tot = 0.0
    for u in range(k):
        alpha[0, u] = init[u] * resp[y[0], u]
        tot += alpha[0, u]
    scale[0] = tot
    if not tot > 0.0:
        return False
    for u in range(k):
        alpha[0, u] /= tot
    for t in range(1, T):
        tot = 0.0
        for u in range(k):
            acc = 0.0
            for a in range(k):
                acc += alpha[t - 1, a] * trans[a, u]
            alpha[t, u] = acc * resp[y[t], u]
            tot += alpha[t, u]
        scale[t] = tot
        if not tot > 0.0:
            return False
        for u in range(k):
            alpha[t, u] /= tot
    for u in range(k):
        beta[T - 1, u] = 1.0
    for t in range(T - 2, -1, -1):
        for a in range(k):
            acc = 0.0
            for b in range(k):
                acc += trans[a, b] * resp[y[t + 1], b] * beta[t + 1, b]
            beta[t, a] = acc / scale[t + 1]
    return True


@njit
def forward_backward_nb(obs, init, trans, resp):
    m, T = obs.shape
    k = init.shape[0]
    alpha = np.empty((m, T, k))
    beta = np.empty((m, T, k))
    scale = np.empty((m, T))
    for i in range(m):
        ok = _fb_one_nb(obs[i], init, trans, resp, alpha[i], beta[i], scale[i])
        if not ok:
            for t in range(T):
                if not scale[i, t] > 0.0:
                    for tt in range(t, T):
                        scale[i, tt] = 0.0
                        for u in range(k):
                            alpha[i, tt, u] = np.nan
                            beta[i, tt, u] = np.nan
                    break
    return alpha, beta, scale


@njit
def _estep_nb(obs, counts, init, trans, resp):
    m, T = obs.shape
    k = init.shape[0]
    c = resp.shape[0]
    emis = np.zeros((k, c))
    first = np.zeros(k)
    frm = np.zeros(k)
    tr = np.zeros((k, k))
    occ = np.zeros(k)
    alpha = np.empty((T, k))
    beta = np.empty((T, k))
    scale = np.empty(T)
    loglik = 0.0
    for i in range(m):
        y = obs[i]
        w = counts[i]
        if not _fb_one_nb(y, init, trans, resp, alpha, beta, scale):
            return loglik, emis, first, frm, tr, occ, i
        ll = 0.0
        for t in range(T):
            ll += np.log(scale[t])
            for u in range(k):
                g = w * alpha[t, u] * beta[t, u]
                emis[u, y[t]] += g
                occ[u] += g
                if t == 0:
                    first[u] += g
                if t < T - 1:
                    frm[u] += g
            if t > 0:
                for a in range(k):
                    left = w * alpha[t - 1, a] / scale[t]
                    for b in range(k):
                        tr[a, b] += left * trans[a, b] * resp[y[t], b] * beta[t, b]
        loglik += w * ll
    return loglik, emis, first, frm, tr, occ, -1


@njit
def _dpass_nb(obs, counts, init, trans, resp, d_init, d_trans, d_resp):
    m, T = obs.shape
    k = init.shape[0]
    c = resp.shape[0]
    s = d_init.shape[0]
    d_loglik = np.zeros(s)
    d_emis = np.zeros((s, k, c))
    d_first = np.zeros((s, k))
    d_from = np.zeros((s, k))
    d_tr = np.zeros((s, k, k))
    d_occ = np.zeros((s, k))
    alpha = np.empty((T, k))
    beta = np.empty((T, k))
    scale = np.empty(T)
    da = np.empty((T, k))
    db = np.empty((T, k))
    for i in range(m):
        y = obs[i]
        w = counts[i]
        if not _fb_one_nb(y, init, trans, resp, alpha, beta, scale):
            return d_loglik, d_emis, d_first, d_from, d_tr, d_occ, i
        for j in range(s):
            for u in range(k):
                da[0, u] = (d_resp[j, y[0], u] * init[u] + resp[y[0], u] * d_init[j, u]) / scale[0]
            for t in range(1, T):
                for u in range(k):
                    pred = 0.0
                    dpred = 0.0
                    for a in range(k):
                        pred += alpha[t - 1, a] * trans[a, u]
                        dpred += alpha[t - 1, a] * d_trans[j, a, u] + da[t - 1, a] * trans[a, u]
                    da[t, u] = (d_resp[j, y[t], u] * pred + resp[y[t], u] * dpred) / scale[t]
            dlogf = 0.0
            for u in range(k):
                dlogf += da[T - 1, u]
                db[T - 1, u] = 0.0
            for t in range(T - 2, -1, -1):
                yn = y[t + 1]
                for a in range(k):
                    acc = 0.0
                    for b in range(k):
                        acc += (
                            d_trans[j, a, b] * resp[yn, b] * beta[t + 1, b]
                            + trans[a, b] * d_resp[j, yn, b] * beta[t + 1, b]
                            + trans[a, b] * resp[yn, b] * db[t + 1, b]
                        )
                    db[t, a] = acc / scale[t + 1]
            d_loglik[j] += w * dlogf
            for t in range(T):
                for u in range(k):
                    g = w * (
                        da[t, u] * beta[t, u]
                        + alpha[t, u] * db[t, u]
                        - alpha[t, u] * beta[t, u] * dlogf
                    )
                    d_emis[j, u, y[t]] += g
                    d_occ[j, u] += g
                    if t == 0:
                        d_first[j, u] += g
                    if t < T - 1:
                        d_from[j, u] += g
                if t > 0:
                    yt = y[t]
                    for a in range(k):
                        for b in range(k):
                            right = resp[yt, b] * beta[t, b]
                            d_right = d_resp[j, yt, b] * beta[t, b] + resp[yt, b] * db[t, b]
                            val = (
                                da[t - 1, a] * trans[a, b] * right
                                + alpha[t - 1, a] * d_trans[j, a, b] * right
                                + alpha[t - 1, a] * trans[a, b] * d_right
                                - alpha[t - 1, a] * trans[a, b] * right * dlogf
                            )
                            d_tr[j, a, b] += w * val / scale[t]
    return d_loglik, d_emis, d_first, d_from, d_tr, d_occ, -1


def estep_nb(obs, counts, init, trans, resp):
    *out, bad = _estep_nb(obs, counts, init, trans, resp)
    if bad >= 0:
        return None, int(bad)
    return tuple(out), -1


def dpass_nb(obs, counts, init, trans, resp, d_init, d_trans, d_resp):
    *out, bad = _dpass_nb(obs, counts, init, trans, resp, d_init, d_trans, d_resp)
    if bad >= 0:
        return None, int(bad)
    return tuple(out), -1


if HAS_NUMBA:
    forward_backward = forward_backward_nb
    estep = estep_nb
    dpass = dpass_nb
else:
    forward_backward = forward_backward_np
    estep = estep_np
    dpass = dpass_np
