"""Maximum-likelihood estimation by the EM algorithm with multiple starts."""
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import (
    DegenerateConfigurationError,
    EmptyStateError,
    HMMError,
    IdentifiabilityWarning,
    InputError,
)
from .params import LogitParams, ProbParams, logits_to_probs, probs_to_logits

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ExpectedFrequencies:
    """Posterior expected counts from one E-step, aggregated over occasions.

    Attributes:
        emission: (k, c) expected number of (state u, response y) pairs.
        initial: (k,) expected occupancy of each state at the first occasion.
        from_state: (k,) expected occupancy over occasions 0..T-2, i.e. the
            number of transitions leaving each state.
        transition: (k, k) expected transition counts, rows = origin.
        occupancy: (k,) expected occupancy summed over all occasions.
        n: number of units.
        T: sequence length.
        loglik: log-likelihood at the parameters used for the E-step.
    """

    emission: np.ndarray
    initial: np.ndarray
    from_state: np.ndarray
    transition: np.ndarray
    occupancy: np.ndarray
    n: float
    T: int
    loglik: float = float("nan")

    @classmethod
    def zeros(cls, k, c, T=1):
        return cls(np.zeros((k, c)), np.zeros(k), np.zeros(k), np.zeros((k, k)), np.zeros(k), 0.0, T)


def _arrays(p):
    return p.initial, p.transition, p.response


def _weights(d):
    return d.counts.astype(float)


def _raise_degenerate(d, idx):
    raise DegenerateConfigurationError(
        f"configuration {d.configs[idx].tolist()} has zero probability under the parameters"
    )


def e_step(p, d):
    """Expected frequencies of states, state-response pairs and transitions."""
    if p.c != d.c:
        raise InputError(f"model has {p.c} categories but data has {d.c}")
    out, bad = _kernels.estep(d.configs, _weights(d), *_arrays(p))
    if out is None:
        _raise_degenerate(d, bad)
    ll, emis, first, frm, tr, occ = out
    return ExpectedFrequencies(emis, first, frm, tr, occ, float(d.n), d.T, float(ll))


def loglik(p, d):
    """Sum over configurations of count times log manifest probability."""
    return e_step(p, d).loglik


def m_step(ef, fallback_transition=None):
    """Closed-form maximizer of the expected complete-data log-likelihood.

    With ``T == 1`` there are no transitions to count; the transition matrix
    is then taken from ``fallback_transition`` (uniform if not given).

    Raises:
        EmptyStateError: if a state has no expected mass to normalize.
    """
    k = ef.initial.size
    if np.any(ef.occupancy <= 0):
        raise EmptyStateError("response distribution", int(np.argmax(ef.occupancy <= 0)) + 1)
    if not ef.initial.sum() > 0:
        raise EmptyStateError("initial distribution", 1)
    phi = (ef.emission / ef.emission.sum(axis=1, keepdims=True)).T
    lam = ef.initial / ef.initial.sum()
    if ef.T == 1:
        pi = np.full((k, k), 1.0 / k) if fallback_transition is None else fallback_transition
    else:
        rows = ef.transition.sum(axis=1)
        if np.any(rows <= 0):
            raise EmptyStateError("transition row", int(np.argmax(rows <= 0)) + 1)
        pi = ef.transition / rows[:, None]
    return ProbParams(lam, pi, phi)


def _xlogy(w, p):
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w == 0, 0.0, w * np.log(p))
    return float(terms.sum())


def q_value(t, ef):
    """Expected complete-data log-likelihood at ``t`` given the frequencies ``ef``.

    Returns ``-inf`` when a zero probability carries positive weight.
    """
    p = logits_to_probs(t) if isinstance(t, LogitParams) else t
    return (
        _xlogy(ef.emission, p.response.T)
        + _xlogy(ef.initial, p.initial)
        + _xlogy(ef.transition, p.transition)
    )


@dataclass
class FitOptions:
    max_iter: int = 5000
    tol: float = 1e-10
    n_starts: int = 10
    seed: int = 1
    init: ProbParams = None

    def __post_init__(self):
        if self.max_iter < 1 or self.n_starts < 1 or not self.tol > 0:
            raise InputError("max_iter, n_starts and tol must be positive")


@dataclass(frozen=True, eq=False)
class FitResult:
    """Outcome of :func:`fit`; ``trace`` belongs to the best start."""

    params: ProbParams
    loglik: float
    trace: np.ndarray
    n_iter: int
    converged: bool
    best_start: int
    seed: int
    start_logliks: np.ndarray = field(default=None)
    start_traces: tuple = field(default=())

    @property
    def logits(self):
        """Logit-scale estimate; raises BoundaryError at a boundary estimate."""
        return probs_to_logits(self.params)


def start_rng(seed, index):
    """Independent generator for stream ``index`` of master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def deterministic_start(d, k):
    """Uniform initial distribution, sticky transitions, tilted empirical margins."""
    c = d.c
    margin = np.bincount(d.sequences().ravel(), minlength=c).astype(float) + 0.5
    margin /= margin.sum()
    z = np.linspace(-1.0, 1.0, c)
    tilt = np.linspace(-1.0, 1.0, k) if k > 1 else np.zeros(1)
    phi = margin[:, None] * np.exp(np.outer(z, tilt))
    phi /= phi.sum(axis=0, keepdims=True)
    if k > 1:
        pi = np.full((k, k), 0.2 / (k - 1))
        np.fill_diagonal(pi, 0.8)
    else:
        pi = np.ones((1, 1))
    return ProbParams(np.full(k, 1.0 / k), pi, phi)


def random_start(rng, k, c):
    lam = rng.dirichlet(np.ones(k))
    pi = rng.dirichlet(np.ones(k), size=k)
    phi = rng.dirichlet(np.ones(c), size=k).T
    return ProbParams(lam, pi, phi)


def run_em(d, start, max_iter=5000, tol=1e-10):
    """EM from a single starting point.

    Returns ``(params, trace, converged)``; ``trace[i]`` is the
    log-likelihood of the parameters before update ``i`` and the last entry
    belongs to the returned parameters.
    """
    p = start
    ef = e_step(p, d)
    trace = [ef.loglik]
    converged = False
    for _ in range(max_iter):
        p = m_step(ef, fallback_transition=p.transition)
        ef = e_step(p, d)
        trace.append(ef.loglik)
        if abs(trace[-1] - trace[-2]) / (abs(trace[-1]) + 1.0) < tol:
            converged = True
            break
    return p, np.array(trace), converged


def fit(d, k, opts=None, keep_traces=False):
    """Fit a ``k``-state model by EM from several starts and keep the best.

    Start 0 is :func:`deterministic_start` (or ``opts.init`` when given, in
    which case it is the only start); starts 1.. draw every distribution from
    a flat Dirichlet using the stream ``(seed, start index)``.  The winner is
    the highest final log-likelihood; starts within the convergence tolerance
    of each other count as tied and the lowest index wins.
    """
    opts = opts or FitOptions()
    if k < 1:
        raise InputError("k must be >= 1")
    if d.T == 1 and k > 1:
        warnings.warn(
            "with one occasion per unit the transition matrix is not identifiable",
            IdentifiabilityWarning,
            stacklevel=2,
        )
    if opts.init is not None:
        if opts.init.k != k or opts.init.c != d.c:
            raise InputError("initial parameters do not match k and the number of categories")
        starts = [opts.init]
    else:
        starts = [deterministic_start(d, k)]
        starts += [random_start(start_rng(opts.seed, i), k, d.c) for i in range(1, opts.n_starts)]

    best = None
    lls, traces = [], []
    for i, start in enumerate(starts):
        try:
            p, trace, conv = run_em(d, start, opts.max_iter, opts.tol)
        except (EmptyStateError, DegenerateConfigurationError) as exc:
            log.debug("start %d abandoned: %s", i, exc)
            lls.append(-np.inf)
            traces.append(np.array([]))
            continue
        lls.append(trace[-1])
        traces.append(trace)
        log.debug("start %d: loglik %.10g after %d iterations", i, trace[-1], trace.size - 1)
        if best is None or trace[-1] - best[1][-1] > opts.tol * (abs(best[1][-1]) + 1.0):
            best = (p, trace, conv, i)
    if best is None:
        raise HMMError("every EM start ended in an empty state or a degenerate configuration")
    p, trace, conv, idx = best
    return FitResult(
        params=p,
        loglik=float(trace[-1]),
        trace=trace,
        n_iter=trace.size - 1,
        converged=conv,
        best_start=idx,
        seed=opts.seed,
        start_logliks=np.array(lls),
        start_traces=tuple(traces) if keep_traces else (),
    )
