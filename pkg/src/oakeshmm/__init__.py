"""Categorical hidden Markov models with exact observed information.

Fits by EM and computes the observed information matrix through the Oakes
identity, which needs only first derivatives of the forward-backward
recursions.
"""
from ._accel import use_numba
from .bootstrap import BootstrapResult, bootstrap_se, simulate
from .data import Dataset, read_csv, write_csv
from .em import (
    ExpectedFrequencies,
    FitOptions,
    FitResult,
    e_step,
    fit,
    loglik,
    m_step,
    q_value,
)
from .errors import (
    BootstrapUnreliableError,
    BoundaryError,
    DegenerateConfigurationError,
    EmptyStateError,
    HMMError,
    IngestError,
    InputError,
)
from .information import (
    InformationResult,
    complete_data_hessian,
    cross_term,
    observed_information,
    score_at,
)
from .params import (
    LogitParams,
    ProbParams,
    jacobian_probs_wrt_logits,
    logits_to_probs,
    n_free_params,
    probs_to_logits,
)

__version__ = "0.1.0"
