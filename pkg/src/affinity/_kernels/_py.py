"""Pure-numpy fallback for the log-domain IPFP sweep kernel."""

import numpy as np
from scipy.special import logsumexp


def log_sweep(logk, logp, logq, u, v):
    """One full IPFP sweep in log domain, updating u and v in place.

    ``u`` and ``v`` are the log scaling vectors: log pi = logk + u[:,None]
    + v[None,:].  Support points with zero marginal weight carry
    ``logp = -inf`` and end up with ``u = -inf`` (zero row of pi).

    Returns (err, max_logpi) where err is the sup-norm violation of the
    row-marginal constraint after the column update (columns are exact by
    construction) and max_logpi bounds the dynamic range of exp(log pi).
    """
    with np.errstate(invalid="ignore"):
        lse_rows = logsumexp(logk + v[None, :], axis=1)
        u[:] = np.where(np.isneginf(logp), -np.inf, logp - lse_rows)
        lse_cols = logsumexp(logk + u[:, None], axis=0)
        v[:] = np.where(np.isneginf(logq), -np.inf, logq - lse_cols)
        logpi = logk + u[:, None] + v[None, :]
        row_mass = np.exp(logsumexp(logpi, axis=1))
    err = float(np.max(np.abs(row_mass - np.exp(logp))))
    return err, float(np.max(logpi))
