# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled log-domain IPFP sweep.

Semantics identical to the numpy fallback in ``_py.py``: one row update,
one column update (both as log-sum-exp reductions), then the row-marginal
sup-norm error and the maximum of log pi.  Zero-weight support points are
carried as -inf and produce -inf scalings (zero rows/columns of pi).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, fabs, log

cnp.import_array()


def log_sweep(double[:, ::1] logk, double[::1] logp, double[::1] logq,
              double[::1] u, double[::1] v):
    cdef Py_ssize_t mx = logk.shape[0]
    cdef Py_ssize_t my = logk.shape[1]
    cdef Py_ssize_t i, j
    cdef double m, s, val, lse
    cdef double err = 0.0
    cdef double maxlp = -INFINITY

    # Row update: u_i = logp_i - LSE_j(logk_ij + v_j).
    for i in range(mx):
        if logp[i] == -INFINITY:
            u[i] = -INFINITY
            continue
        m = -INFINITY
        for j in range(my):
            val = logk[i, j] + v[j]
            if val > m:
                m = val
        if m == -INFINITY:
            u[i] = INFINITY  # infeasible: positive mass, empty row
            continue
        s = 0.0
        for j in range(my):
            val = logk[i, j] + v[j]
            if val > -INFINITY:
                s += exp(val - m)
        u[i] = logp[i] - (m + log(s))

    # Column update, row-major friendly: two sweeps (max, then sum).
    colmax_arr = np.full(my, -np.inf)
    colsum_arr = np.zeros(my)
    cdef double[::1] colmax = colmax_arr
    cdef double[::1] colsum = colsum_arr
    for i in range(mx):
        if u[i] == -INFINITY:
            continue
        for j in range(my):
            val = logk[i, j] + u[i]
            if val > colmax[j]:
                colmax[j] = val
    for i in range(mx):
        if u[i] == -INFINITY:
            continue
        for j in range(my):
            val = logk[i, j] + u[i]
            if val > -INFINITY:
                colsum[j] += exp(val - colmax[j])
    for j in range(my):
        if logq[j] == -INFINITY:
            v[j] = -INFINITY
        elif colmax[j] == -INFINITY:
            v[j] = INFINITY
        else:
            v[j] = logq[j] - (colmax[j] + log(colsum[j]))

    # Row-marginal error of the updated iterate (columns are exact).
    for i in range(mx):
        if u[i] == -INFINITY:
            continue
        m = -INFINITY
        for j in range(my):
            val = logk[i, j] + u[i] + v[j]
            if val > m:
                m = val
        if m > maxlp:
            maxlp = m
        if m == -INFINITY:
            lse = -INFINITY
        else:
            s = 0.0
            for j in range(my):
                val = logk[i, j] + u[i] + v[j]
                if val > -INFINITY:
                    s += exp(val - m)
            lse = m + log(s)
        val = fabs(exp(lse) - exp(logp[i]))
        if val > err:
            err = val

    return err, maxlp
