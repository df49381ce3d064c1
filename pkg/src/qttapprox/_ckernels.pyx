# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled contraction of tensor trains at many points."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()


def tt_contract(list cores, const cnp.int64_t[:, ::1] digits, const double[:, :, ::1] phis):
    """Contract the train at every point.

    Parameters
    ----------
    cores : list of C-contiguous float64 arrays of shape (r, n, s)
        The first ``digits.shape[1]`` cores are indexed by digits, the
        remaining ones are contracted against ``phis``.
    digits : int64 array, shape (N, K_digit)
    phis : float64 array, shape (N, K_poly, m + 1)
    """
    cdef Py_ssize_t N = digits.shape[0]
    cdef Py_ssize_t nd = digits.shape[1]
    cdef Py_ssize_t npoly = phis.shape[1]
    cdef Py_ssize_t K = len(cores)
    if K != nd + npoly:
        raise ValueError("number of cores does not match digits and polynomial factors")
    if phis.shape[0] != N:
        raise ValueError("digits and phis disagree on the number of points")

    arrs = [np.ascontiguousarray(c, dtype=np.float64) for c in cores]
    cdef double** ptr = <double**> malloc(K * sizeof(double*))
    cdef Py_ssize_t* rr = <Py_ssize_t*> malloc(K * sizeof(Py_ssize_t))
    cdef Py_ssize_t* nn = <Py_ssize_t*> malloc(K * sizeof(Py_ssize_t))
    cdef Py_ssize_t* ss = <Py_ssize_t*> malloc(K * sizeof(Py_ssize_t))
    cdef Py_ssize_t k, rmax = 1
    cdef cnp.ndarray a
    for k in range(K):
        a = arrs[k]
        ptr[k] = <double*> cnp.PyArray_DATA(a)
        rr[k] = cnp.PyArray_DIM(a, 0)
        nn[k] = cnp.PyArray_DIM(a, 1)
        ss[k] = cnp.PyArray_DIM(a, 2)
        if rr[k] > rmax:
            rmax = rr[k]
        if ss[k] > rmax:
            rmax = ss[k]

    out = np.empty(N, dtype=np.float64)
    cdef double[::1] res = out
    cdef double* v = <double*> malloc(rmax * sizeof(double))
    cdef double* w = <double*> malloc(rmax * sizeof(double))
    cdef double* tmp
    cdef double* core
    cdef double acc, t
    cdef Py_ssize_t p, i, r, s, n, cur, mm
    try:
        for p in range(N):
            v[0] = 1.0
            cur = 1
            for k in range(nd):
                i = digits[p, k]
                core = ptr[k]
                for s in range(ss[k]):
                    acc = 0.0
                    for r in range(cur):
                        acc = acc + v[r] * core[(r * nn[k] + i) * ss[k] + s]
                    w[s] = acc
                cur = ss[k]
                tmp = v; v = w; w = tmp
            for k in range(npoly):
                core = ptr[nd + k]
                mm = nn[nd + k]
                for s in range(ss[nd + k]):
                    acc = 0.0
                    for r in range(cur):
                        t = 0.0
                        for n in range(mm):
                            t = t + phis[p, k, n] * core[(r * mm + n) * ss[nd + k] + s]
                        acc = acc + v[r] * t
                    w[s] = acc
                cur = ss[nd + k]
                tmp = v; v = w; w = tmp
            res[p] = v[0]
    finally:
        free(v); free(w); free(ptr); free(rr); free(nn); free(ss)
    return out
