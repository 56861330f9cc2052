# cython: language_level=3
"""Compiled cyclic Jacobi kernels for real symmetric and complex Hermitian matrices.

Pairs are visited in the round-robin order produced by
``_jacobi_py.round_robin_pairs``. Only rows are swept; the matching columns
are written as conjugates, which keeps the iterate exactly Hermitian.
Eigenvectors are accumulated as rows of ``W`` (``W = V^T``).
"""
from libc.math cimport sqrt, fabs

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef fused scalar_t:
    double
    double complex


cdef inline double _abs2(scalar_t x) noexcept nogil:
    if scalar_t is double:
        return x * x
    else:
        return x.real * x.real + x.imag * x.imag


cdef inline scalar_t _conj(scalar_t x) noexcept nogil:
    if scalar_t is double:
        return x
    else:
        return x.conjugate()


cdef inline double _re(scalar_t x) noexcept nogil:
    if scalar_t is double:
        return x
    else:
        return x.real


cdef double _off2(scalar_t[:, ::1] A) noexcept nogil:
    cdef Py_ssize_t i, j, n = A.shape[0]
    cdef double acc = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                acc += _abs2(A[i, j])
    return acc


cdef int _sweeps(scalar_t[:, ::1] A, scalar_t[:, ::1] W, const cnp.intp_t[:, :, ::1] pairs,
                 double tol, int max_sweeps) noexcept nogil:
    cdef Py_ssize_t n = A.shape[0], nr = pairs.shape[0], npair = pairs.shape[1]
    cdef Py_ssize_t i, j, r, k, p, q
    cdef double fro2 = 0.0, thresh, g, a, b, theta, t, c, s
    cdef scalar_t apq, e, ec, se, ce, sec, cec, xp, xq
    cdef int sweep
    for i in range(n):
        for j in range(n):
            fro2 += _abs2(A[i, j])
    if fro2 == 0.0 or n < 2:
        return 0
    thresh = tol * tol * fro2
    for sweep in range(max_sweeps):
        if _off2(A) < thresh:
            return sweep
        for r in range(nr):
            for k in range(npair):
                p = pairs[r, k, 0]
                if p < 0:
                    continue
                q = pairs[r, k, 1]
                apq = A[p, q]
                g = sqrt(_abs2(apq))
                if g == 0.0:
                    continue
                a = _re(A[p, p])
                b = _re(A[q, q])
                e = apq / g
                ec = _conj(e)
                theta = (b - a) / (2.0 * g)
                if theta >= 0.0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                se = s * e
                ce = c * e
                sec = s * ec
                cec = c * ec
                for j in range(n):
                    if j == p or j == q:
                        continue
                    xp = A[p, j]
                    xq = A[q, j]
                    A[p, j] = c * xp - se * xq
                    A[q, j] = s * xp + ce * xq
                    A[j, p] = _conj(A[p, j])
                    A[j, q] = _conj(A[q, j])
                A[p, p] = a - t * g
                A[q, q] = b + t * g
                A[p, q] = 0.0
                A[q, p] = 0.0
                for j in range(n):
                    xp = W[p, j]
                    xq = W[q, j]
                    W[p, j] = c * xp - sec * xq
                    W[q, j] = s * xp + cec * xq
    if _off2(A) < thresh:
        return max_sweeps
    return -1


def jacobi_sweeps_rows(A, pairs, double tol, int max_sweeps):
    """Diagonalize a C-contiguous float64/complex128 matrix in place.

    Returns ``(W, sweeps)`` with eigenvectors as rows of ``W``;
    ``sweeps == -1`` signals non-convergence.
    """
    cdef int res
    cdef double[:, ::1] Ad, Wd
    cdef double complex[:, ::1] Ac, Wc
    cdef const cnp.intp_t[:, :, ::1] pv = np.ascontiguousarray(pairs, dtype=np.intp)
    n = A.shape[0]
    if A.dtype == np.complex128:
        W = np.eye(n, dtype=np.complex128)
        Ac = A
        Wc = W
        with nogil:
            res = _sweeps(Ac, Wc, pv, tol, max_sweeps)
    elif A.dtype == np.float64:
        W = np.eye(n, dtype=np.float64)
        Ad = A
        Wd = W
        with nogil:
            res = _sweeps(Ad, Wd, pv, tol, max_sweeps)
    else:
        raise TypeError(f"unsupported dtype {A.dtype}")
    return W, res
