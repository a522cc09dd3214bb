# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pentadiagonal kernels: banded matvec and pivoted banded LU.

Same storage conventions as the python fallback: band-of-rows ``diags[d, i]
= A[i, i + d - 2]`` for the matvec pair, and LAPACK-banded ``ab[4 + i - j,
j] = A[i, j]`` of shape (7, n) for the factor/solve pair (kl = ku = 2, two
fill-in rows).
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef double complex zdouble

BACKEND = "compiled"


def band5_matvec(cnp.ndarray[zdouble, ndim=2] diags, cnp.ndarray[zdouble, ndim=1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[zdouble, ndim=1] y = np.zeros(n, dtype=np.complex128)
    cdef Py_ssize_t i
    cdef zdouble acc
    for i in range(n):
        acc = diags[2, i] * x[i]
        if i >= 1:
            acc = acc + diags[1, i] * x[i - 1]
        if i >= 2:
            acc = acc + diags[0, i] * x[i - 2]
        if i + 1 < n:
            acc = acc + diags[3, i] * x[i + 1]
        if i + 2 < n:
            acc = acc + diags[4, i] * x[i + 2]
        y[i] = acc
    return y


def band5_matvec_adjoint(cnp.ndarray[zdouble, ndim=2] diags, cnp.ndarray[zdouble, ndim=1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[zdouble, ndim=1] y = np.zeros(n, dtype=np.complex128)
    cdef Py_ssize_t i
    cdef zdouble acc
    for i in range(n):
        acc = diags[2, i].conjugate() * x[i]
        if i >= 1:
            acc = acc + diags[3, i - 1].conjugate() * x[i - 1]
        if i >= 2:
            acc = acc + diags[4, i - 2].conjugate() * x[i - 2]
        if i + 1 < n:
            acc = acc + diags[1, i + 1].conjugate() * x[i + 1]
        if i + 2 < n:
            acc = acc + diags[0, i + 2].conjugate() * x[i + 2]
        y[i] = acc
    return y


def gbtrf5(cnp.ndarray[zdouble, ndim=2] ab):
    """In-place pivoted LU of the (7, n) LAPACK-banded array; returns ipiv.

    Mirrors LAPACK zgbtrf for kl = ku = 2.  Exactly singular columns raise
    only at solve time, matching LAPACK semantics; the first singular column
    index (1-based) is returned alongside ipiv.
    """
    cdef Py_ssize_t n = ab.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ipiv = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t j, d, c, dmax, cmax, p
    cdef double best, cand
    cdef zdouble piv, mult, tmp
    cdef Py_ssize_t info = 0

    for j in range(n):
        # partial pivot among rows j .. j + kl inside the band
        dmax = 2 if j + 2 < n else (n - 1 - j)
        p = 0
        best = abs(ab[4, j].real) + abs(ab[4, j].imag)
        for d in range(1, dmax + 1):
            cand = abs(ab[4 + d, j].real) + abs(ab[4 + d, j].imag)
            if cand > best:
                best = cand
                p = d
        ipiv[j] = j + p
        if best == 0.0:
            if info == 0:
                info = j + 1
            continue
        # swap rows j and j+p across the active columns
        cmax = j + 4 if j + 4 < n else n - 1
        if p != 0:
            for c in range(j, cmax + 1):
                tmp = ab[4 + j - c, c]
                ab[4 + j - c, c] = ab[4 + j + p - c, c]
                ab[4 + j + p - c, c] = tmp
        # eliminate below the pivot
        piv = ab[4, j]
        for d in range(1, dmax + 1):
            mult = ab[4 + d, j] / piv
            ab[4 + d, j] = mult
            for c in range(j + 1, cmax + 1):
                ab[4 + j + d - c, c] = ab[4 + j + d - c, c] - mult * ab[4 + j - c, c]
    return ipiv, info


def gbtrs5(cnp.ndarray[zdouble, ndim=2] ab, cnp.ndarray[cnp.int64_t, ndim=1] ipiv,
           cnp.ndarray[zdouble, ndim=1] b):
    """Solve with a gbtrf5 factorization; returns a new solution vector."""
    cdef Py_ssize_t n = ab.shape[1]
    cdef cnp.ndarray[zdouble, ndim=1] x = np.array(b, dtype=np.complex128, copy=True)
    cdef Py_ssize_t j, d, c, dmax, cmax, p
    cdef zdouble s

    # forward: apply row swaps and multipliers
    for j in range(n):
        p = ipiv[j]
        if p != j:
            s = x[j]
            x[j] = x[p]
            x[p] = s
        dmax = 2 if j + 2 < n else (n - 1 - j)
        for d in range(1, dmax + 1):
            x[j + d] = x[j + d] - ab[4 + d, j] * x[j]
    # back substitution through the (widened) upper band
    for j in range(n - 1, -1, -1):
        s = x[j]
        cmax = j + 4 if j + 4 < n else n - 1
        for c in range(j + 1, cmax + 1):
            s = s - ab[4 + j - c, c] * x[c]
        x[j] = s / ab[4, j]
    return x
