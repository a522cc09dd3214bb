"""Pure numpy/scipy implementations of the banded hot kernels.

Matrix convention used by both backends:

* band-of-rows layout ``diags[d, i] = A[i, i + d - 2]`` for ``d = 0..4``
  (zero where the column index leaves the matrix), used by the matvec
  kernels;
* LAPACK general-banded layout ``ab[4 + i - j, j] = A[i, j]`` of shape
  ``(7, n)`` with ``kl = ku = 2`` (two spare super-diagonal rows for pivot
  fill-in), used by the factor/solve kernels.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import get_lapack_funcs

BACKEND = "python"

_KL = 2
_KU = 2


def band5_matvec(diags, x):
    """y = A x for the five-diagonal matrix in band-of-rows layout."""
    n = x.shape[0]
    y = np.zeros(n, dtype=np.complex128)
    for o in range(-2, 3):
        lo = max(0, -o)
        hi = n - max(0, o)
        if hi > lo:
            y[lo:hi] += diags[o + 2, lo:hi] * x[lo + o:hi + o]
    return y


def band5_matvec_adjoint(diags, x):
    """y = A* x for the five-diagonal matrix in band-of-rows layout."""
    n = x.shape[0]
    y = np.zeros(n, dtype=np.complex128)
    for o in range(-2, 3):
        lo = max(0, -o)
        hi = n - max(0, o)
        if hi > lo:
            y[lo:hi] += np.conj(diags[2 - o, lo + o:hi + o]) * x[lo + o:hi + o]
    return y


class BandFactorization:
    """Pivoted LU of a pentadiagonal matrix, reusable across right-hand sides."""

    def __init__(self, ab):
        ab = np.asfortranarray(ab, dtype=np.complex128)
        gbtrf, = get_lapack_funcs(("gbtrf",), (ab,))
        lu, ipiv, info = gbtrf(ab, _KL, _KU, overwrite_ab=True)
        if info < 0:
            raise ValueError(f"gbtrf: illegal argument {-info}")
        self.singular = info > 0
        self._lu = lu
        self._ipiv = ipiv
        self._gbtrs, = get_lapack_funcs(("gbtrs",), (lu,))

    def solve(self, b):
        if self.singular:
            raise np.linalg.LinAlgError("factorization is exactly singular")
        x, info = self._gbtrs(self._lu, _KL, _KU, b, self._ipiv)
        if info != 0:
            raise np.linalg.LinAlgError(f"gbtrs failed with info={info}")
        return x


def factor_banded(ab):
    return BandFactorization(ab)
