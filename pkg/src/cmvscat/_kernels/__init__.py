"""Hot banded kernels with backend selection at import time.

The compiled Cython extension is preferred when present; a numpy/scipy
fallback provides identical semantics otherwise.  Set ``CMVSCAT_KERNELS``
to ``python`` or ``compiled`` to force a backend (forcing ``compiled`` when
the extension is missing raises at import).
"""
from __future__ import annotations

import os

import numpy as np

from . import fallback as _fallback

_choice = os.environ.get("CMVSCAT_KERNELS", "").strip().lower()

_ext = None
if _choice != "python":
    try:
        from . import _band_ext as _ext
    except ImportError:
        _ext = None
        if _choice == "compiled":
            raise ImportError(
                "CMVSCAT_KERNELS=compiled but the cmvscat._kernels._band_ext "
                "extension is not built; run `python setup.py build_ext --inplace`"
            )

BACKEND = "compiled" if _ext is not None else "python"

if _ext is not None:
    band5_matvec = _ext.band5_matvec
    band5_matvec_adjoint = _ext.band5_matvec_adjoint

    class BandFactorization:
        """Pivoted LU of a pentadiagonal matrix (compiled backend)."""

        def __init__(self, ab):
            self._ab = np.ascontiguousarray(ab, dtype=np.complex128)
            self._ipiv, info = _ext.gbtrf5(self._ab)
            self.singular = info > 0

        def solve(self, b):
            if self.singular:
                raise np.linalg.LinAlgError("factorization is exactly singular")
            return _ext.gbtrs5(self._ab, self._ipiv, np.asarray(b, dtype=np.complex128))

    def factor_banded(ab):
        return BandFactorization(ab)

else:
    band5_matvec = _fallback.band5_matvec
    band5_matvec_adjoint = _fallback.band5_matvec_adjoint
    BandFactorization = _fallback.BandFactorization
    factor_banded = _fallback.factor_banded


def backend_name():
    return BACKEND
