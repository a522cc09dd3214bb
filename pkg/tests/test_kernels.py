"""Both kernel backends against dense references and each other."""
import numpy as np
import pytest

import cmvscat._kernels as kernels
from cmvscat._kernels import fallback

BACKENDS = [fallback]
if kernels.BACKEND == "compiled":
    BACKENDS.append(kernels)


def _random_band(rng, n, diag_boost=0.0):
    diags = rng.standard_normal((5, n)) + 1j * rng.standard_normal((5, n))
    diags[0, :2] = 0
    diags[1, :1] = 0
    diags[3, n - 1:] = 0
    diags[4, n - 2:] = 0
    diags[2] += diag_boost
    return diags


def _to_dense(diags):
    n = diags.shape[1]
    A = np.zeros((n, n), dtype=complex)
    for d in range(5):
        o = d - 2
        lo, hi = max(0, -o), n - max(0, o)
        rows = np.arange(lo, hi)
        A[rows, rows + o] = diags[d, lo:hi]
    return A


def _to_lapack(diags):
    n = diags.shape[1]
    ab = np.zeros((7, n), dtype=complex)
    for d in range(5):
        o = d - 2
        lo, hi = max(0, -o), n - max(0, o)
        ab[4 - o, lo + o:hi + o] = diags[d, lo:hi]
    return ab


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: b.BACKEND)
@pytest.mark.parametrize("n", [9, 64, 257])
def test_matvec_against_dense(backend, n, rng):
    diags = _random_band(rng, n)
    A = _to_dense(diags)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    np.testing.assert_allclose(backend.band5_matvec(diags, x), A @ x, atol=1e-13)
    np.testing.assert_allclose(
        backend.band5_matvec_adjoint(diags, x), A.conj().T @ x, atol=1e-13
    )


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: b.BACKEND)
@pytest.mark.parametrize("n", [9, 64, 513])
def test_factor_solve_against_dense(backend, n, rng):
    # no diagonal boost: pivoting actually has to work
    diags = _random_band(rng, n)
    A = _to_dense(diags)
    fac = backend.factor_banded(_to_lapack(diags))
    for _ in range(3):
        b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x = fac.solve(b)
        np.testing.assert_allclose(A @ x, b, atol=1e-9)


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: b.BACKEND)
def test_pivoting_required_case(backend, rng):
    # zero on the first diagonal element forces an immediate row swap
    n = 32
    diags = _random_band(rng, n)
    diags[2, 0] = 0.0
    A = _to_dense(diags)
    fac = backend.factor_banded(_to_lapack(diags))
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x = fac.solve(b)
    np.testing.assert_allclose(A @ x, b, atol=1e-9)


@pytest.mark.parametrize("backend", BACKENDS, ids=lambda b: b.BACKEND)
def test_singular_matrix_flagged(backend):
    n = 16
    diags = np.zeros((5, n), dtype=complex)  # the zero matrix
    fac = backend.factor_banded(_to_lapack(diags))
    assert fac.singular
    with pytest.raises(np.linalg.LinAlgError):
        fac.solve(np.ones(n, dtype=complex))


def test_backends_agree(rng):
    if kernels.BACKEND != "compiled":
        pytest.skip("compiled backend not built")
    n = 301
    diags = _random_band(rng, n, diag_boost=0.3)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    np.testing.assert_allclose(
        kernels.band5_matvec(diags, x), fallback.band5_matvec(diags, x), atol=1e-13
    )
    b = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    xc = kernels.factor_banded(_to_lapack(diags)).solve(b)
    xp = fallback.factor_banded(_to_lapack(diags)).solve(b)
    np.testing.assert_allclose(xc, xp, atol=1e-9)


def test_env_forced_python_backend():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c",
         "import cmvscat._kernels as k; print(k.BACKEND)"],
        env={"CMVSCAT_KERNELS": "python", "PATH": "/usr/bin:/bin"},
        capture_output=True, text=True,
    )
    assert out.stdout.strip() == "python"
