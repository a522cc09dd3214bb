"""Full-line CMV operators: entries, unitary truncations, and defects.

The operator is five-diagonal in the canonical basis; row ``i`` reads

* ``i`` even:  ``rho_{i-1} rho_i,  conj(a_{i-1}) rho_i,  -conj(a_i) a_{i+1},
  conj(a_i) rho_{i+1}`` at columns ``i-2 .. i+1``;
* ``i`` odd:   ``-a_{i+1} rho_i,  -conj(a_i) a_{i+1},  -a_{i+2} rho_{i+1},
  rho_{i+1} rho_{i+2}`` at columns ``i-1 .. i+2``.

Setting ``alpha_n = 1`` kills every band entry containing ``rho_n`` and the
matrix splits into two half-line blocks; truncations therefore decouple at
both window edges (``alpha_a = alpha_{b+1} = 1``) so that every finite
block is an exact direct summand of a unitary, and itself unitary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import WindowError

MIN_WINDOW_SPAN = 8


@dataclass(frozen=True)
class Window:
    """Closed index range [a, b] of lattice sites; site labels are absolute."""

    a: int
    b: int

    def __post_init__(self):
        if self.b - self.a < MIN_WINDOW_SPAN:
            raise WindowError(
                f"window [{self.a}, {self.b}] too short; need b - a >= {MIN_WINDOW_SPAN}"
            )

    @property
    def size(self):
        return self.b - self.a + 1

    @property
    def parity(self):
        """(a mod 2, b mod 2); the formula branches downstream key off site parity."""
        return (self.a % 2, self.b % 2)

    def contains(self, k):
        return self.a <= k <= self.b

    def index(self, k):
        if not self.contains(k):
            raise IndexError(f"site {k} outside window [{self.a}, {self.b}]")
        return k - self.a

    def doubled(self, direction="both"):
        """Window grown to twice the span, about the center or one-sided."""
        span = self.b - self.a
        if direction == "both":
            half = (span + 1) // 2
            return Window(self.a - half, self.b + half)
        if direction == "right":
            return Window(self.a, self.b + span)
        if direction == "left":
            return Window(self.a - span, self.b)
        raise ValueError(f"unknown grow direction {direction!r}")


def entry(seq, i, j):
    """Matrix element <delta_i, C delta_j>; zero for |i - j| > 2."""
    if abs(i - j) > 2:
        return 0.0 + 0.0j
    al = seq.alpha
    rho = seq.rho
    if i % 2 == 0:
        if j == i - 2:
            return complex(rho(i - 1) * rho(i))
        if j == i - 1:
            return np.conj(al(i - 1)) * rho(i)
        if j == i:
            return -np.conj(al(i)) * al(i + 1)
        if j == i + 1:
            return np.conj(al(i)) * rho(i + 1)
        return 0.0 + 0.0j
    if j == i - 1:
        return -al(i + 1) * rho(i)
    if j == i:
        return -np.conj(al(i)) * al(i + 1)
    if j == i + 1:
        return -al(i + 2) * rho(i + 1)
    if j == i + 2:
        return complex(rho(i + 1) * rho(i + 2))
    return 0.0 + 0.0j


class BandedUnitary:
    """Finite unitary truncation of a (possibly decoupled) CMV operator.

    Immutable after assembly.  ``diags[d, r]`` stores the element at row
    ``a + r``, column ``a + r + d - 2``.
    """

    def __init__(self, window, diags, decoupling_sites):
        self.window = window
        self.diags = diags
        self.diags.setflags(write=False)
        self.decoupling_sites = tuple(decoupling_sites)

    @property
    def size(self):
        return self.window.size

    def entry(self, i, j):
        d = j - i + 2
        if 0 <= d <= 4 and self.window.contains(i) and self.window.contains(j):
            return complex(self.diags[d, i - self.window.a])
        return 0.0 + 0.0j

    def matvec(self, x):
        return _kernels.band5_matvec(self.diags, np.asarray(x, dtype=np.complex128))

    def matvec_adjoint(self, x):
        return _kernels.band5_matvec_adjoint(self.diags, np.asarray(x, dtype=np.complex128))

    def to_dense(self):
        n = self.size
        M = np.zeros((n, n), dtype=np.complex128)
        for d in range(5):
            o = d - 2
            lo = max(0, -o)
            hi = n - max(0, o)
            if hi > lo:
                rows = np.arange(lo, hi)
                M[rows, rows + o] = self.diags[d, lo:hi]
        return M

    def lapack_band(self, z=0.0):
        """(C - z) in LAPACK-banded layout (7, n) with kl = ku = 2.

        Layout: ``ab[4 + i - j, j] = A[i, j]``; rows 0..1 are fill-in space
        for the pivoted factorization.
        """
        n = self.size
        ab = np.zeros((7, n), dtype=np.complex128)
        for d in range(5):
            o = d - 2
            lo = max(0, -o)
            hi = n - max(0, o)
            if hi > lo:
                # row index i = lo..hi-1, column j = i + o
                ab[4 - o, lo + o:hi + o] = self.diags[d, lo:hi]
        if z != 0.0:
            ab[4, :] -= z
        return ab

    def unitarity_defect(self):
        """max |(U* U - I)_{ij}| by dense multiplication (test scale only)."""
        M = self.to_dense()
        return float(np.max(np.abs(M.conj().T @ M - np.eye(self.size))))


def truncate(seq, window):
    """Edge-decoupled block [a, b]: exactly unitary by construction.

    Half-line operators are the special case where one window edge is the
    decoupling site of interest; the far edge is an artificial cut whose
    effect must be controlled by the caller (window-doubling checks).
    """
    if not isinstance(window, Window):
        window = Window(*window)
    cut = seq.decouple(window.a).decouple(window.b + 1)
    a, b = window.a, window.b
    n = window.size
    # alpha_k, rho_k for k = a-1 .. b+2 (offset o maps k -> k - (a - 1))
    al = cut.alpha_array(a - 1, b + 3)
    rho = cut.rho_array(a - 1, b + 3)

    def A(shift):
        # alpha_{i+shift} over rows i = a..b
        return al[1 + shift:1 + shift + n]

    def R(shift):
        return rho[1 + shift:1 + shift + n]

    i = np.arange(a, b + 1)
    even = (i % 2 == 0)
    diags = np.zeros((5, n), dtype=np.complex128)
    diags[0] = np.where(even, R(-1) * R(0), 0.0)
    diags[1] = np.where(even, np.conj(A(-1)) * R(0), -A(1) * R(0))
    diags[2] = -np.conj(A(0)) * A(1)
    diags[3] = np.where(even, np.conj(A(0)) * R(1), -A(2) * R(1))
    diags[4] = np.where(even, 0.0, R(1) * R(2))
    # zero band slots whose column leaves the window (all are exact zeros
    # already thanks to the edge decoupling; enforced for safety)
    diags[0, :2] = 0.0
    diags[1, :1] = 0.0
    diags[3, n - 1:] = 0.0
    diags[4, n - 2:] = 0.0
    sites = tuple(sorted(set(seq.decoupling_sites()) | {a, b + 1}))
    return BandedUnitary(window, diags, sites)


class DefectOperator:
    """The finite-rank difference C - C_n as a sparse column map."""

    def __init__(self, n, columns):
        self.n = n
        self.columns = columns  # {column site j: {row site i: value}}

    @property
    def domain_sites(self):
        """Sites j with a nonzero column."""
        return tuple(sorted(self.columns))

    @property
    def range_sites(self):
        """Sites i appearing in some column."""
        rows = set()
        for col in self.columns.values():
            rows.update(col)
        return tuple(sorted(rows))

    def column(self, j):
        """(C - C_n) delta_j as {site: value}."""
        return dict(self.columns.get(j, {}))

    def adjoint_column(self, j):
        """(C - C_n)* delta_j as {site: value} (conjugated j-th row)."""
        out = {}
        for col_site, col in self.columns.items():
            if j in col:
                out[col_site] = np.conj(col[j])
        return out

    def apply(self, x, window):
        """(C - C_n) x for x indexed over window."""
        y = np.zeros(window.size, dtype=np.complex128)
        for j, col in self.columns.items():
            if window.contains(j):
                xj = x[window.index(j)]
                if xj != 0:
                    for i, v in col.items():
                        y[window.index(i)] += v * xj
        return y

    def as_dense(self, window):
        M = np.zeros((window.size, window.size), dtype=np.complex128)
        for j, col in self.columns.items():
            for i, v in col.items():
                M[window.index(i), window.index(j)] = v
        return M


def defect(seq, n):
    """C - C_n by entrywise subtraction of the two coefficient rules.

    Entries not involving alpha_n cancel exactly in floating point, so the
    sparse support comes out exact: for n even the columns n-2..n+1 hit rows
    {n-1, n}; for n odd the columns {n-1, n} hit rows n-2..n+1.
    """
    n = int(n)
    cut = seq.decouple(n)
    columns = {}
    for j in range(n - 3, n + 4):
        col = {}
        for i in range(j - 2, j + 3):
            v = entry(seq, i, j) - entry(cut, i, j)
            if v != 0.0:
                col[i] = v
        if col:
            columns[j] = col
    return DefectOperator(n, columns)
