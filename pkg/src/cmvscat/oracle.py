"""Brute-force reference implementations for tests and acceptance runs.

Nothing here sits on a production path: the dense resolvent checks the
banded solves entry by entry, and the time-domain scattering estimate
cross-checks the stationary formulas at low accuracy through the Abel-summed
expansion of s - 1 with the wave operator replaced by a finite-time
approximant.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, NearSpectrumError
from .operator import Window, defect, truncate

ORACLE_MAX_DIM = 512


def dense_green(seq, window, z):
    """Full (U - z)^{-1} by dense factorization; oracle scale only (n <= 512)."""
    if not isinstance(window, Window):
        window = Window(*window)
    if window.size > ORACLE_MAX_DIM:
        raise ConstructionError(
            f"dense oracle limited to {ORACLE_MAX_DIM} sites, got {window.size}"
        )
    U = truncate(seq, window).to_dense()
    A = U - z * np.eye(window.size)
    try:
        return np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise NearSpectrumError(f"dense resolvent singular at z={z}") from exc


def _sublattice_packet(window, center, width, parity):
    k = np.arange(window.a, window.b + 1)
    psi = np.exp(-((k - center) ** 2) / (4.0 * width ** 2)).astype(np.complex128)
    psi[k % 2 != parity] = 0.0
    return psi / np.linalg.norm(psi)


@dataclass(frozen=True)
class TimeDomainScattering:
    """Low-accuracy estimates of <f_a, (s - 1) f_b> between channel packets."""

    entries: dict                # {("l","l"): complex, ...}
    overlaps: dict               # {("l","l"): <f_a, f_b>, ...}
    m_max: int
    t: float


def finite_time_scattering(seq, n, window, m_max, t, *, packets=None):
    """Abel-summed time-domain estimate of the (s - 1) quadratic form.

    Truncates sum_k t^{|k|} <C^k (C - C_n) C_n^{-k-1} f, w g> at |k| <=
    m_max, with w replaced by the finite-time approximant C^{m_max}
    C_n^{-m_max} on the truncation.  Accuracy is ~1e-2 at best; use only as
    a structural sanity check of the stationary formulas.

    ``packets`` optionally supplies {"l": vec, "r": vec}; the defaults are
    an even-sublattice (right-moving) Gaussian in the left half and an
    odd-sublattice (left-moving) Gaussian in the right half, i.e. the two
    incoming channels of the decoupled dynamics.
    """
    if not isinstance(window, Window):
        window = Window(*window)
    if not (0.0 <= t < 1.0):
        raise ConstructionError(f"Abel parameter t must be in [0, 1), got {t}")
    U = truncate(seq, window)
    Un = truncate(seq.decouple(n), window)
    D = defect(seq, n)

    # Trajectories move 2 sites per step; everything must stay clear of the
    # window edges for the whole summed horizon or bounce terms pollute the
    # estimate.
    span = window.b - window.a
    width = 6.0
    off = 24
    if off + 2 * m_max + 16 > span // 2:
        raise ConstructionError(
            f"m_max {m_max} walks too far for window span {span}; shrink m_max "
            "or enlarge the window"
        )
    if packets is None:
        packets = {
            "l": _sublattice_packet(window, n - off, width, parity=0),
            "r": _sublattice_packet(window, n + off, width, parity=1),
        }

    def defect_apply(x):
        return D.apply(x, window)

    sides = ("l", "r")
    overlaps = {(a, b): complex(np.vdot(packets[a], packets[b]))
                for a in sides for b in sides}

    # w g ~= U^m Un^{-m} g
    w = {}
    for b in sides:
        g = packets[b]
        for _ in range(m_max):
            g = Un.matvec_adjoint(g)
        for _ in range(m_max):
            g = U.matvec(g)
        w[b] = g

    entries = {(a, b): 0.0 + 0.0j for a in sides for b in sides}
    for a in sides:
        # k >= 0 chain: f_k = C_n^{-k-1} f, paired against C^{-k} w
        f_k = Un.matvec_adjoint(packets[a])
        w_k = {b: w[b].copy() for b in sides}
        for k in range(0, m_max + 1):
            weight = t ** k if k > 0 else 1.0
            if weight != 0.0:
                df = defect_apply(f_k)
                for b in sides:
                    entries[(a, b)] += weight * complex(np.vdot(df, w_k[b]))
            if k == m_max:
                break
            f_k = Un.matvec_adjoint(f_k)
            for b in sides:
                w_k[b] = U.matvec_adjoint(w_k[b])
        # k < 0 chain: C_n^{|k|-1} f, paired against C^{|k|} w
        f_k = packets[a]
        w_k = {b: w[b].copy() for b in sides}
        for k in range(1, m_max + 1):
            for b in sides:
                w_k[b] = U.matvec(w_k[b])
            weight = t ** k
            if weight == 0.0:
                break
            df = defect_apply(f_k)
            for b in sides:
                entries[(a, b)] += weight * complex(np.vdot(df, w_k[b]))
            f_k = Un.matvec(f_k)

    entries = {key: -val for key, val in entries.items()}
    return TimeDomainScattering(entries=entries, overlaps=overlaps, m_max=m_max, t=t)
