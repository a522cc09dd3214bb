"""Transfer matrices, Moebius-transformed m-functions, two-sided solutions.

The transfer matrix propagates pairs (u_k, v_k) of solutions of the
five-diagonal eigenvalue equation site by site,

    T(z, k) = (1/rho_k) [[conj(a_k), 1], [1, a_k]]        k even,
    T(z, k) = (1/rho_k) [[a_k, z], [1/z, conj(a_k)]]      k odd,

with det T = -1 on both branches.  Seeding at a site n with the
half-line-matched value M (or its hat variant) produces the unique pair
that is square-summable on the corresponding half-line; the two-sided
Green's function is then a ratio of products of such solutions evaluated
around a freely chosen anchor site k0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MoebiusPoleError, PropagationOverflowError, WronskianDegenerateError
from .operator import Window
from .resolvent import DEFAULT_HALF_BASE, DEFAULT_WD_TOL, m_function

MOEBIUS_POLE_TOL = 1e-12
WRONSKIAN_TOL = 1e-12
OVERFLOW_LIMIT = 1e150


def transfer(seq, z, k):
    """Transfer matrix T(z, k); z = 0 is rejected on the odd branch."""
    a = seq.alpha(k)
    rho = seq.rho(k)
    if k % 2 == 0:
        mat = np.array([[np.conj(a), 1.0], [1.0, a]], dtype=np.complex128)
    else:
        if z == 0:
            raise ValueError("transfer matrix has a 1/z entry for odd k; z = 0 rejected")
        mat = np.array([[a, z], [1.0 / z, np.conj(a)]], dtype=np.complex128)
    return mat / rho


def transfer_inverse(seq, z, k):
    # det T = -1, so inv([[p, q], [r, s]]) = [[-s, q], [r, -p]]
    t = transfer(seq, z, k)
    return np.array([[-t[1, 1], t[0, 1]], [t[1, 0], -t[0, 0]]], dtype=np.complex128)


def M_cap(seq, side, n, z, *, m_value=None, base_len=DEFAULT_HALF_BASE,
          wd_tol=DEFAULT_WD_TOL):
    """Weyl solution coefficient M_n: the plain variant.

    Side "r" is the right m-function at n itself; side "l" is a Moebius
    transform of the left m-function one site down:

        M_n^(l) = [Re(1 + a_n) + i Im(1 - a_n) m^(l)_{n-1}]
                  / [i Im(1 + a_n) + Re(1 - a_n) m^(l)_{n-1}].

    ``m_value`` short-circuits the half-line solve when the caller already
    holds m^(r)_n (side r) or m^(l)_{n-1} (side l) at this z.
    """
    if side == "r":
        if m_value is None:
            m_value = m_function(seq, "r", n, z, base_len=base_len, wd_tol=wd_tol)
        return complex(m_value)
    if side != "l":
        raise ValueError(f"side must be 'l' or 'r', got {side!r}")
    if m_value is None:
        m_value = m_function(seq, "l", n - 1, z, base_len=base_len, wd_tol=wd_tol)
    a = seq.alpha(n)
    num = (1 + a).real + 1j * (1 - a).imag * m_value
    den = 1j * (1 + a).imag + (1 - a).real * m_value
    if abs(den) < MOEBIUS_POLE_TOL:
        raise MoebiusPoleError(f"M^(l) denominator {abs(den):.3e} at z={z}, n={n}")
    return complex(num / den)


def Mhat_cap(seq, side, n, z, *, m_value=None, base_len=DEFAULT_HALF_BASE,
             wd_tol=DEFAULT_WD_TOL):
    """The hat variant: side "l" is m^(l)_n itself; side "r" is the Moebius
    transform of the right m-function one site up:

        Mhat_n^(r) = [Re(1 + a_{n+1}) - i Im(1 + a_{n+1}) m^(r)_{n+1}]
                     / [-i Im(1 - a_{n+1}) + Re(1 - a_{n+1}) m^(r)_{n+1}].
    """
    if side == "l":
        if m_value is None:
            m_value = m_function(seq, "l", n, z, base_len=base_len, wd_tol=wd_tol)
        return complex(m_value)
    if side != "r":
        raise ValueError(f"side must be 'l' or 'r', got {side!r}")
    if m_value is None:
        m_value = m_function(seq, "r", n + 1, z, base_len=base_len, wd_tol=wd_tol)
    a = seq.alpha(n + 1)
    num = (1 + a).real - 1j * (1 + a).imag * m_value
    den = -1j * (1 - a).imag + (1 - a).real * m_value
    if abs(den) < MOEBIUS_POLE_TOL:
        raise MoebiusPoleError(f"Mhat^(r) denominator {abs(den):.3e} at z={z}, n={n}")
    return complex(num / den)


def _seed(z, M, n, variant):
    if variant == "plain":
        if n % 2 == 0:
            return np.array([-1.0 + M, 1.0 + M], dtype=np.complex128)
        return np.array([z + z * M, -1.0 + M], dtype=np.complex128)
    if variant == "hat":
        if n % 2 == 0:
            return np.array([z - z * M, 1.0 + M], dtype=np.complex128)
        return np.array([1.0 + M, 1.0 - M], dtype=np.complex128)
    raise ValueError(f"variant must be 'plain' or 'hat', got {variant!r}")


@dataclass(frozen=True)
class WeylPair:
    """Solution pair (u, v) of the transfer recursion over a window."""

    window: Window
    u: np.ndarray
    v: np.ndarray
    seed_site: int
    side: str
    variant: str
    M: complex

    def at(self, k):
        idx = self.window.index(k)
        return complex(self.u[idx]), complex(self.v[idx])

    def recursion_residual(self, seq, z):
        """max_k |(u_k, v_k) - T(z, k) (u_{k-1}, v_{k-1})| over interior sites."""
        worst = 0.0
        for k in range(self.window.a + 1, self.window.b + 1):
            t = transfer(seq, z, k)
            pred = t @ np.array(self.at(k - 1))
            got = np.array(self.at(k))
            worst = max(worst, float(np.max(np.abs(got - pred))))
        return worst


def weyl_solutions(seq, side, n, z, window, variant="plain", *, M=None,
                   base_len=DEFAULT_HALF_BASE, wd_tol=DEFAULT_WD_TOL):
    """Solution pair seeded at site n and propagated across ``window``.

    The recursion is exponentially unstable away from the decaying
    half-line of the chosen side, so keep the window a bounded overlap zone
    around the seed; propagation aborts with PropagationOverflowError once
    components exceed 1e150.
    """
    if not isinstance(window, Window):
        window = Window(*window)
    if not window.contains(n):
        raise ValueError(f"seed site {n} outside window [{window.a}, {window.b}]")
    if M is None:
        cap = M_cap if variant == "plain" else Mhat_cap
        M = cap(seq, side, n, z, base_len=base_len, wd_tol=wd_tol)
    u = np.zeros(window.size, dtype=np.complex128)
    v = np.zeros(window.size, dtype=np.complex128)
    vec = _seed(z, M, n, variant)
    u[window.index(n)], v[window.index(n)] = vec

    cur = vec.copy()
    for k in range(n + 1, window.b + 1):
        cur = transfer(seq, z, k) @ cur
        if np.max(np.abs(cur)) > OVERFLOW_LIMIT:
            raise PropagationOverflowError(f"overflow propagating up at site {k}", site=k)
        u[window.index(k)], v[window.index(k)] = cur
    cur = vec.copy()
    for k in range(n - 1, window.a - 1, -1):
        cur = transfer_inverse(seq, z, k + 1) @ cur
        if np.max(np.abs(cur)) > OVERFLOW_LIMIT:
            raise PropagationOverflowError(f"overflow propagating down at site {k}", site=k)
        u[window.index(k)], v[window.index(k)] = cur
    return WeylPair(window=window, u=u, v=v, seed_site=n, side=side,
                    variant=variant, M=complex(M))


def green_weyl(seq, k, k_prime, z, k0, variant="plain", *, base_len=DEFAULT_HALF_BASE,
               wd_tol=DEFAULT_WD_TOL):
    """G_{k,k'}(z) assembled from left/right solution pairs anchored at k0.

    Case split: the (l, r) product order follows k < k' versus k > k', with
    the diagonal joining the k < k' branch when k is odd and the k > k'
    branch when k is even.  The denominator is the Wronskian-type
    combination z (u^r v^l - u^l v^r) evaluated exactly at k0.
    """
    lo = min(k, k_prime, k0)
    hi = max(k, k_prime, k0)
    pad = max(0, 9 - (hi - lo))
    window = Window(lo - (pad // 2 + 1), hi + (pad // 2 + 1))
    pr = weyl_solutions(seq, "r", k0, z, window, variant,
                        base_len=base_len, wd_tol=wd_tol)
    pl = weyl_solutions(seq, "l", k0, z, window, variant,
                        base_len=base_len, wd_tol=wd_tol)
    ur0, vr0 = pr.at(k0)
    ul0, vl0 = pl.at(k0)
    den = z * (ur0 * vl0 - ul0 * vr0)
    if abs(den) < WRONSKIAN_TOL:
        raise WronskianDegenerateError(f"|Wronskian| = {abs(den):.3e} at k0={k0}, z={z}")
    if k < k_prime or (k == k_prime and k % 2 == 1):
        num = pl.at(k)[0] * pr.at(k_prime)[1]
    else:
        num = pr.at(k)[0] * pl.at(k_prime)[1]
    sign = -1.0 if k0 % 2 == 0 else 1.0  # (-1)^(k0 + 1)
    return complex(sign * num / den)
