"""Green's functions, half-line m-functions, boundary values, densities.

All spectral quantities come from banded solves of ``(U - z) x = b`` on
edge-decoupled truncations.  Finite truncations carry an edge artifact of
order ``exp(-|1 - |z|| * distance_to_edge)``, so every production quantity
is certified by a window-doubling check: the window grows until the value
is stable to ``wd_tol`` (relative), and failure to stabilize raises
``NotConvergedError`` rather than returning a silently polluted number.

Boundary values on the unit circle are radial limits from inside the disc,
``z = (1 - eps_j) e^{i theta}`` with a geometric schedule of distances,
optionally Richardson-accelerated by polynomial extrapolation in ``eps``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import NearSpectrumError, NegativeDensityError, NotConvergedError
from .operator import BandedUnitary, Window, truncate

# Residual target for every accepted resolvent solve.
RESIDUAL_TARGET = 1e-12
# Solution-growth bound treated as "z effectively on the spectrum".
COND_LIMIT = 1e12
# Pre-growth heuristic: put the window edge at distance >= GUARD / eps from
# the probed sites before the first doubling comparison.
GUARD = 16.0
# Hard cap on one-sided window span during growth.
MAX_GROWN_SPAN = 1 << 18

DEFAULT_WD_TOL = 1e-6
DEFAULT_BV_TOL = 1e-4
DEFAULT_HALF_BASE = 256


@dataclass(frozen=True)
class RadialSchedule:
    """Geometric approach r_j = 1 - eps0 * contraction^j to the unit circle."""

    eps0: float = 1e-2
    levels: int = 6
    contraction: float = 0.5
    extrapolation: str = "richardson"

    def __post_init__(self):
        if not (0 < self.eps0 < 1):
            raise ValueError(f"eps0 must be in (0, 1), got {self.eps0}")
        if self.levels < 3:
            raise ValueError(f"need at least 3 levels, got {self.levels}")
        if not (0 < self.contraction < 1):
            raise ValueError(f"contraction must be in (0, 1), got {self.contraction}")
        if self.eps0 * self.contraction ** self.levels <= 1e-12:
            raise ValueError(
                "schedule reaches closer than 1e-12 to the circle; solver "
                "conditioning cannot support it"
            )
        if self.extrapolation not in ("none", "richardson"):
            raise ValueError(f"unknown extrapolation {self.extrapolation!r}")

    def distances(self):
        return self.eps0 * self.contraction ** np.arange(self.levels)

    def radii(self):
        return 1.0 - self.distances()

    def points(self, theta):
        return self.radii() * np.exp(1j * theta)


@dataclass(frozen=True)
class BoundaryValue:
    value: complex
    err_est: float
    converged: bool


class BandSolver:
    """Factor (U - z) once on a truncation; solve many right-hand sides.

    One step of iterative refinement keeps the residual at the accepted
    target even when z sits within ~1e-4 of the unit circle.
    """

    def __init__(self, unitary: BandedUnitary, z):
        self.unitary = unitary
        self.z = complex(z)
        fac = _kernels.factor_banded(unitary.lapack_band(self.z))
        if fac.singular:
            raise NearSpectrumError(f"(U - z) exactly singular at z={self.z}")
        self._fac = fac

    def _residual(self, x, b):
        return self.unitary.matvec(x) - self.z * x - b

    def solve(self, b):
        b = np.asarray(b, dtype=np.complex128)
        scale = max(1.0, float(np.linalg.norm(b)))
        x = self._fac.solve(b)
        r = self._residual(x, b)
        if np.linalg.norm(r) > 0.5 * RESIDUAL_TARGET * scale:
            x = x - self._fac.solve(r)
            r = self._residual(x, b)
        res = float(np.linalg.norm(r))
        if res > RESIDUAL_TARGET * scale:
            raise NearSpectrumError(
                f"resolvent residual {res:.3e} above target at z={self.z}"
            )
        if np.linalg.norm(x) > COND_LIMIT * scale:
            raise NearSpectrumError(f"solution growth beyond {COND_LIMIT:.1e} at z={self.z}")
        return x

    def solve_sparse(self, rhs):
        """Solve with a {site: value} right-hand side."""
        b = np.zeros(self.unitary.size, dtype=np.complex128)
        for k, v in rhs.items():
            b[self.unitary.window.index(k)] = v
        return self.solve(b)


def _sparse_pair(x, v, window, mode):
    """<x, v> over a sparse second factor.

    mode "herm": sum conj(x_i) v_i (physics inner product, x conjugated);
    mode "bilinear": sum x_i v_i.
    """
    acc = 0.0 + 0.0j
    for k, val in v.items():
        xi = x[window.index(k)]
        acc += (np.conj(xi) if mode == "herm" else xi) * val
    return acc


# Truncations are z-independent; radial sweeps revisit the same window
# ladder at every level, so a small cache pays for itself immediately.
_truncate_cached = lru_cache(maxsize=24)(truncate)


def resolvent_pairings(seq, window, z, rhs_list, probe_list, mode="herm"):
    """Matrix of pairings <(U_window - z)^{-1} u_a, v_b> on a fixed window."""
    unitary = _truncate_cached(seq, window)
    solver = BandSolver(unitary, z)
    out = np.empty((len(rhs_list), len(probe_list)), dtype=np.complex128)
    for a, u in enumerate(rhs_list):
        x = solver.solve_sparse(u)
        for b, v in enumerate(probe_list):
            out[a, b] = _sparse_pair(x, v, window, mode)
    return out


def _pregrow(window, z, grow):
    """Grow the window until edges sit at least GUARD / eps sites away."""
    eps = abs(1.0 - abs(z))
    if eps <= 0:
        raise ValueError("|z| = 1 is not in the resolvent set")
    target = GUARD / eps
    w = window
    while (w.b - w.a) < target:
        if (w.b - w.a) * 2 > MAX_GROWN_SPAN:
            break
        w = w.doubled(grow)
    return w


def grown_pairings(seq, window, z, rhs_list, probe_list, *, mode="herm",
                   grow="both", wd_tol=DEFAULT_WD_TOL):
    """Pairings with a window-doubling convergence certificate.

    Doubles the window (about its center, or one-sided for half-line use)
    until the full pairing matrix moves by at most wd_tol relative between
    consecutive sizes; returns the larger-window values.
    """
    w = _pregrow(window, z, grow)
    prev = None
    while True:
        vals = resolvent_pairings(seq, w, z, rhs_list, probe_list, mode=mode)
        if prev is not None:
            scale = max(1.0, float(np.max(np.abs(vals))))
            if float(np.max(np.abs(vals - prev))) <= wd_tol * scale:
                return vals
        if (w.b - w.a) * 2 > MAX_GROWN_SPAN:
            raise NotConvergedError(
                f"window grew to span {w.b - w.a} without stabilizing at z={z}"
            )
        prev = vals
        w = w.doubled(grow)


def green(seq, window, i, j, z, *, check="doubling", wd_tol=DEFAULT_WD_TOL):
    """<delta_i, (U - z)^{-1} delta_j> for the truncation U on ``window``.

    With check="doubling" the value is recomputed on the doubled window and
    must agree to wd_tol (relative); instability raises NotConvergedError.
    The returned value is always the one for the requested window.
    """
    if not isinstance(window, Window):
        window = Window(*window)
    val = resolvent_pairings(seq, window, z, [{j: 1.0}], [{i: 1.0}], mode="bilinear")[0, 0]
    if check == "doubling":
        big = resolvent_pairings(
            seq, window.doubled("both"), z, [{j: 1.0}], [{i: 1.0}], mode="bilinear"
        )[0, 0]
        if abs(big - val) > wd_tol * max(1.0, abs(val)):
            raise NotConvergedError(
                f"green({i},{j}) unstable under window doubling at z={z}: "
                f"{val} vs {big}"
            )
    elif check != "off":
        raise ValueError(f"unknown check mode {check!r}")
    return complex(val)


def halfline_green_nn(seq, side, n, z, *, base_len=DEFAULT_HALF_BASE,
                      wd_tol=DEFAULT_WD_TOL):
    """Certified G_{nn}(z) of the half-line operator cut at n.

    side "r": operator on [n, inf), realized as growing windows [n, n+L];
    side "l": operator on (-inf, n], windows [n-L, n].  The cut edge stays
    pinned at n; only the artificial far edge grows.
    """
    if side == "r":
        window, grow = Window(n, n + base_len), "right"
    elif side == "l":
        window, grow = Window(n - base_len, n), "left"
    else:
        raise ValueError(f"side must be 'l' or 'r', got {side!r}")
    vals = grown_pairings(
        seq, window, z, [{n: 1.0}], [{n: 1.0}], mode="bilinear", grow=grow, wd_tol=wd_tol
    )
    return complex(vals[0, 0])


def m_function(seq, side, n, z, *, base_len=DEFAULT_HALF_BASE, wd_tol=DEFAULT_WD_TOL):
    """Half-line Weyl-Titchmarsh function -+ <delta_n, (C' + z)(C' - z)^{-1} delta_n>.

    The sign is - for side "l" and + for side "r"; equivalently
    ``-+ (1 + 2 z G'_{nn}(z))`` through the half-line Green's function.
    At z = 0 this is exactly -+1 for every sequence.
    """
    g = halfline_green_nn(seq, side, n, z, base_len=base_len, wd_tol=wd_tol)
    m = 1.0 + 2.0 * z * g
    return -m if side == "l" else m


def _neville_at_zero(xs, ys):
    p = [complex(y) for y in ys]
    n = len(p)
    for m in range(1, n):
        for i in range(n - m):
            p[i] = (xs[i + m] * p[i] - xs[i] * p[i + 1]) / (xs[i + m] - xs[i])
    return p[0]


def radial_limit(f, theta, schedule, *, tol=DEFAULT_BV_TOL):
    """Boundary value lim_{r->1} f(r e^{i theta}) with an error estimate.

    ``f`` is evaluated at every scheduled radius; with Richardson
    extrapolation the limit is the polynomial-in-eps extrapolant to eps = 0
    and err_est is the change from dropping the deepest level.  Exceptions
    from ``f`` propagate.
    """
    eps = schedule.distances()
    zs = schedule.points(theta)
    ys = [f(z) for z in zs]
    return extrapolate_levels(eps, ys, schedule.extrapolation, tol=tol)


def extrapolate_levels(eps, ys, extrapolation, *, tol=DEFAULT_BV_TOL):
    """Shared tail of radial_limit for pre-evaluated level values."""
    ys = [complex(y) for y in ys]
    if not all(np.isfinite(y.real) and np.isfinite(y.imag) for y in ys):
        return BoundaryValue(value=complex("nan"), err_est=float("inf"), converged=False)
    if extrapolation == "richardson":
        value = _neville_at_zero(eps, ys)
        prev = _neville_at_zero(eps[:-1], ys[:-1])
    else:
        value = ys[-1]
        prev = ys[-2]
    err = float(abs(value - prev))
    return BoundaryValue(value=complex(value), err_est=err, converged=bool(err <= tol))


def ac_density(seq, side, n, theta, schedule, *, tol=DEFAULT_BV_TOL,
               neg_tol=1e-3, base_len=DEFAULT_HALF_BASE, wd_tol=DEFAULT_WD_TOL):
    """Density of the a.c. part against normalized Lebesgue measure.

    Equals -+ Re of the m-function boundary value (- for "l", + for "r").
    Raises NotConvergedError when the radial limit fails, and
    NegativeDensityError when the result is below -neg_tol; tiny negative
    values in [-neg_tol, 0) clamp to 0.
    """
    bv = radial_limit(
        lambda z: m_function(seq, side, n, z, base_len=base_len, wd_tol=wd_tol),
        theta, schedule, tol=tol,
    )
    if not bv.converged:
        raise NotConvergedError(
            f"m boundary value not converged at theta={theta} (err {bv.err_est:.3e})"
        )
    d = bv.value.real if side == "r" else -bv.value.real
    if d < -neg_tol:
        raise NegativeDensityError(
            f"density {d:.3e} < -{neg_tol:.1e} at theta={theta}; extrapolation failed"
        )
    return max(float(d), 0.0)


def ac_support(seq, side, n, thetas, threshold, schedule=None, **density_kwargs):
    """Support flags (density > threshold) over a theta grid.

    Returns (flags, converged): non-converged grid points report flag False
    with converged False instead of aborting the sweep.
    """
    if schedule is None:
        schedule = RadialSchedule()
    flags = np.zeros(len(thetas), dtype=bool)
    good = np.zeros(len(thetas), dtype=bool)
    for idx, theta in enumerate(thetas):
        try:
            d = ac_density(seq, side, n, theta, schedule, **density_kwargs)
        except (NotConvergedError, NegativeDensityError, NearSpectrumError):
            continue
        flags[idx] = d > threshold
        good[idx] = True
    return flags, good
