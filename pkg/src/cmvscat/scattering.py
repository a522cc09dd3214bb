"""The 2x2 scattering matrix of the coupled/decoupled pair and the
reflectionless classification.

For a decoupling site n, the matrix s(theta) relating the incoming and
outgoing channels (left/right half-lines, density-normalized so that the
matrix is unitary in the standard C^2 inner product wherever both spectral
densities are positive) is assembled from boundary values of full-line
resolvent pairings against the defect columns of C - C_n, together with
the two half-line densities.  The entries use the even-n branch

    s_ll = 1 + (1 - conj(a_n) - <R D_{n-2}, D*_{n-1}> / rho_{n-1}) d_l
    s_lr = (rho_n - <R D_{n-2}, D*_n> / rho_{n-1}) sqrt(d_r d_l)
    s_rl = (-rho_n + <R D_{n+1}, D*_{n-1}> / rho_{n+1}) sqrt(d_r d_l)
    s_rr = 1 + (1 - a_n + <R D_{n+1}, D*_n> / rho_{n+1}) d_r

and the odd-n branch

    s_ll = 1 + (1 - conj(a_n) - <R D_{n-1}, D*_{n-2}> / rho_{n-1}) d_l
    s_lr = (-rho_n + <R D_{n-1}, D*_{n+1}> / rho_{n+1}) sqrt(d_r d_l)
    s_rl = (rho_n - <R D_n, D*_{n-2}> / rho_{n-1}) sqrt(d_r d_l)
    s_rr = 1 + (1 - a_n + <R D_n, D*_{n+1}> / rho_{n+1}) d_r

where R = (C - z)^{-1} at z = r e^{i theta}, r -> 1 from inside, D_j is
the j-th defect column, D*_j the adjoint one, and d_l, d_r the a.c.
densities of the half-line spectral measures at sites n-1 and n.  Every
level value is certified by window doubling; the boundary value is the
radial extrapolation of the fully assembled entry.

An independent diagonal route goes through the Moebius-transformed
m-functions:

    s_ll = (conj(Mhat^r_{n-1}) + Mhat^l_{n-1}) / (conj(Mhat^r_{n-1}) - conj(Mhat^l_{n-1}))
    s_rr = (conj(M^l_n) + M^r_n) / (conj(M^l_n) - conj(M^r_n))

and the operator is reflectionless at theta exactly when
M^l_n = -conj(M^r_n) there, i.e. when both diagonals vanish.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    MoebiusPoleError,
    NearSpectrumError,
    NegativeDensityError,
    NotConvergedError,
)
from .operator import Window, defect
from .resolvent import (
    DEFAULT_BV_TOL,
    DEFAULT_WD_TOL,
    RadialSchedule,
    extrapolate_levels,
    grown_pairings,
    halfline_green_nn,
)
from .weyl import M_cap, Mhat_cap

# Channel counts as active when its a.c. density exceeds this floor.
DENSITY_SUPPORT_THRESHOLD = 1e-3
M_DENOMINATOR_TOL = 1e-12


@dataclass(frozen=True)
class ScatteringSample:
    """Everything computed for one (theta, n) scattering evaluation."""

    theta: float
    n: int
    s: np.ndarray                      # 2x2, [[ll, lr], [rl, rr]]; NaN when failed
    density_l: float
    density_r: float
    support_l: bool
    support_r: bool
    unitarity_defect: float
    refl_residual: float
    converged: bool
    err_entries: np.ndarray            # 2x2 boundary-extrapolation error estimates
    err_refl: float
    diag_moebius: tuple = (complex("nan"), complex("nan"))
    err_diag_moebius: tuple = (float("nan"), float("nan"))
    error: str = ""

    @property
    def s_ll(self):
        return complex(self.s[0, 0])

    @property
    def s_lr(self):
        return complex(self.s[0, 1])

    @property
    def s_rl(self):
        return complex(self.s[1, 0])

    @property
    def s_rr(self):
        return complex(self.s[1, 1])


def _unitarity_defect(s, support_l, support_r):
    if support_l and support_r:
        return float(np.max(np.abs(s.conj().T @ s - np.eye(2))))
    if support_l:
        return float(abs(abs(s[0, 0]) - 1.0))
    if support_r:
        return float(abs(abs(s[1, 1]) - 1.0))
    return 0.0


class ScatteringCalculator:
    """Shared machinery for per-theta scattering samples.

    One instance fixes (sequence, decoupling site, radial schedule, base
    window, tolerances); ``sample(theta)`` then computes the resolvent-route
    entries, the Moebius-route diagonals, densities, support flags, the
    reflectionless residual, and error estimates in a single pass over the
    radial levels, sharing every banded solve between consumers.
    """

    def __init__(self, seq, n, schedule=None, *, window=None,
                 wd_tol=DEFAULT_WD_TOL, bv_tol=DEFAULT_BV_TOL,
                 support_threshold=DENSITY_SUPPORT_THRESHOLD):
        if seq.is_decoupled:
            raise ValueError("pass the coupled sequence; decoupling is applied internally")
        self.seq = seq
        self.n = int(n)
        self.schedule = schedule if schedule is not None else RadialSchedule()
        if window is None:
            window = Window(self.n - 2048, self.n + 2048)
        if not (window.a + 8 <= self.n <= window.b - 8):
            raise ValueError(
                f"decoupling site {self.n} too close to window [{window.a}, {window.b}]"
            )
        self.window = window
        self.wd_tol = wd_tol
        self.bv_tol = bv_tol
        self.support_threshold = support_threshold
        self._defect = defect(seq, self.n)
        half_base = max(64, (window.b - window.a) // 2)
        self._half_base = half_base

        n_ = self.n
        if n_ % 2 == 0:
            self._rhs_sites = (n_ - 2, n_ + 1)
            self._probe_sites = (n_ - 1, n_)
        else:
            self._rhs_sites = (n_ - 1, n_)
            self._probe_sites = (n_ - 2, n_ + 1)
        self._rhs = [self._defect.column(j) for j in self._rhs_sites]
        self._probes = [self._defect.adjoint_column(j) for j in self._probe_sites]

    # -- per-level computations -------------------------------------------

    def _m_values(self, z):
        gl = halfline_green_nn(self.seq, "l", self.n - 1, z,
                               base_len=self._half_base, wd_tol=self.wd_tol)
        gr = halfline_green_nn(self.seq, "r", self.n, z,
                               base_len=self._half_base, wd_tol=self.wd_tol)
        m_l = -(1.0 + 2.0 * z * gl)
        m_r = +(1.0 + 2.0 * z * gr)
        return m_l, m_r

    def _entries_at(self, z, m_l, m_r):
        """Assembled resolvent-route entries at one interior point z."""
        n = self.n
        seq = self.seq
        a_n = seq.alpha(n)
        rho_m = seq.rho(n - 1)
        rho_n = seq.rho(n)
        rho_p = seq.rho(n + 1)
        P = grown_pairings(seq, self.window, z, self._rhs, self._probes,
                           mode="herm", grow="both", wd_tol=self.wd_tol)
        d_l = -m_l.real
        d_r = m_r.real
        cross = math.sqrt(max(d_l, 0.0) * max(d_r, 0.0))
        if n % 2 == 0:
            s_ll = 1.0 + (1.0 - np.conj(a_n) - P[0, 0] / rho_m) * d_l
            s_lr = (rho_n - P[0, 1] / rho_m) * cross
            s_rl = (-rho_n + P[1, 0] / rho_p) * cross
            s_rr = 1.0 + (1.0 - a_n + P[1, 1] / rho_p) * d_r
        else:
            s_ll = 1.0 + (1.0 - np.conj(a_n) - P[0, 0] / rho_m) * d_l
            s_lr = (-rho_n + P[0, 1] / rho_p) * cross
            s_rl = (rho_n - P[1, 0] / rho_m) * cross
            s_rr = 1.0 + (1.0 - a_n + P[1, 1] / rho_p) * d_r
        return np.array([[s_ll, s_lr], [s_rl, s_rr]], dtype=np.complex128)

    def _moebius_diagonals_at(self, z, m_l, m_r):
        """Moebius-route diagonals at one interior point z.

        Both need only m^(l)_{n-1} and m^(r)_n: Mhat^l_{n-1} and M^r_n are
        those m's themselves, while Mhat^r_{n-1} and M^l_n are their
        Moebius transforms through alpha_n.
        """
        Ml = M_cap(self.seq, "l", self.n, z, m_value=m_l)
        Mr = m_r
        Mhat_l = m_l
        Mhat_r = Mhat_cap(self.seq, "r", self.n - 1, z, m_value=m_r)
        den_ll = np.conj(Mhat_r) - np.conj(Mhat_l)
        den_rr = np.conj(Ml) - np.conj(Mr)
        if abs(den_ll) < M_DENOMINATOR_TOL or abs(den_rr) < M_DENOMINATOR_TOL:
            raise MoebiusPoleError(f"degenerate M-denominator at z={z}")
        s_ll = (np.conj(Mhat_r) + Mhat_l) / den_ll
        s_rr = (np.conj(Ml) + Mr) / den_rr
        return complex(s_ll), complex(s_rr), complex(Ml), complex(Mr)

    # -- public sampling ----------------------------------------------------

    def sample(self, theta):
        """One ScatteringSample; numerical failures are recorded, not raised."""
        sched = self.schedule
        eps = sched.distances()
        zs = sched.points(theta)
        nan2 = np.full((2, 2), np.nan + 1j * np.nan)
        try:
            entries_levels = []
            moebius_levels = []
            M_levels = []
            m_levels = []
            for z in zs:
                m_l, m_r = self._m_values(z)
                m_levels.append((m_l, m_r))
                entries_levels.append(self._entries_at(z, m_l, m_r))
                p_ll, p_rr, Ml, Mr = self._moebius_diagonals_at(z, m_l, m_r)
                moebius_levels.append((p_ll, p_rr))
                M_levels.append((Ml, Mr))
        except (NotConvergedError, NearSpectrumError, MoebiusPoleError,
                NegativeDensityError) as exc:
            return ScatteringSample(
                theta=float(theta), n=self.n, s=nan2,
                density_l=float("nan"), density_r=float("nan"),
                support_l=False, support_r=False,
                unitarity_defect=float("nan"), refl_residual=float("nan"),
                converged=False, err_entries=np.full((2, 2), np.nan),
                err_refl=float("nan"), error=type(exc).__name__,
            )

        extrap = sched.extrapolation
        s = np.empty((2, 2), dtype=np.complex128)
        err_entries = np.empty((2, 2))
        converged = True
        for r in range(2):
            for c in range(2):
                bv = extrapolate_levels(
                    eps, [lev[r, c] for lev in entries_levels], extrap, tol=self.bv_tol
                )
                s[r, c] = bv.value
                err_entries[r, c] = bv.err_est
                converged &= bv.converged

        bv_ml = extrapolate_levels(eps, [m[0] for m in m_levels], extrap, tol=self.bv_tol)
        bv_mr = extrapolate_levels(eps, [m[1] for m in m_levels], extrap, tol=self.bv_tol)
        converged &= bv_ml.converged and bv_mr.converged
        density_l = float(max(0.0, -bv_ml.value.real))
        density_r = float(max(0.0, bv_mr.value.real))
        support_l = bool(density_l > self.support_threshold)
        support_r = bool(density_r > self.support_threshold)

        bv_Ml = extrapolate_levels(eps, [m[0] for m in M_levels], extrap, tol=self.bv_tol)
        bv_Mr = extrapolate_levels(eps, [m[1] for m in M_levels], extrap, tol=self.bv_tol)
        refl_residual = abs(bv_Ml.value + np.conj(bv_Mr.value))
        err_refl = bv_Ml.err_est + bv_Mr.err_est
        converged &= bv_Ml.converged and bv_Mr.converged

        bv_pll = extrapolate_levels(eps, [p[0] for p in moebius_levels], extrap, tol=self.bv_tol)
        bv_prr = extrapolate_levels(eps, [p[1] for p in moebius_levels], extrap, tol=self.bv_tol)

        return ScatteringSample(
            theta=float(theta), n=self.n, s=s,
            density_l=density_l, density_r=density_r,
            support_l=support_l, support_r=support_r,
            unitarity_defect=_unitarity_defect(s, support_l, support_r),
            refl_residual=float(refl_residual),
            converged=bool(converged),
            err_entries=err_entries,
            err_refl=float(err_refl),
            diag_moebius=(bv_pll.value, bv_prr.value),
            err_diag_moebius=(bv_pll.err_est, bv_prr.err_est),
        )


# -- single-shot operations ----------------------------------------------------

def scattering_matrix(seq, n, theta, schedule=None, **kwargs):
    """ScatteringSample at one theta (see ScatteringCalculator)."""
    return ScatteringCalculator(seq, n, schedule, **kwargs).sample(theta)


def diagonal_via_M(seq, n, theta, schedule=None, **kwargs):
    """(s_ll, s_rr) through the Moebius-route formulas only."""
    calc = ScatteringCalculator(seq, n, schedule, **kwargs)
    sample = calc.sample(theta)
    if not sample.converged:
        raise NotConvergedError(
            f"diagonal boundary values not converged at theta={theta} ({sample.error})"
        )
    return sample.diag_moebius


def reflectionless_residual(seq, n, theta, schedule=None, *, window=None,
                            wd_tol=DEFAULT_WD_TOL, bv_tol=DEFAULT_BV_TOL):
    """|M^(l)_n + conj(M^(r)_n)| at the boundary point e^{i theta}.

    Vanishing (a.e. on an arc) is the defining reflectionless condition.
    """
    if schedule is None:
        schedule = RadialSchedule()
    if window is None:
        window = Window(n - 256, n + 256)
    half_base = max(64, (window.b - window.a) // 2)
    eps = schedule.distances()
    Ml_levels = []
    Mr_levels = []
    for z in schedule.points(theta):
        gl = halfline_green_nn(seq, "l", n - 1, z, base_len=half_base, wd_tol=wd_tol)
        gr = halfline_green_nn(seq, "r", n, z, base_len=half_base, wd_tol=wd_tol)
        m_l = -(1.0 + 2.0 * z * gl)
        m_r = +(1.0 + 2.0 * z * gr)
        Ml_levels.append(M_cap(seq, "l", n, z, m_value=m_l))
        Mr_levels.append(m_r)
    bv_Ml = extrapolate_levels(eps, Ml_levels, schedule.extrapolation, tol=bv_tol)
    bv_Mr = extrapolate_levels(eps, Mr_levels, schedule.extrapolation, tol=bv_tol)
    if not (bv_Ml.converged and bv_Mr.converged):
        raise NotConvergedError(f"M boundary values not converged at theta={theta}")
    return float(abs(bv_Ml.value + np.conj(bv_Mr.value)))


# -- sweeps and reports ---------------------------------------------------------

def theta_grid(count, offset=0.5):
    """Uniform grid theta_i = 2 pi (i + offset) / count.

    The half-step default offset dodges symmetry-pinned angles like
    theta = 0 where boundary behavior can be atypical.
    """
    return 2.0 * np.pi * (np.arange(count) + offset) / count


_WORKER_CALC = None


def _worker_init(seq, n, schedule, kwargs):
    global _WORKER_CALC
    _WORKER_CALC = ScatteringCalculator(seq, n, schedule, **kwargs)


def _worker_sample(theta):
    return _WORKER_CALC.sample(theta)


def sweep(seq, n, thetas, schedule=None, *, workers=1, **kwargs):
    """ScatteringSamples over a theta grid, in deterministic theta order."""
    if workers <= 1:
        calc = ScatteringCalculator(seq, n, schedule, **kwargs)
        return [calc.sample(t) for t in thetas]
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_worker_init,
        initargs=(seq, n, schedule, kwargs),
    ) as pool:
        return list(pool.map(_worker_sample, thetas, chunksize=1))


@dataclass(frozen=True)
class OffDiagonalReport:
    """Per-theta off-diagonality classification with a residual cross-check."""

    samples: list
    tol: float
    offdiag: list            # per theta: True/False/None (None = not converged)
    refl_ok: list            # residual test per theta, same convention
    straddle: list           # error bar overlaps the tolerance line
    summary: dict = field(default_factory=dict)


def classify_offdiagonal(sample, tol):
    """Off-diagonal iff every active channel's diagonal is below tol."""
    ok = True
    if sample.support_l:
        ok &= abs(sample.s_ll) <= tol
    if sample.support_r:
        ok &= abs(sample.s_rr) <= tol
    return bool(ok)


def _straddles(sample, tol):
    vals = []
    if sample.support_l:
        vals.append((abs(sample.s_ll), sample.err_entries[0, 0]))
    if sample.support_r:
        vals.append((abs(sample.s_rr), sample.err_entries[1, 1]))
    vals.append((sample.refl_residual, sample.err_refl))
    return any(abs(v - tol) <= e for v, e in vals)


def off_diagonality_report(seq, n, thetas, tol=1e-3, schedule=None, *,
                           workers=1, **kwargs):
    """Classify each grid point and cross-report against the residual test.

    Non-converged points are reported separately and never counted toward
    either classification; agreement between the matrix test and the
    residual test is tallied on converged, non-straddling points only.
    """
    samples = sweep(seq, n, thetas, schedule, workers=workers, **kwargs)
    offdiag = []
    refl_ok = []
    straddle = []
    n_conv = n_off = n_agree = n_strad = n_decided = 0
    for s in samples:
        if not s.converged:
            offdiag.append(None)
            refl_ok.append(None)
            straddle.append(False)
            continue
        n_conv += 1
        od = classify_offdiagonal(s, tol)
        rk = s.refl_residual <= tol
        st = _straddles(s, tol)
        offdiag.append(od)
        refl_ok.append(rk)
        straddle.append(st)
        n_off += od
        if st:
            n_strad += 1
        else:
            n_decided += 1
            n_agree += (od == rk)
    total = len(samples)
    summary = {
        "points": total,
        "converged": n_conv,
        "converged_fraction": n_conv / total if total else 0.0,
        "offdiagonal": n_off,
        "offdiagonal_fraction": n_off / n_conv if n_conv else 0.0,
        "straddling": n_strad,
        "agreement_fraction": n_agree / n_decided if n_decided else 1.0,
    }
    return OffDiagonalReport(samples=samples, tol=tol, offdiag=offdiag,
                             refl_ok=refl_ok, straddle=straddle, summary=summary)
