"""Batch front end: validated job configs in, CSV/JSON reports out.

Jobs are described by a JSON config (see ``cmvscat schema``) and selected
by subcommand; the config's ``job`` field must match the subcommand so a
config file is always self-describing.  Reports embed the resolved config
and the library version; identical configs produce byte-identical reports
up to the single timestamp line.  Per-sample numerical failures are
recorded in their row and never abort a sweep.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from . import __version__
from . import coefficients as coeffs
from .dynamics import WavePacket, reflection_probe
from .errors import CmvScatError, ConfigError
from .operator import Window, truncate
from .oracle import dense_green, finite_time_scattering
from .resolvent import RadialSchedule, extrapolate_levels, halfline_green_nn, green
from .scattering import off_diagonality_report, theta_grid
from .weyl import green_weyl

WORKERS_ENV = "CMVSCAT_WORKERS"

JOBS = ("density", "scattering-sweep", "reflectionless-report", "dynamics-probe",
        "oracle-check")
SUBCOMMAND_JOB = {
    "density": "density",
    "scatter": "scattering-sweep",
    "refl": "reflectionless-report",
    "probe": "dynamics-probe",
    "oracle": "oracle-check",
}

CSV_COLUMNS = {
    "density": ["theta", "density_l", "density_r", "err_l", "err_r", "converged"],
    "scattering-sweep": [
        "theta", "n", "s_ll_re", "s_ll_im", "s_lr_re", "s_lr_im",
        "s_rl_re", "s_rl_im", "s_rr_re", "s_rr_im", "density_l", "density_r",
        "unitarity_defect", "refl_residual", "converged", "support_l", "support_r",
    ],
    "reflectionless-report": [
        "theta", "refl_residual", "refl_err", "abs_s_ll", "abs_s_rr",
        "offdiagonal", "refl_ok", "straddle", "converged",
    ],
    "dynamics-probe": ["step", "left_mass", "right_mass", "escaped"],
    "oracle-check": ["check", "metric", "tolerance", "status"],
}

COLUMN_DOCS = {
    "theta": "angle of the boundary point e^{i theta}",
    "n": "decoupling site",
    "s_ll_re": "Re s_ll at theta", "s_ll_im": "Im s_ll at theta",
    "s_lr_re": "Re s_lr", "s_lr_im": "Im s_lr",
    "s_rl_re": "Re s_rl", "s_rl_im": "Im s_rl",
    "s_rr_re": "Re s_rr", "s_rr_im": "Im s_rr",
    "density_l": "a.c. density of the left half-line measure at site n-1",
    "density_r": "a.c. density of the right half-line measure at site n",
    "unitarity_defect": "max entry of |s* s - I| over the active channels",
    "refl_residual": "|M^l_n + conj(M^r_n)| at the boundary",
    "refl_err": "error estimate for refl_residual",
    "abs_s_ll": "|s_ll| boundary value", "abs_s_rr": "|s_rr| boundary value",
    "offdiagonal": "true when every active diagonal entry is below tol",
    "refl_ok": "true when refl_residual <= tol",
    "straddle": "true when an error bar overlaps the tolerance line",
    "converged": "all boundary extrapolations met tolerance",
    "err_l": "error estimate for density_l", "err_r": "error estimate for density_r",
    "step": "time step", "left_mass": "mass on sites < n",
    "right_mass": "mass on sites >= n", "escaped": "1 - left - right (drift)",
    "check": "oracle comparison name", "metric": "measured discrepancy",
    "tolerance": "documented tolerance", "status": "pass or fail",
    "support_l": "left channel active (density above threshold)",
    "support_r": "right channel active",
}


# -- config parsing -------------------------------------------------------------

def _require_keys(obj, allowed, required, where):
    unknown = set(obj) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")
    missing = set(required) - set(obj)
    if missing:
        raise ConfigError(f"missing key(s) {sorted(missing)} in {where}")


def _as_complex(value, where):
    if isinstance(value, (int, float)):
        return complex(value)
    if (isinstance(value, (list, tuple)) and len(value) == 2
            and all(isinstance(v, (int, float)) for v in value)):
        return complex(value[0], value[1])
    raise ConfigError(f"{where}: expected a number or [re, im] pair, got {value!r}")


def _build_sequence(spec):
    _require_keys(spec, ("kind", "params"), ("kind",), "coefficients")
    kind = spec["kind"]
    params = spec.get("params", {})
    try:
        if kind == "free":
            _require_keys(params, (), (), "coefficients.params")
            return coeffs.free()
        if kind == "constant":
            _require_keys(params, ("value",), ("value",), "coefficients.params")
            return coeffs.constant(_as_complex(params["value"], "constant value"))
        if kind == "single_barrier":
            _require_keys(params, ("site", "value"), ("site", "value"),
                          "coefficients.params")
            return coeffs.single_barrier(int(params["site"]),
                                         _as_complex(params["value"], "barrier value"))
        if kind == "random_decay":
            _require_keys(params, ("seed", "rate"), ("seed", "rate"),
                          "coefficients.params")
            return coeffs.random_decay(int(params["seed"]), float(params["rate"]))
        if kind == "periodic":
            _require_keys(params, ("values",), ("values",), "coefficients.params")
            return coeffs.periodic([_as_complex(v, f"periodic value {i}")
                                    for i, v in enumerate(params["values"])])
        if kind == "explicit":
            _require_keys(params, ("values", "default"), ("values",),
                          "coefficients.params")
            table = {int(k): _as_complex(v, f"explicit value at index {k}")
                     for k, v in params["values"].items()}
            default = _as_complex(params.get("default", 0.0), "explicit default")
            return coeffs.explicit(table, default)
    except CmvScatError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown coefficient kind {kind!r}; "
                      f"expected one of {list(coeffs.KINDS)}")


@dataclass(frozen=True)
class JobConfig:
    seq: object
    n: int
    window: Window
    thetas: np.ndarray
    schedule: RadialSchedule
    tol_unitarity: float
    tol_offdiag: float
    tol_wd: float
    job: str
    out_path: str
    out_format: str
    dynamics: dict
    raw: dict


DEFAULT_TOLERANCES = {"unitarity": 1e-3, "offdiag": 1e-3, "window_doubling": 1e-6}
DEFAULT_RADIAL = {"eps0": 1e-2, "levels": 6, "contraction": 0.5,
                  "extrapolation": "richardson"}
DEFAULT_GRID = {"count": 64, "offset": 0.5}


def parse_config(raw):
    top_keys = ("coefficients", "decoupling_n", "window", "theta_grid", "radial",
                "tolerances", "job", "output", "dynamics")
    _require_keys(raw, top_keys,
                  ("coefficients", "decoupling_n", "window", "job", "output"),
                  "config")
    seq = _build_sequence(raw["coefficients"])
    n = int(raw["decoupling_n"])

    win_spec = raw["window"]
    _require_keys(win_spec, ("a", "b"), ("a", "b"), "window")
    try:
        window = Window(int(win_spec["a"]), int(win_spec["b"]))
    except CmvScatError as exc:
        raise ConfigError(str(exc)) from exc

    grid = dict(DEFAULT_GRID)
    grid.update(raw.get("theta_grid", {}))
    _require_keys(grid, ("count", "offset"), (), "theta_grid")
    if int(grid["count"]) < 1:
        raise ConfigError("theta_grid.count must be >= 1")
    thetas = theta_grid(int(grid["count"]), float(grid["offset"]))

    rad = dict(DEFAULT_RADIAL)
    rad.update(raw.get("radial", {}))
    _require_keys(rad, tuple(DEFAULT_RADIAL), (), "radial")
    try:
        schedule = RadialSchedule(eps0=float(rad["eps0"]), levels=int(rad["levels"]),
                                  contraction=float(rad["contraction"]),
                                  extrapolation=str(rad["extrapolation"]))
    except ValueError as exc:
        raise ConfigError(f"radial: {exc}") from exc

    tol = dict(DEFAULT_TOLERANCES)
    tol.update(raw.get("tolerances", {}))
    _require_keys(tol, tuple(DEFAULT_TOLERANCES), (), "tolerances")

    job = raw["job"]
    if job not in JOBS:
        raise ConfigError(f"unknown job {job!r}; expected one of {list(JOBS)}")

    out = raw["output"]
    _require_keys(out, ("path", "format"), ("path",), "output")
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"output.format must be csv or json, got {fmt!r}")

    dyn = dict(raw.get("dynamics", {}))
    if job == "dynamics-probe":
        _require_keys(dyn, ("center", "width", "theta0", "horizon"),
                      ("center", "width", "horizon"), "dynamics")
    elif dyn:
        raise ConfigError("dynamics section is only valid for the dynamics-probe job")

    return JobConfig(
        seq=seq, n=n, window=window, thetas=thetas, schedule=schedule,
        tol_unitarity=float(tol["unitarity"]), tol_offdiag=float(tol["offdiag"]),
        tol_wd=float(tol["window_doubling"]), job=job,
        out_path=out["path"], out_format=fmt, dynamics=dyn, raw=raw,
    )


# -- report writing -------------------------------------------------------------

def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    v = float(value)
    return format(v, ".17g")


def _canonical_config(raw):
    return json.dumps(raw, sort_keys=True, separators=(",", ":"))


def write_report(path, fmt, columns, rows, raw_config, summary=None):
    stamp = datetime.now(timezone.utc).isoformat()
    if fmt == "csv":
        lines = [
            f"# cmvscat version: {__version__}",
            f"# config: {_canonical_config(raw_config)}",
            f"# generated: {stamp}",
            ",".join(columns),
        ]
        lines += [",".join(_fmt(v) for v in row) for row in rows]
        if summary is not None:
            lines.append(f"# summary: {json.dumps(summary, sort_keys=True)}")
        text = "\n".join(lines) + "\n"
    else:
        doc = {
            "version": __version__,
            "config": raw_config,
            "generated": stamp,
            "columns": columns,
            "rows": [[row_value if isinstance(row_value, (bool, str)) else float(row_value)
                      for row_value in row] for row in rows],
        }
        if summary is not None:
            doc["summary"] = summary
        text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    with open(path, "w") as fh:
        fh.write(text)


# -- jobs -----------------------------------------------------------------------

def _job_density(cfg, workers):
    half_base = max(64, (cfg.window.b - cfg.window.a) // 2)
    rows = []
    eps = cfg.schedule.distances()
    for theta in cfg.thetas:
        try:
            ml_levels, mr_levels = [], []
            for z in cfg.schedule.points(theta):
                gl = halfline_green_nn(cfg.seq, "l", cfg.n - 1, z,
                                       base_len=half_base, wd_tol=cfg.tol_wd)
                gr = halfline_green_nn(cfg.seq, "r", cfg.n, z,
                                       base_len=half_base, wd_tol=cfg.tol_wd)
                ml_levels.append(-(1 + 2 * z * gl))
                mr_levels.append(+(1 + 2 * z * gr))
            bl = extrapolate_levels(eps, ml_levels, cfg.schedule.extrapolation)
            br = extrapolate_levels(eps, mr_levels, cfg.schedule.extrapolation)
            rows.append([theta, max(0.0, -bl.value.real), max(0.0, br.value.real),
                         bl.err_est, br.err_est, bool(bl.converged and br.converged)])
        except CmvScatError:
            rows.append([theta, float("nan"), float("nan"), float("nan"),
                         float("nan"), False])
    return rows, None


def _job_scatter(cfg, workers):
    from .scattering import sweep

    samples = sweep(cfg.seq, cfg.n, cfg.thetas, cfg.schedule, workers=workers,
                    window=cfg.window, wd_tol=cfg.tol_wd)
    rows = []
    for s in samples:
        rows.append([
            s.theta, s.n,
            s.s_ll.real, s.s_ll.imag, s.s_lr.real, s.s_lr.imag,
            s.s_rl.real, s.s_rl.imag, s.s_rr.real, s.s_rr.imag,
            s.density_l, s.density_r, s.unitarity_defect, s.refl_residual,
            s.converged, s.support_l, s.support_r,
        ])
    n_conv = sum(1 for s in samples if s.converged)
    worst = max((s.unitarity_defect for s in samples
                 if s.converged and s.support_l and s.support_r), default=float("nan"))
    summary = {"converged": n_conv, "points": len(samples),
               "max_two_channel_unitarity_defect": worst}
    return rows, summary


def _job_refl(cfg, workers):
    rep = off_diagonality_report(cfg.seq, cfg.n, cfg.thetas, tol=cfg.tol_offdiag,
                                 schedule=cfg.schedule, workers=workers,
                                 window=cfg.window, wd_tol=cfg.tol_wd)
    rows = []
    for s, od, rk, st in zip(rep.samples, rep.offdiag, rep.refl_ok, rep.straddle):
        rows.append([
            s.theta, s.refl_residual, s.err_refl, abs(s.s_ll), abs(s.s_rr),
            bool(od), bool(rk), bool(st), s.converged,
        ])
    return rows, rep.summary


def _job_probe(cfg, workers):
    dyn = cfg.dynamics
    packet = WavePacket(center=int(dyn["center"]), width=float(dyn["width"]),
                        theta0=float(dyn.get("theta0", 0.0)))
    res = reflection_probe(cfg.seq, cfg.n, packet, horizon=int(dyn["horizon"]),
                           window=cfg.window, record_series=True)
    rows = [[int(r[0]), r[1], r[2], r[3]] for r in res.series]
    summary = {"left_mass": res.left_mass, "right_mass": res.right_mass,
               "escaped": res.escaped, "steps": res.steps,
               "edge_contact": res.edge_contact}
    return rows, summary


def _job_oracle(cfg, workers):
    """Fixed desk-scale comparisons of production paths against oracles."""
    rng = np.random.default_rng(2025)
    rows = []

    def record(name, metric, tol):
        rows.append([name, float(metric), float(tol),
                     "pass" if metric <= tol else "fail"])

    seq = cfg.seq
    win = Window(-64, 63)
    z = 0.4 + 0.2j
    G = dense_green(seq, win, z)
    worst = 0.0
    for i, j in [(-3, 2), (0, 0), (5, -4), (1, 1)]:
        g = green(seq, win, i, j, z, check="off")
        ref = G[win.index(i), win.index(j)]
        worst = max(worst, abs(g - ref) / max(1e-12, abs(ref)))
    record("green_vs_dense_rel", worst, 1e-10)

    U = truncate(seq, win).to_dense()
    record("dense_green_z0_vs_adjoint", float(np.max(np.abs(
        dense_green(seq, win, 0.0) - U.conj().T))), 1e-12)

    record("truncation_unitarity", truncate(seq, Window(-32, 31)).unitarity_defect(),
           1e-12)

    worst = 0.0
    for zm in (0.3, 0.7, 1.5):
        zz = zm * np.exp(1j * rng.uniform(0, 2 * np.pi))
        Gd = dense_green(seq, Window(-96, 95), zz)
        for k, kp, k0 in [(-2, 3, 0), (4, 4, 1)]:
            ref = Gd[k + 96, kp + 96]
            got = green_weyl(seq, k, kp, zz, k0)
            worst = max(worst, abs(got - ref) / max(1e-9, abs(ref)))
    record("green_weyl_vs_dense_rel", worst, 1e-8)

    td = finite_time_scattering(coeffs.free(), 0, Window(-512, 511), m_max=120, t=0.999)
    record("time_domain_free_sll", abs(td.entries[("l", "l")] + 1.0), 5e-2)

    ok = all(r[3] == "pass" for r in rows)
    return rows, {"all_pass": ok}


JOB_RUNNERS = {
    "density": _job_density,
    "scattering-sweep": _job_scatter,
    "reflectionless-report": _job_refl,
    "dynamics-probe": _job_probe,
    "oracle-check": _job_oracle,
}


def _dump_operator(cfg, path):
    """Debug CSV of the config-window truncation: i, j, Re, Im."""
    U = truncate(cfg.seq, cfg.window)
    with open(path, "w") as fh:
        fh.write("i,j,re,im\n")
        for r in range(U.size):
            i = cfg.window.a + r
            for d in range(5):
                j = i + d - 2
                if cfg.window.contains(j):
                    v = U.diags[d, r]
                    if v != 0:
                        fh.write(f"{i},{j},{_fmt(v.real)},{_fmt(v.imag)}\n")


# -- entry point ----------------------------------------------------------------

def _print_schema():
    print("cmvscat job config (JSON):")
    print("""\
{
  "coefficients": {"kind": "free|constant|single_barrier|random_decay|periodic|explicit",
                   "params": {...kind-specific; complex numbers as [re, im]...}},
  "decoupling_n": 0,
  "window": {"a": -2048, "b": 2048},
  "theta_grid": {"count": 64, "offset": 0.5},          // optional; offset in grid steps
  "radial": {"eps0": 0.01, "levels": 6, "contraction": 0.5,
             "extrapolation": "richardson"},           // optional
  "tolerances": {"unitarity": 1e-3, "offdiag": 1e-3,
                 "window_doubling": 1e-6},             // optional
  "job": "density|scattering-sweep|reflectionless-report|dynamics-probe|oracle-check",
  "output": {"path": "out.csv", "format": "csv|json"},
  "dynamics": {"center": -400, "width": 40, "theta0": 1.5708,
               "horizon": 6000}                        // dynamics-probe only
}

kind-specific params:
  free:           {}
  constant:       {"value": [re, im]}
  single_barrier: {"site": 0, "value": [re, im]}
  random_decay:   {"seed": 1, "rate": 0.5}
  periodic:       {"values": [[re, im], ...]}
  explicit:       {"values": {"site": [re, im], ...}, "default": [re, im]}
""")
    for job in JOBS:
        print(f"CSV columns for job {job}:")
        for col in CSV_COLUMNS[job]:
            print(f"  {col}: {COLUMN_DOCS[col]}")
        print()


def _resolve_workers(arg_value):
    if arg_value is not None:
        return max(1, int(arg_value))
    env = os.environ.get(WORKERS_ENV, "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from exc
    return 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cmvscat",
        description="CMV scattering-matrix and reflectionless-classification jobs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, job in SUBCOMMAND_JOB.items():
        p = sub.add_parser(name, help=f"run a {job} job")
        p.add_argument("config", help="path to the JSON job config")
        p.add_argument("--workers", type=int, default=None,
                       help=f"theta-sweep worker count (default: ${WORKERS_ENV} or 1)")
        p.add_argument("--output", default=None, help="override output.path")
        p.add_argument("--format", default=None, choices=("csv", "json"),
                       help="override output.format")
        p.add_argument("--dump-operator", default=None, metavar="PATH",
                       help="also write the config-window truncation as CSV")
    sub.add_parser("schema", help="print the config schema and CSV column docs")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        _print_schema()
        return 0
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": "config-read", "detail": str(exc)}), file=sys.stderr)
        return 2
    try:
        cfg = parse_config(raw)
        expected = SUBCOMMAND_JOB[args.command]
        if cfg.job != expected:
            raise ConfigError(
                f"config job is {cfg.job!r} but subcommand {args.command!r} "
                f"runs {expected!r}"
            )
        workers = _resolve_workers(args.workers)
    except ConfigError as exc:
        print(json.dumps({"error": "config-schema", "detail": str(exc)}), file=sys.stderr)
        return 2

    out_path = args.output or cfg.out_path
    out_fmt = args.format or cfg.out_format
    try:
        rows, summary = JOB_RUNNERS[cfg.job](cfg, workers)
        if args.dump_operator:
            _dump_operator(cfg, args.dump_operator)
    except CmvScatError as exc:
        print(json.dumps({"error": "job-failed", "detail": str(exc),
                          "kind": type(exc).__name__}), file=sys.stderr)
        return 1
    write_report(out_path, out_fmt, CSV_COLUMNS[cfg.job], rows, raw, summary)
    if cfg.job == "oracle-check" and not summary["all_pass"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
