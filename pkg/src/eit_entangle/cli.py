"""Command-line front end: ``eit-entangle <command> --config FILE [--out DIR]``.

Every command writes CSV files whose ``#`` header echoes the fully resolved
configuration (raw and angular units), so each file can be re-run on its own.
Floats are written with 17 significant digits; identical configs give
byte-identical files.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .dynamics import (
    RECORD_COLUMNS,
    evolve_effective,
    evolve_lindblad,
    evolve_schrodinger,
    initial_state,
    observables,
    steady_state,
)
from .errors import ConfigError, EITError
from .model import build_operators, build_space
from .spectral import (
    find_avoided_crossing,
    gamma1,
    gap_approx,
    predict_negativity_damped,
    predict_negativity_pure,
    spectrum_scan,
)

COMMANDS = ("spectrum", "evolve", "steady", "sweep", "predict")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if x is None:
        return ""
    if isinstance(x, tuple):
        return ", ".join(fmt(v) if not isinstance(v, tuple) else ":".join(fmt(w) for w in v) for v in x)
    return str(x)


def header(cfg: RunConfig, command: str, extra=()) -> list[str]:
    lines = [f"# eit-entangle {__version__}", f"# command = {command}"]
    lines += [f"# {k} = {fmt(v)}" for k, v in cfg.resolved()]
    lines += [f"# {k} = {fmt(v)}" for k, v in extra]
    return lines


def write_csv(path: str, head: list[str], columns, rows) -> None:
    tmp = path + ".part"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        for line in head:
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    os.replace(tmp, path)


# --------------------------------------------------------------------------
# commands


def _ops(cfg: RunConfig):
    return build_operators(build_space(cfg.n_fock), cfg.params())


def run_spectrum(cfg: RunConfig, out: str) -> list[str]:
    p = cfg.params()
    if cfg.scan_parameter != "ac_stark_ratio":
        raise ConfigError("spectrum scans use scan_parameter = ac_stark_ratio")
    n = max(cfg.n_initial, 1)
    crossing = find_avoided_crossing(p, n, cfg.n_fock, window=cfg.scan_range)
    extra = [
        ("crossing_n", crossing.n),
        ("crossing_center", crossing.center),
        ("crossing_gap_mhz", crossing.gap),
        ("crossing_gap_rad_per_us", 2 * np.pi * crossing.gap),
        ("crossing_e_plus_mhz", crossing.e_plus),
        ("crossing_e_minus_mhz", crossing.e_minus),
        ("gap_approx_mhz", gap_approx(p, n)),
    ]
    scan = spectrum_scan(p, cfg.scan_range, cfg.scan_points, cfg.n_fock)
    vals = scan.tracks if scan.tracks is not None else scan.eigenvalues
    cols = ["ac_stark_ratio"] + [f"level_{k}" for k in range(vals.shape[1])]
    path = os.path.join(out, "spectrum.csv")
    write_csv(path, header(cfg, "spectrum", extra), cols,
              (np.concatenate([[c], v]) for c, v in zip(scan.control, vals)))
    cpath = os.path.join(out, "crossing.csv")
    write_csv(cpath, header(cfg, "spectrum"),
              ["n", "center", "gap_mhz", "e_plus_mhz", "e_minus_mhz", "gap_approx_mhz"],
              [(crossing.n, crossing.center, crossing.gap, crossing.e_plus, crossing.e_minus, gap_approx(p, n))])
    return [path, cpath]


def _evolve(cfg: RunConfig):
    ops = _ops(cfg)
    psi0 = initial_state(ops, cfg.n_initial, cfg.initial_state)
    grid = cfg.time_grid()
    sched = cfg.laser_schedule()
    if cfg.solver == "schrodinger":
        return evolve_schrodinger(ops, psi0, grid, sched, cfg.tail_tolerance)
    if cfg.solver == "effective":
        return evolve_effective(ops, psi0, grid, sched, cfg.tail_tolerance)
    return evolve_lindblad(ops, psi0, grid, sched, step=cfg.step_us, scheme=cfg.scheme,
                           tail_tol=cfg.tail_tolerance)


def _trajectory_columns(traj) -> list[str]:
    cols = list(RECORD_COLUMNS)
    if traj.solver == "effective":
        cols += ["negativity_raw", "norm"]
    return cols


def run_evolve(cfg: RunConfig, out: str, name: str = "evolve.csv") -> list[str]:
    traj = _evolve(cfg)
    cols = _trajectory_columns(traj)
    path = os.path.join(out, name)
    write_csv(path, header(cfg, "evolve"), cols, traj.table(cols))
    return [path]


def run_steady(cfg: RunConfig, out: str) -> list[str]:
    ops = _ops(cfg)
    ss = steady_state(ops, cfg.steady_method)
    rho = ss.rho_stat.matrix
    dark0 = initial_state(ops, 0, "dark").amplitudes
    obs = observables(ss.rho_stat, ops)
    row = (
        ss.method, ss.negativity_inf, ss.residual, ss.liouvillian_norm,
        float(np.vdot(dark0, rho @ dark0).real), obs["mean_n"],
        obs["pop_e1"], obs["pop_e2"], obs["pop_e3"], obs["purity"],
    )
    cols = ["method", "negativity_inf", "residual", "liouvillian_norm", "pop_dark_0",
            "mean_n", "pop_e1", "pop_e2", "pop_e3", "purity"]
    path = os.path.join(out, "steady.csv")
    write_csv(path, header(cfg, "steady"), cols, [row])
    return [path]


def _sweep_one(args):
    cfg, out, name = args
    traj = _evolve(cfg)
    cols = _trajectory_columns(traj)
    write_csv(os.path.join(out, name), header(cfg, "evolve"), cols, traj.table(cols))
    neg = traj.negativity
    return (
        float(traj.times[-1]), float(neg[-1]), float(neg.max()), float(traj.times[int(np.argmax(neg))]),
        float(traj.mean_n[-1]), float(traj["trace_error"][-1]),
    )


def run_sweep(cfg: RunConfig, out: str, workers: int | None = None) -> list[str]:
    key = cfg.scan_parameter
    if key == "ac_stark_ratio":
        raise ConfigError("sweep needs scan_parameter set to a physical key, e.g. gamma_mhz")
    values = np.linspace(cfg.scan_range[0], cfg.scan_range[1], cfg.scan_points)
    jobs = []
    for i, v in enumerate(values):
        try:
            sub = cfg.with_value(key, float(v))
            sub.params()
        except EITError as exc:
            raise ConfigError(f"sweep value {key} = {v}: {exc}") from exc
        jobs.append((sub, out, f"sweep_{i:03d}.csv"))
    if workers is None:
        workers = min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    cols = ["run", key, "time_us", "final_negativity", "max_negativity", "time_of_max_us",
            "final_mean_n", "final_trace_error"]
    rows = [(i, v) + r for i, (v, r) in enumerate(zip(values, results))]
    path = os.path.join(out, "sweep_summary.csv")
    write_csv(path, header(cfg, "sweep"), cols, rows)
    return [os.path.join(out, j[2]) for j in jobs] + [path]


def run_predict(cfg: RunConfig, out: str) -> list[str]:
    p = cfg.params()
    n = max(cfg.n_initial, 1)
    if cfg.gap_mhz is not None:
        gap, source = cfg.gap_mhz, "config"
    else:
        gap, source = find_avoided_crossing(p, n, cfg.n_fock).gap, "numerical-crossing"
    g1 = cfg.gamma1_mhz if cfg.gamma1_mhz is not None else gamma1(p)
    t = cfg.time_grid()
    extra = [("gap_used_mhz", gap), ("gap_source", source), ("gamma1_used_mhz", g1)]
    rows = np.column_stack([t, predict_negativity_pure(gap, t), predict_negativity_damped(gap, g1, t)])
    path = os.path.join(out, "predict.csv")
    write_csv(path, header(cfg, "predict", extra), ["time_us", "negativity_pure", "negativity_damped"], rows)
    return [path]


RUNNERS = {
    "spectrum": run_spectrum,
    "evolve": run_evolve,
    "steady": run_steady,
    "sweep": run_sweep,
    "predict": run_predict,
}


def run(command: str, cfg: RunConfig, out: str | None = None) -> list[str]:
    out = out or cfg.output_path or "."
    os.makedirs(out, exist_ok=True)
    return RUNNERS[command](cfg, out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="eit-entangle", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="run configuration (key = value lines)")
    parser.add_argument("--out", default=None, help="output directory (default: output_path or .)")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        paths = run(args.command, cfg, args.out)
    except EITError as exc:
        msg = " ".join(str(exc).split())
        print(f"error[{exc.tag}]: {msg}", file=sys.stderr)
        return exc.exit_code
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
