"""Run configuration files.

Flat ``key = value`` text, one key per line; ``#`` starts a comment.
Frequencies are given in MHz in the 2*pi*MHz convention (``omega_mhz = 0.03``
means an angular trap frequency of 2*pi*0.03 rad/us); times are in us.

Keys
----
physics    eta, omega_mhz, delta_mhz, g1_mhz, g2_mhz | g_ratio, gamma_mhz
numerics   solver (required), n_initial, n_fock, t_final_us, dt_us,
           record_every, step_us, scheme, tail_tolerance, initial_state,
           steady_method
scans      scan_parameter, scan_range (lo, hi), scan_points
predict    gap_mhz, gamma1_mhz
schedule   schedule = t0:t1:f1:f2, t1:t2:f1:f2, ...   (laser factors)
output     output_path
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .dynamics import LaserSchedule, Segment
from .errors import ConfigError, EITError
from .model import TWO_PI, SystemParams

SOLVERS = ("schrodinger", "effective", "lindblad")
SCHEMES = ("auto", "etd", "lawson")
STEADY_METHODS = ("auto", "kernel", "long-time")
INITIAL_STATES = ("dark", "phi1", "phi2", "phi3", "1", "2", "3")
SWEEPABLE = ("eta", "omega_mhz", "delta_mhz", "g1_mhz", "g2_mhz", "g_ratio", "gamma_mhz")
SCAN_PARAMETERS = ("ac_stark_ratio",) + SWEEPABLE

FLOAT_KEYS = (
    "eta", "omega_mhz", "delta_mhz", "g1_mhz", "g2_mhz", "g_ratio", "gamma_mhz",
    "t_final_us", "dt_us", "step_us", "tail_tolerance", "gap_mhz", "gamma1_mhz",
)
INT_KEYS = ("n_initial", "n_fock", "record_every", "scan_points")
STR_KEYS = ("solver", "scheme", "initial_state", "steady_method", "scan_parameter", "output_path")
KNOWN = FLOAT_KEYS + INT_KEYS + STR_KEYS + ("scan_range", "schedule")


@dataclass(frozen=True)
class RunConfig:
    solver: str
    eta: float = 0.1
    omega_mhz: float = 0.03
    delta_mhz: float = 15.0
    g1_mhz: float = 1.34
    g2_mhz: float = 0.134
    g_ratio: float = 10.0
    gamma_mhz: float = 0.0
    n_initial: int = 3
    n_fock: int = 28
    t_final_us: float = 600.0
    dt_us: float = 0.5
    record_every: int = 1
    step_us: float | None = None
    scheme: str = "auto"
    tail_tolerance: float = 1e-6
    initial_state: str = "dark"
    steady_method: str = "auto"
    scan_parameter: str = "ac_stark_ratio"
    scan_range: tuple[float, float] = (0.8, 1.2)
    scan_points: int = 41
    gap_mhz: float | None = None
    gamma1_mhz: float | None = None
    schedule: tuple[tuple[float, float, float, float], ...] | None = None
    output_path: str | None = None

    def params(self) -> SystemParams:
        return SystemParams(
            eta=self.eta,
            omega=self.omega_mhz,
            delta=self.delta_mhz,
            g1=self.g1_mhz,
            g2=self.g2_mhz,
            gamma=self.gamma_mhz,
        )

    def laser_schedule(self) -> LaserSchedule | None:
        if self.schedule is None:
            return None
        return LaserSchedule(tuple(Segment(*s) for s in self.schedule))

    def time_grid(self) -> np.ndarray:
        """Record times: every ``record_every`` multiples of ``dt_us`` up to ``t_final_us``."""
        spacing = self.dt_us * self.record_every
        k = int(round(self.t_final_us / spacing))
        return spacing * np.arange(k + 1)

    def with_value(self, key: str, value: float) -> "RunConfig":
        """Copy with one physical key changed; ``g_ratio`` keeps g2 consistent."""
        if key not in SWEEPABLE:
            raise ConfigError(f"{key} cannot be swept")
        changes = {key: value}
        if key == "g_ratio":
            changes["g2_mhz"] = self.g1_mhz / value
        elif key == "g1_mhz":
            changes["g2_mhz"] = value / self.g_ratio
        elif key == "g2_mhz":
            changes["g_ratio"] = self.g1_mhz / value if value else float("inf")
        return dataclasses.replace(self, **changes)

    def resolved(self) -> list[tuple[str, object]]:
        """Every setting plus the derived angular values, for output headers."""
        out: list[tuple[str, object]] = []
        for f in dataclasses.fields(self):
            out.append((f.name, getattr(self, f.name)))
        for key in ("omega_mhz", "delta_mhz", "g1_mhz", "g2_mhz", "gamma_mhz"):
            out.append((key.replace("_mhz", "_rad_per_us"), TWO_PI * getattr(self, key)))
        return out


def _number(raw: str, key: str, line: int, kind=float):
    try:
        value = kind(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {'an integer' if kind is int else 'a number'}, got {raw!r}", line)
    if kind is float and not np.isfinite(value):
        raise ConfigError(f"{key}: value must be finite, got {raw!r}", line)
    return value


def _parse_schedule(raw: str, line: int):
    segs = []
    for chunk in raw.split(","):
        parts = chunk.strip().split(":")
        if len(parts) != 4:
            raise ConfigError(f"schedule segment {chunk.strip()!r} is not t0:t1:f1:f2", line)
        segs.append(tuple(_number(x, "schedule", line) for x in parts))
    return tuple(segs)


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document; errors carry line numbers."""
    values: dict[str, object] = {}
    where: dict[str, int] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first given on line {where[key]})", lineno)
        if not raw:
            raise ConfigError(f"{key}: missing value", lineno)
        if key in FLOAT_KEYS:
            values[key] = _number(raw, key, lineno)
        elif key in INT_KEYS:
            values[key] = _number(raw, key, lineno, int)
        elif key == "scan_range":
            parts = [p for p in raw.replace(",", " ").split() if p]
            if len(parts) != 2:
                raise ConfigError("scan_range needs two numbers 'lo, hi'", lineno)
            values[key] = tuple(_number(p, key, lineno) for p in parts)
        elif key == "schedule":
            values[key] = _parse_schedule(raw, lineno)
        else:
            values[key] = raw
        where[key] = lineno

    def fail(msg, key=None):
        raise ConfigError(msg, where.get(key))

    if "solver" not in values:
        fail("missing required key 'solver'")
    if values["solver"] not in SOLVERS:
        fail(f"solver must be one of {', '.join(SOLVERS)}, got {values['solver']!r}", "solver")
    if "g2_mhz" in values and "g_ratio" in values:
        raise ConfigError("g2_mhz and g_ratio conflict; give only one of them", where["g_ratio"])

    defaults = RunConfig(solver="schrodinger")
    g1 = values.get("g1_mhz", defaults.g1_mhz)
    if "g2_mhz" in values:
        g2 = values["g2_mhz"]
        values["g_ratio"] = g1 / g2 if g2 else float("inf")
    else:
        ratio = values.get("g_ratio", defaults.g_ratio)
        if ratio <= 0:
            fail("g_ratio must be > 0", "g_ratio")
        values["g2_mhz"] = g1 / ratio
        values["g_ratio"] = ratio

    n_init = values.get("n_initial", defaults.n_initial)
    if n_init < 0:
        fail("n_initial must be >= 0", "n_initial")
    values.setdefault("n_fock", n_init + 25)
    if values["n_fock"] < 2 or values["n_fock"] <= n_init:
        fail(f"n_fock must be >= 2 and above n_initial ({n_init})", "n_fock")

    for key in ("t_final_us", "dt_us", "step_us", "tail_tolerance", "scan_points", "record_every"):
        if key in values and values[key] <= 0:
            fail(f"{key} must be > 0", key)
    for key in ("gap_mhz",):
        if key in values and values[key] <= 0:
            fail(f"{key} must be > 0", key)
    if "gamma1_mhz" in values and values["gamma1_mhz"] < 0:
        fail("gamma1_mhz must be >= 0", "gamma1_mhz")
    for key, allowed in (
        ("scheme", SCHEMES),
        ("steady_method", STEADY_METHODS),
        ("initial_state", INITIAL_STATES),
        ("scan_parameter", SCAN_PARAMETERS),
    ):
        if key in values and values[key] not in allowed:
            fail(f"{key} must be one of {', '.join(allowed)}, got {values[key]!r}", key)

    solver = values["solver"]
    if solver != "lindblad":
        for key in ("step_us", "scheme"):
            if key in values:
                fail(f"{key} only applies to solver = lindblad", key)
    if "scan_range" in values:
        lo, hi = values["scan_range"]
        if lo > hi:
            fail("scan_range must be ascending", "scan_range")

    cfg = dataclasses.replace(defaults, **values)

    t_final, spacing = cfg.t_final_us, cfg.dt_us * cfg.record_every
    if abs(round(t_final / spacing) * spacing - t_final) > 1e-9 * t_final:
        fail("t_final_us must be a multiple of dt_us * record_every", "t_final_us")
    if cfg.schedule is not None:
        try:
            sched = cfg.laser_schedule()
        except EITError as exc:
            fail(f"schedule: {exc}", "schedule")
        if sched.t_final < t_final:
            fail(f"schedule ends at {sched.t_final} us, before t_final_us = {t_final}", "schedule")
    try:
        cfg.params()
    except EITError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text)
