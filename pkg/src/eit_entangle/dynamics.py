"""Time evolution, stationary states and observables.

Three engines share one record format:

* ``evolve_schrodinger`` -- closed system, exact propagator per interval.
* ``evolve_effective`` -- non-Hermitian ``H_eff`` (decay without gain terms).
* ``evolve_lindblad`` -- full master equation, see :mod:`.integrators`.

Times are in us; operators come in angular units from :mod:`.model`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .entanglement import negativity, negativity_pure
from .errors import (
    ConvergenceError,
    DimensionError,
    NoSteadyStateError,
    ParameterError,
    PositivityError,
    StateError,
    StepSizeError,
    TruncationError,
)
from .integrators import ETDStepper, make_stepper
from .model import CompositeSpace, OperatorSet, build_operators, dressed_states, liouvillian
from .numerics import hermitian_eigvals, matrix_exp, null_space_solve

TAIL_LEVELS = 3
TAIL_TOL = 1e-6
POSITIVITY_TOL = -1e-6
KERNEL_MAX_FOCK = 20

RECORD_COLUMNS = (
    "time_us",
    "negativity",
    "mean_n",
    "pop_e1",
    "pop_e2",
    "pop_e3",
    "purity",
    "trace_error",
    "tail_population",
)


# --------------------------------------------------------------------------
# states


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    space: CompositeSpace

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex).ravel()
        if a.size != self.space.total_dim:
            raise DimensionError(f"{a.size} amplitudes for a space of dimension {self.space.total_dim}")
        if not np.all(np.isfinite(a)):
            raise StateError("state has non-finite amplitudes")
        object.__setattr__(self, "amplitudes", a)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        nrm = self.norm
        if nrm == 0:
            raise StateError("cannot normalize the zero vector")
        return StateVector(self.amplitudes / nrm, self.space)

    def require_normalized(self, tol: float = 1e-9) -> None:
        if abs(self.norm - 1.0) > tol:
            raise StateError(f"initial state norm {self.norm:.12f} is not 1")

    def projector(self) -> "DensityMatrix":
        a = self.amplitudes
        return DensityMatrix(np.outer(a, a.conj()), self.space)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray
    space: CompositeSpace

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = self.space.total_dim
        if m.shape != (d, d):
            raise DimensionError(f"density matrix of shape {m.shape} on a space of dimension {d}")
        object.__setattr__(self, "matrix", m)

    def validate(self, herm_tol: float = 1e-10, trace_tol: float = 1e-8, eig_tol: float = -1e-8) -> None:
        m = self.matrix
        if not np.all(np.isfinite(m)):
            raise StateError("density matrix has non-finite entries")
        defect = float(np.max(np.abs(m - m.conj().T)))
        if defect > herm_tol:
            raise StateError(f"density matrix not Hermitian (defect {defect:.2e})")
        tr = np.trace(m).real
        if abs(tr - 1.0) > trace_tol:
            raise StateError(f"density matrix trace {tr:.12f} is not 1")
        lo = hermitian_eigvals(m)[0]
        if lo < eig_tol:
            raise StateError(f"density matrix has eigenvalue {lo:.3e}")


def initial_state(ops_or_space, n: int, electronic: str = "dark", params=None) -> StateVector:
    """``|e> (x) |n>`` with ``e`` a dressed state (eta=0) or a bare level.

    ``electronic`` is one of ``dark``/``phi2``, ``phi1``, ``phi3`` or the bare
    levels ``1``, ``2``, ``3``.  Dressed states need the parameters, taken
    from an ``OperatorSet`` or passed as ``params``.
    """
    if isinstance(ops_or_space, OperatorSet):
        space, params = ops_or_space.space, params or ops_or_space.params
    else:
        space = ops_or_space
    if not 0 <= n < space.n_fock:
        raise StateError(f"Fock level {n} outside truncation 0..{space.n_fock - 1}")
    key = str(electronic).lower()
    if key in ("1", "2", "3"):
        el = np.eye(3)[int(key) - 1]
    elif key in ("dark", "phi1", "phi2", "phi3"):
        if params is None:
            raise ParameterError("dressed initial states need the system parameters")
        label = 2 if key == "dark" else int(key[-1])
        el = dressed_states(params).state(label)
    else:
        raise StateError(f"unknown electronic initial state {electronic!r}")
    return StateVector(space.product(el, space.fock(n)), space)


# --------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class Segment:
    t_start: float
    t_end: float
    g1_factor: float = 1.0
    g2_factor: float = 1.0


@dataclass(frozen=True)
class LaserSchedule:
    """Piecewise-constant laser amplitudes relative to the base parameters."""

    segments: tuple[Segment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ParameterError("a schedule needs at least one segment")
        if segs[0].t_start != 0.0:
            raise ParameterError("schedule must start at t = 0")
        for s in segs:
            if not s.t_end > s.t_start:
                raise ParameterError(f"empty or reversed segment [{s.t_start}, {s.t_end}]")
            if s.g1_factor < 0 or s.g2_factor < 0:
                raise ParameterError("laser factors must be >= 0")
        for a, b in zip(segs, segs[1:]):
            if a.t_end != b.t_start:
                raise ParameterError(f"segments not contiguous at t = {a.t_end} / {b.t_start}")
        object.__setattr__(self, "segments", segs)

    @property
    def t_final(self) -> float:
        return self.segments[-1].t_end

    @classmethod
    def constant(cls, t_final: float) -> "LaserSchedule":
        return cls((Segment(0.0, t_final),))

    @classmethod
    def switch_off(cls, t_off: float, t_final: float) -> "LaserSchedule":
        return cls((Segment(0.0, t_off), Segment(t_off, t_final, 0.0, 0.0)))

    def pieces(self, t0: float, t1: float):
        """Yield ``(a, b, g1_factor, g2_factor)`` covering ``[t0, t1]``."""
        if t1 > self.t_final * (1 + 1e-12):
            raise ParameterError(f"time {t1} beyond the end of the schedule ({self.t_final})")
        for s in self.segments:
            a, b = max(t0, s.t_start), min(t1, s.t_end)
            if b > a:
                yield a, b, s.g1_factor, s.g2_factor


# --------------------------------------------------------------------------
# records


@dataclass
class Trajectory:
    times: np.ndarray
    columns: dict[str, np.ndarray]
    solver: str
    states: dict[float, np.ndarray] = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def __getitem__(self, key: str) -> np.ndarray:
        if key == "time_us":
            return self.times
        return self.columns[key]

    @property
    def negativity(self) -> np.ndarray:
        return self.columns["negativity"]

    @property
    def mean_n(self) -> np.ndarray:
        return self.columns["mean_n"]

    def table(self, names=RECORD_COLUMNS) -> np.ndarray:
        return np.column_stack([self[k] for k in names])


def _vib_distribution_pure(psi: np.ndarray, n_fock: int) -> tuple[np.ndarray, np.ndarray]:
    c = np.abs(psi.reshape(3, n_fock)) ** 2
    return c.sum(axis=1), c.sum(axis=0)


def _vib_distribution_mixed(rho: np.ndarray, n_fock: int) -> tuple[np.ndarray, np.ndarray]:
    d = np.diag(rho).real.reshape(3, n_fock)
    return d.sum(axis=1), d.sum(axis=0)


def observables(state, ops: OperatorSet | CompositeSpace) -> dict[str, float]:
    """Mean phonon number, electronic populations, purity and Fock-tail weight.

    Values are expectation values in the state as given, not renormalized.
    """
    space = ops.space if isinstance(ops, OperatorSet) else ops
    n = space.n_fock
    if isinstance(state, StateVector):
        psi = state.amplitudes
        pops, vib = _vib_distribution_pure(psi, n)
        nrm2 = float(np.vdot(psi, psi).real)
        purity, trace = nrm2 * nrm2, nrm2
    else:
        rho = state.matrix if isinstance(state, DensityMatrix) else np.asarray(state)
        space.check(rho)
        pops, vib = _vib_distribution_mixed(rho, n)
        purity = float(np.vdot(rho, rho).real)
        trace = float(np.trace(rho).real)
    return {
        "mean_n": float(np.arange(n) @ vib),
        "pop_e1": float(pops[0]),
        "pop_e2": float(pops[1]),
        "pop_e3": float(pops[2]),
        "purity": purity,
        "trace": trace,
        "tail_population": float(vib[-TAIL_LEVELS:].sum()),
    }


class _Recorder:
    def __init__(self, extra=()):
        self.rows: dict[str, list] = {k: [] for k in RECORD_COLUMNS[1:] + tuple(extra)}

    def add(self, **values):
        for k, v in values.items():
            self.rows[k].append(v)

    def arrays(self):
        return {k: np.asarray(v, dtype=float) for k, v in self.rows.items()}


def _check_grid(grid) -> np.ndarray:
    t = np.asarray(grid, dtype=float).ravel()
    if t.size < 1 or not np.all(np.isfinite(t)):
        raise StepSizeError("time grid must be a non-empty finite sequence")
    if t[0] < 0:
        raise StepSizeError("time grid must start at t >= 0")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise StepSizeError("time grid must be strictly increasing")
    return t


def _tail_guard(value: float, tol: float, t: float) -> None:
    if value > tol:
        raise TruncationError(
            f"top {TAIL_LEVELS} Fock levels hold population {value:.3e} > {tol:.1e} at t = {t:.6g} us; "
            "increase n_fock"
        )


class _OperatorCache:
    """Operators for the laser factors of each schedule segment."""

    def __init__(self, ops: OperatorSet):
        self.base = ops
        self.cache = {(1.0, 1.0): ops}

    def __call__(self, f1: float, f2: float) -> OperatorSet:
        key = (float(f1), float(f2))
        if key not in self.cache:
            self.cache[key] = build_operators(self.base.space, self.base.params.scaled(*key))
        return self.cache[key]


def _pure_evolution(ops, psi0, grid, schedule, tail_tol, store, effective):
    if not isinstance(psi0, StateVector):
        psi0 = StateVector(psi0, ops.space)
    psi0.require_normalized()
    if psi0.space.total_dim != ops.space.total_dim:
        raise DimensionError("initial state and operators live on different spaces")
    t = _check_grid(grid)
    if schedule is None:
        schedule = LaserSchedule.constant(max(t[-1], 1e-300))
    ops_for = _OperatorCache(ops)
    props: dict = {}

    def propagator(f1, f2, dt):
        key = (f1, f2, round(dt, 12))
        if key not in props:
            o = ops_for(f1, f2)
            h = o.h_eff if effective else o.h_total
            props[key] = matrix_exp(-1j * dt * np.asarray(h))
        return props[key]

    rec = _Recorder(("norm", "negativity_raw") if effective else ())
    states = {}
    psi = psi0.amplitudes.copy()
    # the state at t[0] is psi0 propagated from 0
    t_prev = 0.0
    for tk in t:
        for a, b, f1, f2 in schedule.pieces(t_prev, tk):
            psi = propagator(f1, f2, b - a) @ psi
        t_prev = tk
        obs = observables(StateVector(psi, ops.space), ops.space)
        nrm2 = obs["trace"]
        _tail_guard(obs["tail_population"] / (nrm2 if effective and nrm2 > 0 else 1.0), tail_tol, tk)
        if effective:
            neg = negativity_pure(psi / math.sqrt(nrm2), 3) if nrm2 > 0 else 0.0
            rec.add(negativity=neg * nrm2, negativity_raw=neg, norm=math.sqrt(nrm2))
            trace_error = 0.0
        else:
            neg = negativity_pure(psi / np.linalg.norm(psi), 3)
            rec.add(negativity=neg)
            trace_error = nrm2 - 1.0
            if abs(trace_error) > 1e-9:
                raise ConvergenceError(f"norm drift {trace_error:.2e} at t = {tk:.6g} us")
        rec.add(
            mean_n=obs["mean_n"],
            pop_e1=obs["pop_e1"],
            pop_e2=obs["pop_e2"],
            pop_e3=obs["pop_e3"],
            purity=obs["purity"],
            trace_error=trace_error,
            tail_population=obs["tail_population"],
        )
        if store is True or (store and tk in store):
            states[float(tk)] = psi.copy()
    return Trajectory(t, rec.arrays(), "effective" if effective else "schrodinger", states)


def evolve_schrodinger(ops: OperatorSet, psi0, grid, schedule: LaserSchedule | None = None,
                       tail_tol: float = TAIL_TOL, store_states=False) -> Trajectory:
    """Closed-system evolution under the full Hamiltonian.

    Each record interval is propagated with the exact ``expm(-i H dt)``; a
    schedule splits the intervals at its switching times.
    """
    return _pure_evolution(ops, psi0, grid, schedule, tail_tol, store_states, effective=False)


def evolve_effective(ops: OperatorSet, psi0, grid, schedule: LaserSchedule | None = None,
                     tail_tol: float = TAIL_TOL, store_states=False) -> Trajectory:
    """Evolution under the non-Hermitian ``H_eff`` (no gain terms).

    Populations, ``mean_n`` and purity are taken on the decaying state as
    it is.  ``negativity_raw`` is the negativity of the normalized state and
    ``negativity`` that value times the surviving weight ``norm^2``, which is
    the quantity the damped two-state formula describes.
    """
    return _pure_evolution(ops, psi0, grid, schedule, tail_tol, store_states, effective=True)


def evolve_lindblad(ops: OperatorSet, rho0, grid, schedule: LaserSchedule | None = None,
                    step: float | None = None, scheme: str = "auto",
                    tail_tol: float = TAIL_TOL, positivity_tol: float = POSITIVITY_TOL,
                    store_states=False) -> Trajectory:
    """Master-equation evolution with gain terms included.

    Each record interval is split into equal steps no longer than the step
    rule allows (or exactly ``step`` if given, which must divide every
    interval).  Negative eigenvalues below ``positivity_tol`` abort the run;
    they are never clipped.
    """
    if isinstance(rho0, StateVector):
        rho0 = rho0.projector()
    elif not isinstance(rho0, DensityMatrix):
        rho0 = DensityMatrix(rho0, ops.space)
    rho0.validate()
    t = _check_grid(grid)
    if schedule is None:
        schedule = LaserSchedule.constant(max(t[-1], 1e-300))
    ops_for = _OperatorCache(ops)
    steppers: dict = {}
    rec = _Recorder()
    states = {}
    rho = rho0.matrix.copy()
    t_prev = 0.0
    used = set()
    for tk in t:
        for a, b, f1, f2 in schedule.pieces(t_prev, tk):
            interval = b - a
            key = (f1, f2)
            st = steppers.get(key)
            if st is None or (step is None and not _fits(interval, st.h)):
                st = make_stepper(ops_for(f1, f2), h=step, scheme=scheme, interval=interval)
                steppers[key] = st
            k = _n_steps(interval, st.h)
            used.add((st.scheme, st.h))
            u = st.to_internal(rho)
            for _ in range(k):
                u = st.step(u)
            rho = st.from_internal(u)
        t_prev = tk
        obs = observables(rho, ops.space)
        _tail_guard(obs["tail_population"], tail_tol, tk)
        lo = hermitian_eigvals(rho)[0]
        if lo < positivity_tol:
            raise PositivityError(f"density matrix eigenvalue {lo:.3e} at t = {tk:.6g} us")
        rec.add(
            negativity=negativity(rho),
            mean_n=obs["mean_n"],
            pop_e1=obs["pop_e1"],
            pop_e2=obs["pop_e2"],
            pop_e3=obs["pop_e3"],
            purity=obs["purity"],
            trace_error=obs["trace"] - 1.0,
            tail_population=obs["tail_population"],
        )
        if store_states is True or (store_states and tk in store_states):
            states[float(tk)] = rho.copy()
    return Trajectory(t, rec.arrays(), "lindblad", states, {"steps": sorted(used)})


def _fits(interval: float, h: float) -> bool:
    k = round(interval / h)
    return k >= 1 and abs(k * h - interval) <= 1e-9 * interval


def _n_steps(interval: float, h: float) -> int:
    if not _fits(interval, h):
        raise StepSizeError(f"step {h:.6g} us does not divide the record interval {interval:.6g} us")
    return round(interval / h)


# --------------------------------------------------------------------------
# stationary state


@dataclass(frozen=True, eq=False)
class SteadyState:
    rho_stat: DensityMatrix
    residual: float  # ||L rho||_F in rad/us
    negativity_inf: float
    method: str
    liouvillian_norm: float


def apply_liouvillian(ops: OperatorSet, rho: np.ndarray) -> np.ndarray:
    from .model import master_rhs

    return master_rhs(ops, rho)


def _apply_adjoint(ops: OperatorSet, x: np.ndarray) -> np.ndarray:
    h = ops.h_total
    out = 1j * (h @ x - x @ h)
    for rate, op in zip(ops.lindblad_rates, ops.lindblad_ops):
        if rate:
            od = op.conj().T
            loss = od @ op
            out += rate * (od @ x @ op - 0.5 * (loss @ x + x @ loss))
    return out


def liouvillian_norm(ops: OperatorSet, iterations: int = 60, seed: int = 7) -> float:
    """Spectral norm of the Liouvillian by power iteration on ``L^dagger L``.

    Never forms the superoperator.  Converges from below.
    """
    rng = np.random.default_rng(seed)
    d = ops.space.total_dim
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iterations):
        y = _apply_adjoint(ops, apply_liouvillian(ops, x))
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        new = math.sqrt(nrm)
        x = y / nrm
        if abs(new - est) < 1e-6 * new:
            est = new
            break
        est = new
    return est


def steady_state(ops: OperatorSet, method: str = "auto", relax_step: float = 0.5,
                 t_max: float = 2e5, rate_tol: float = 1e-12, residual_tol: float = 1e-10) -> SteadyState:
    """Stationary state of the master equation.

    ``kernel`` takes the null vector of the full Liouvillian (n_fock <= 20);
    ``long-time`` relaxes ``|phi2,0>`` with exponential RK4 steps of
    ``relax_step`` us until ``||d rho/dt|| < rate_tol``.  Exponential
    integrators keep stationary points exactly, so a long step only affects
    how the transient is followed, not where it ends.  ``auto`` picks the
    kernel when the truncation allows it.
    """
    if ops.params.gamma <= 0:
        raise NoSteadyStateError("without spontaneous emission there is no unique stationary state")
    if method == "auto":
        method = "kernel" if ops.space.n_fock <= KERNEL_MAX_FOCK else "long-time"
    if method == "kernel":
        if ops.space.n_fock > KERNEL_MAX_FOCK:
            raise ParameterError(
                f"kernel method limited to n_fock <= {KERNEL_MAX_FOCK}, got {ops.space.n_fock}"
            )
        sol = null_space_solve(liouvillian(ops))
        rho = sol.matrix
        tr = np.trace(rho)
        if abs(tr) < 1e-12:
            raise NoSteadyStateError("kernel vector has zero trace")
        rho = rho / tr
        rho = 0.5 * (rho + rho.conj().T)
        norm_l = float(sol.singular_values[0])
    elif method == "long-time":
        rho = _relax(ops, relax_step, t_max, rate_tol)
        norm_l = liouvillian_norm(ops)
    else:
        raise ParameterError(f"unknown steady-state method {method!r}")
    residual = float(np.linalg.norm(apply_liouvillian(ops, rho)))
    if residual >= residual_tol * norm_l:
        raise NoSteadyStateError(
            f"stationary residual {residual:.3e} above {residual_tol:.0e} * ||L|| = {residual_tol * norm_l:.3e}"
        )
    dm = DensityMatrix(rho, ops.space)
    return SteadyState(dm, residual, negativity(rho), method, norm_l)


def _relax(ops: OperatorSet, h: float, t_max: float, rate_tol: float) -> np.ndarray:
    st = ETDStepper(ops, h)
    if st.cond > 1e4:
        raise ConvergenceError(f"eigenbasis of H_eff too ill-conditioned ({st.cond:.2e}) for relaxation")
    psi = initial_state(ops, 0, "dark").amplitudes
    u = st.to_internal(np.outer(psi, psi.conj()))
    rho = st.from_internal(u)
    for _ in range(int(math.ceil(t_max / h))):
        u = st.step(u)
        new = st.from_internal(u)
        rate = np.linalg.norm(new - rho) / h
        rho = new
        if rate < rate_tol:
            return rho / np.trace(rho).real
    raise NoSteadyStateError(f"no stationary state reached within {t_max} us (rate {rate:.3e})")
