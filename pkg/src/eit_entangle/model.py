"""Trapped three-level atom driven by two counter-propagating lasers.

Conventions
-----------
* Frequencies in :class:`SystemParams` are given in units of 2*pi*MHz, i.e.
  ``omega=0.03`` means an angular trap frequency of 2*pi*0.03 rad/us.  Every
  matrix built here is in angular units (rad/us) and times are in us.
* Electronic levels ``|1>, |2>`` (ground) and ``|3>`` (excited) map to the
  indices 0, 1, 2.  The composite basis is electronic-major:
  ``index = e * n_fock + n``.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionError, LabelingAmbiguityError, ParameterError
from .numerics import hermitian_eig, matrix_exp

TWO_PI = 2.0 * np.pi
N_ELECTRONIC = 3
REGIME_RATIO = 0.5  # g/Delta or Gamma/Delta above this triggers a RegimeWarning


class RegimeWarning(UserWarning):
    """Parameters outside the weak-coupling regime assumed by the closed forms."""


@dataclass(frozen=True)
class SystemParams:
    eta: float = 0.1
    omega: float = 0.03
    delta: float = 15.0
    g1: float = 1.34
    g2: float = 0.134
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("eta", "omega", "delta", "g1", "g2", "gamma"):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value}")
        if self.eta < 0:
            raise ParameterError(f"eta must be >= 0, got {self.eta}")
        if self.omega <= 0:
            raise ParameterError(f"omega must be > 0, got {self.omega}")
        if self.g1 < 0 or self.g2 < 0:
            raise ParameterError("Rabi couplings g1, g2 must be >= 0")
        if self.gamma < 0:
            raise ParameterError(f"gamma must be >= 0, got {self.gamma}")
        scale = abs(self.delta)
        if max(self.g1, self.g2) > REGIME_RATIO * scale:
            warnings.warn("couplings are not small compared to the detuning", RegimeWarning, 3)
        if self.gamma > REGIME_RATIO * scale:
            warnings.warn("emission rate is not small compared to the detuning", RegimeWarning, 3)

    @classmethod
    def reference(cls, gamma: float = 0.0, **changes) -> "SystemParams":
        """The reference parameter set eta=0.1, omega=0.03, Delta=15, g1=1.34, g1/g2=10."""
        return dataclasses.replace(cls(gamma=gamma), **changes)

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def scaled(self, g1_factor: float, g2_factor: float | None = None) -> "SystemParams":
        if g2_factor is None:
            g2_factor = g1_factor
        return dataclasses.replace(self, g1=self.g1 * g1_factor, g2=self.g2 * g2_factor)

    def angular(self, name: str) -> float:
        """Parameter ``name`` in rad/us."""
        return TWO_PI * getattr(self, name)


@dataclass(frozen=True)
class CompositeSpace:
    n_fock: int
    electronic_dim: int = N_ELECTRONIC
    ordering: str = "electronic-major"

    @property
    def total_dim(self) -> int:
        return self.electronic_dim * self.n_fock

    def index(self, e: int, n: int) -> int:
        return e * self.n_fock + n

    def basis_state(self, e: int, n: int) -> np.ndarray:
        v = np.zeros(self.total_dim, dtype=complex)
        v[self.index(e, n)] = 1.0
        return v

    def product(self, electronic, vibrational) -> np.ndarray:
        el = np.asarray(electronic, dtype=complex)
        vib = np.asarray(vibrational, dtype=complex)
        if el.shape != (self.electronic_dim,) or vib.shape != (self.n_fock,):
            raise DimensionError("factor shapes do not match the composite space")
        return np.kron(el, vib)

    def fock(self, n: int) -> np.ndarray:
        v = np.zeros(self.n_fock, dtype=complex)
        v[n] = 1.0
        return v

    def lift(self, electronic_op, vibrational_op=None) -> np.ndarray:
        """``electronic_op (x) vibrational_op`` on the composite space."""
        vib = np.eye(self.n_fock) if vibrational_op is None else vibrational_op
        return np.kron(np.asarray(electronic_op), vib)

    def check(self, matrix: np.ndarray) -> None:
        if matrix.shape[0] != self.total_dim:
            raise DimensionError(
                f"object of dimension {matrix.shape[0]} does not live on a space "
                f"of dimension {self.total_dim}"
            )


def build_space(n_fock: int) -> CompositeSpace:
    if int(n_fock) != n_fock or n_fock < 2:
        raise ParameterError(f"n_fock must be an integer >= 2, got {n_fock}")
    return CompositeSpace(int(n_fock))


def electronic_unit(i: int, j: int) -> np.ndarray:
    """``|i><j|`` on the three electronic levels (0-based indices)."""
    m = np.zeros((N_ELECTRONIC, N_ELECTRONIC))
    m[i, j] = 1.0
    return m


def ladder(n_fock: int) -> np.ndarray:
    """Truncated annihilation operator."""
    return np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), 1).astype(complex)


def displacement_phases(n_fock: int, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """``exp(+ikx)`` and ``exp(-ikx)`` with ``kx = eta (a + a^dagger)``.

    The exponential is taken of the truncated anti-Hermitian generator, so the
    result is unitary on the truncated space; the truncation error shows up
    only in matrix elements near the top Fock levels.
    """
    a = ladder(n_fock)
    x = a + a.conj().T
    plus = matrix_exp(1j * eta * x)
    return plus, plus.conj().T


@dataclass(frozen=True, eq=False)
class OperatorSet:
    """All operators for one parameter set, in angular units (rad/us)."""

    space: CompositeSpace
    params: SystemParams
    a: np.ndarray
    a_dag: np.ndarray
    exp_plus: np.ndarray
    exp_minus: np.ndarray
    h_cm: np.ndarray
    h_el: np.ndarray
    h_int: np.ndarray
    h_total: np.ndarray
    h_eff: np.ndarray
    lindblad_ops: tuple[np.ndarray, ...]
    lindblad_rates: tuple[float, ...]
    lindblad_labels: tuple[str, ...] = ("1+", "1-", "2+", "2-")

    def projector(self, i: int, j: int | None = None) -> np.ndarray:
        """Electronic ``|i><j|`` (0-based) lifted to the composite space."""
        return self.space.lift(electronic_unit(i, i if j is None else j))

    @cached_property
    def proj(self) -> dict[tuple[int, int], np.ndarray]:
        """All nine lifted ``|i><j|``, keyed by 0-based ``(i, j)``."""
        return {(i, j): _frozen(self.projector(i, j)) for i in range(3) for j in range(3)}

    @cached_property
    def number(self) -> np.ndarray:
        return self.space.lift(np.eye(N_ELECTRONIC), self.a_dag @ self.a)

    @property
    def gamma(self) -> float:
        """Spontaneous emission rate in rad/us."""
        return self.params.angular("gamma")

    @cached_property
    def hamiltonian_norm(self) -> float:
        """Spectral norm of ``h_total`` (rad/us)."""
        return float(np.linalg.norm(self.h_total, 2))

    def with_laser_factors(self, g1_factor: float, g2_factor: float) -> "OperatorSet":
        if g1_factor == 1.0 and g2_factor == 1.0:
            return self
        return build_operators(self.space, self.params.scaled(g1_factor, g2_factor))


def _frozen(m: np.ndarray) -> np.ndarray:
    m.setflags(write=False)
    return m


def build_operators(space: CompositeSpace, p: SystemParams) -> OperatorSet:
    n = space.n_fock
    a = ladder(n)
    a_dag = a.conj().T.copy()
    plus, minus = displacement_phases(n, p.eta)

    h_cm = space.lift(np.eye(N_ELECTRONIC), p.angular("omega") * (a_dag @ a))
    h_el = space.lift(p.angular("delta") * (electronic_unit(0, 0) + electronic_unit(1, 1)))
    raising = 0.5 * p.angular("g1") * space.lift(electronic_unit(2, 0), plus)
    raising = raising + 0.5 * p.angular("g2") * space.lift(electronic_unit(2, 1), minus)
    h_int = raising + raising.conj().T
    h_total = h_cm + h_el + h_int
    p3 = space.lift(electronic_unit(2, 2))
    h_eff = h_total - 0.5j * p.angular("gamma") * p3

    jumps = tuple(
        space.lift(electronic_unit(j, 2), disp) for j in (0, 1) for disp in (plus, minus)
    )
    rate = p.angular("gamma") / 4.0
    return OperatorSet(
        space=space,
        params=p,
        a=_frozen(a),
        a_dag=_frozen(a_dag),
        exp_plus=_frozen(plus),
        exp_minus=_frozen(minus),
        h_cm=_frozen(h_cm),
        h_el=_frozen(h_el),
        h_int=_frozen(h_int),
        h_total=_frozen(h_total),
        h_eff=_frozen(h_eff),
        lindblad_ops=tuple(_frozen(j) for j in jumps),
        lindblad_rates=(rate,) * 4,
    )


def build_hamiltonian(space: CompositeSpace, p: SystemParams) -> np.ndarray:
    return build_operators(space, p).h_total


def build_effective_hamiltonian(space: CompositeSpace, p: SystemParams) -> np.ndarray:
    return build_operators(space, p).h_eff


def apply_dissipator(ops: OperatorSet, rho) -> np.ndarray:
    """Spontaneous-emission dissipator ``sum_k r_k (L rho L^+ - {L^+ L, rho}/2)``."""
    r = np.asarray(rho, dtype=complex)
    if r.shape != (ops.space.total_dim,) * 2:
        raise DimensionError(
            f"density matrix shape {r.shape} does not match dimension {ops.space.total_dim}"
        )
    out = np.zeros_like(r)
    for rate, op in zip(ops.lindblad_rates, ops.lindblad_ops):
        if rate == 0.0:
            continue
        op_dag = op.conj().T
        loss = op_dag @ op
        out += rate * (op @ r @ op_dag - 0.5 * (loss @ r + r @ loss))
    return out


def liouvillian(ops: OperatorSet) -> np.ndarray:
    """Full superoperator of the master equation, row-major vectorisation.

    Size ``(3 n_fock)^2`` squared; only sensible for small truncations.
    """
    h = ops.h_total
    eye = np.eye(h.shape[0])
    sup = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for rate, op in zip(ops.lindblad_rates, ops.lindblad_ops):
        if rate == 0.0:
            continue
        loss = op.conj().T @ op
        sup += rate * (np.kron(op, op.conj()) - 0.5 * np.kron(loss, eye) - 0.5 * np.kron(eye, loss.T))
    return sup


def master_rhs(ops: OperatorSet, rho: np.ndarray) -> np.ndarray:
    """Right-hand side ``-i[H, rho] + L rho`` of the master equation."""
    h = ops.h_total
    return -1j * (h @ rho - rho @ h) + apply_dissipator(ops, rho)


@dataclass(frozen=True)
class DressedBasis:
    phi1: np.ndarray
    phi2: np.ndarray
    phi3: np.ndarray
    eps1: float
    eps2: float
    eps3: float
    eps_ac: float

    @property
    def vectors(self) -> np.ndarray:
        """Columns phi1, phi2, phi3."""
        return np.column_stack([self.phi1, self.phi2, self.phi3])

    @property
    def energies(self) -> np.ndarray:
        return np.array([self.eps1, self.eps2, self.eps3])

    def state(self, i: int) -> np.ndarray:
        """Dressed state ``phi_i`` with the 1-based label used in the physics."""
        return (self.phi1, self.phi2, self.phi3)[i - 1]


def electronic_hamiltonian(p: SystemParams, with_width: bool = False) -> np.ndarray:
    """3x3 ``H_el + H_int`` at eta=0 in units of 2*pi*MHz.

    With ``with_width`` the excited level carries ``-i Gamma/2``.
    """
    m = np.array(
        [
            [p.delta, 0.0, 0.5 * p.g1],
            [0.0, p.delta, 0.5 * p.g2],
            [0.5 * p.g1, 0.5 * p.g2, 0.0],
        ],
        dtype=complex,
    )
    if with_width:
        m[2, 2] = -0.5j * p.gamma
    return m


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so that its largest-magnitude component is real and positive."""
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def dressed_states(p: SystemParams) -> DressedBasis:
    """Eigenstates of the eta=0 electronic Hamiltonian.

    Labels follow the energies ``eps1 = Delta + eps_ac > eps2 = Delta >
    eps3 = -eps_ac``.  For g1 >> g2 this puts the main weight of ``phi_i`` on
    ``|i>``, and ``phi2`` is the dark state.
    """
    eps_ac = ac_stark(p)
    if p.g1 == 0.0 and p.g2 == 0.0:
        if p.delta == 0.0:
            raise LabelingAmbiguityError("all three levels are degenerate (Delta = g1 = g2 = 0)")
        basis = np.eye(N_ELECTRONIC, dtype=complex)
        return DressedBasis(*basis.T, p.delta, p.delta, 0.0, 0.0)
    if np.isclose(p.g1, p.g2, rtol=1e-12, atol=0.0):
        raise LabelingAmbiguityError(
            "g1 == g2: ground-state weights of the dressed states tie, labels are ambiguous"
        )
    dec = hermitian_eig(electronic_hamiltonian(p))
    order = [2, 1, 0]
    vecs = [fix_phase(dec.eigenvectors[:, k]) for k in order]
    vals = dec.eigenvalues[order]
    # closed-form values; the eigensolver only supplies the vectors
    eps = (p.delta + eps_ac, p.delta, -eps_ac)
    if np.max(np.abs(vals - np.array(eps))) > 1e-9 * max(1.0, abs(p.delta)):
        raise LabelingAmbiguityError("dressed eigenvalues do not match the closed forms")
    return DressedBasis(vecs[0], vecs[1], vecs[2], *eps, eps_ac)


def ac_stark(p: SystemParams) -> float:
    """``(sqrt(Delta^2 + g1^2 + g2^2) - Delta) / 2`` in units of 2*pi*MHz."""
    g_sq = p.g1**2 + p.g2**2
    root = np.hypot(p.delta, np.sqrt(g_sq))
    if p.delta > 0:
        # cancellation-free form of root - Delta
        return 0.5 * g_sq / (root + p.delta)
    return 0.5 * (root - p.delta)


def ac_stark_approx(p: SystemParams) -> float:
    """Weak-coupling approximation ``(g1^2 + g2^2) / (4 Delta)``."""
    return (p.g1**2 + p.g2**2) / (4.0 * p.delta)


def resonance_ratio(p: SystemParams) -> float:
    """``eps_ac / omega``; the level crossing sits at 1."""
    return ac_stark(p) / p.omega


def near_resonance(p: SystemParams, tol: float = 0.05) -> bool:
    return abs(resonance_ratio(p) - 1.0) < tol


def scale_for_ratio(p: SystemParams, ratio: float) -> float:
    """Joint factor on (g1, g2) that puts ``eps_ac / omega`` at ``ratio``."""
    g_sq = p.g1**2 + p.g2**2
    if g_sq == 0.0:
        raise ParameterError("cannot tune the ac-Stark shift with g1 = g2 = 0")
    if ratio < 0:
        raise ParameterError(f"ac-Stark ratio must be >= 0, got {ratio}")
    target = ratio * p.omega
    needed = (2.0 * target + p.delta) ** 2 - p.delta**2
    if needed < 0:
        raise ParameterError(f"ratio {ratio} is unreachable for Delta = {p.delta}")
    return float(np.sqrt(needed / g_sq))


def params_at_ratio(p: SystemParams, ratio: float) -> SystemParams:
    return p.scaled(scale_for_ratio(p, ratio))
