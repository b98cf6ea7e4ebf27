"""Fixed-step integrators for the spontaneous-emission master equation.

The generator splits as ``L rho = A rho + J(rho)`` with the stiff linear part
``A rho = -i (H_eff rho - rho H_eff^dagger)`` and the gain (jump) term
``J(rho) = sum_k r_k L_k rho L_k^dagger``.  Every jump operator maps the
excited level down, so ``J`` only reads the ``|3><3|`` block of ``rho``.

Two schemes treat ``A`` exactly:

* ``ETDStepper`` -- exponential time differencing RK4 (Cox and Matthews)
  carried out in the eigenbasis of ``H_eff``, where ``A`` is diagonal.
* ``LawsonStepper`` -- integrating-factor RK4 with ``expm(-i H_eff h)``;
  used when the eigenvector matrix of ``H_eff`` is badly conditioned.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import StepSizeError
from .model import OperatorSet
from .numerics import hermitian_eig, matrix_exp

ETD_STEP = 2.5  # h * ||H|| bound for ETDRK4
LAWSON_STEP = 0.6  # h * ||H|| bound for Lawson RK4
GAIN_STEP = 0.5  # h * Gamma bound; the jump term is treated explicitly
COND_LIMIT = 1e4
CONTOUR_POINTS = 32


def phi_functions(z: np.ndarray):
    """``phi_1, phi_2, phi_3`` of ``z`` elementwise.

    Uses the mean over a unit circle around each ``z`` so that small
    arguments suffer no cancellation.
    """
    m = CONTOUR_POINTS
    r = np.exp(2j * np.pi * (np.arange(1, m + 1) - 0.5) / m)
    zz = z[..., None] + r
    ez = np.exp(zz)
    p1 = ((ez - 1.0) / zz).mean(-1)
    p2 = ((ez - 1.0 - zz) / zz**2).mean(-1)
    p3 = ((ez - 1.0 - zz - 0.5 * zz**2) / zz**3).mean(-1)
    return p1, p2, p3


class _JumpTerm:
    """Gain term ``J`` specialised to jump operators ``|j><3| (x) D``."""

    def __init__(self, ops: OperatorSet):
        n = ops.space.n_fock
        self.n = n
        self.terms = []
        for rate, op in zip(ops.lindblad_rates, ops.lindblad_ops):
            if rate == 0.0:
                continue
            blocks = op.reshape(3, n, 3, n)
            # op = |j><3| (x) D ; find j and D
            j = int(np.argmax([np.abs(blocks[e, :, 2, :]).max() for e in range(3)]))
            self.terms.append((rate, j, np.ascontiguousarray(blocks[j, :, 2, :])))
        self.active = bool(self.terms)

    def block_gain(self, rho33: np.ndarray) -> dict[int, np.ndarray]:
        """Contributions to the ``(j, j)`` blocks from the excited block ``rho33``."""
        out: dict[int, np.ndarray] = {}
        for rate, j, d in self.terms:
            g = rate * (d @ rho33 @ d.conj().T)
            out[j] = out[j] + g if j in out else g
        return out

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        n = self.n
        out = np.zeros_like(rho)
        if not self.active:
            return out
        for j, g in self.block_gain(rho[2 * n :, 2 * n :]).items():
            out[j * n : (j + 1) * n, j * n : (j + 1) * n] += g
        return out


def step_limit(ops: OperatorSet, scheme: str) -> float:
    """Largest admissible step in us for ``scheme``.

    Besides the Hamiltonian bound, strong decay caps the step: with
    Gamma*h near 1 the explicit gain term leaks about 1e-8 of trace during
    the initial transient.
    """
    bound = {"etd": ETD_STEP, "lawson": LAWSON_STEP}[scheme]
    h = bound / ops.hamiltonian_norm
    if ops.gamma > 0:
        h = min(h, GAIN_STEP / ops.gamma)
    return h


def substeps(interval: float, h_max: float) -> tuple[int, float]:
    """Split ``interval`` into the fewest equal steps not longer than ``h_max``."""
    k = max(1, math.ceil(interval / h_max - 1e-12))
    return k, interval / k


class ETDStepper:
    """ETDRK4 for ``u' = C o u + N(u)`` with ``rho = V u V^dagger``."""

    scheme = "etd"

    def __init__(self, ops: OperatorSet, h: float):
        if h <= 0:
            raise StepSizeError(f"step must be positive, got {h}")
        self.ops, self.h = ops, h
        self.jump = _JumpTerm(ops)
        a = np.asarray(ops.h_eff)
        if not self.jump.active and ops.gamma == 0.0:
            dec = hermitian_eig(ops.h_total)
            lam, v = dec.eigenvalues.astype(complex), dec.eigenvectors
            vi = v.conj().T
            self.cond = 1.0
        else:
            lam, v = np.linalg.eig(a)
            self.cond = float(np.linalg.cond(v))
            vi = np.linalg.inv(v)
        self.v, self.vi = v, vi
        n = ops.space.n_fock
        self.v3 = v[2 * n :, :]
        self.w = vi[:, : 2 * n]
        c = -1j * (lam[:, None] - lam.conj()[None, :])
        z = c * h
        self.e = np.exp(z)
        self.e2 = np.exp(0.5 * z)
        p1h, _, _ = phi_functions(0.5 * z)
        self.q = 0.5 * h * p1h
        p1, p2, p3 = phi_functions(z)
        self.f1 = h * (p1 - 3 * p2 + 4 * p3)
        self.f2 = h * (2 * p2 - 4 * p3)
        self.f3 = h * (-p2 + 4 * p3)

    def to_internal(self, rho: np.ndarray) -> np.ndarray:
        return self.vi @ rho @ self.vi.conj().T

    def from_internal(self, u: np.ndarray) -> np.ndarray:
        rho = self.v @ u @ self.v.conj().T
        return 0.5 * (rho + rho.conj().T)

    def _gain(self, u: np.ndarray) -> np.ndarray:
        if not self.jump.active:
            return np.zeros_like(u)
        n = self.jump.n
        rho33 = self.v3 @ u @ self.v3.conj().T
        out = np.zeros_like(u)
        for j, g in self.jump.block_gain(rho33).items():
            wj = self.w[:, j * n : (j + 1) * n]
            out += wj @ g @ wj.conj().T
        return out

    def step(self, u: np.ndarray) -> np.ndarray:
        nu = self._gain(u)
        a = self.e2 * u + self.q * nu
        na = self._gain(a)
        b = self.e2 * u + self.q * na
        nb = self._gain(b)
        c = self.e2 * a + self.q * (2 * nb - nu)
        nc = self._gain(c)
        u = self.e * u + self.f1 * nu + self.f2 * (na + nb) + self.f3 * nc
        return 0.5 * (u + u.conj().T)


class LawsonStepper:
    """Integrating-factor RK4 in the original basis."""

    scheme = "lawson"

    def __init__(self, ops: OperatorSet, h: float):
        if h <= 0:
            raise StepSizeError(f"step must be positive, got {h}")
        self.ops, self.h = ops, h
        self.jump = _JumpTerm(ops)
        self.p = matrix_exp(-1j * h * np.asarray(ops.h_eff))
        self.ph = matrix_exp(-0.5j * h * np.asarray(ops.h_eff))

    def to_internal(self, rho):
        return np.array(rho, dtype=complex)

    def from_internal(self, u):
        return 0.5 * (u + u.conj().T)

    def _full(self, x):
        return self.p @ x @ self.p.conj().T

    def _half(self, x):
        return self.ph @ x @ self.ph.conj().T

    def step(self, rho: np.ndarray) -> np.ndarray:
        h, j = self.h, self.jump
        k1 = j(rho)
        k2 = j(self._half(rho + 0.5 * h * k1))
        k3 = j(self._half(rho) + 0.5 * h * k2)
        k4 = j(self._full(rho) + h * self._half(k3))
        out = self._full(rho + h / 6 * k1) + h / 3 * self._half(k2 + k3) + h / 6 * k4
        return 0.5 * (out + out.conj().T)


def make_stepper(ops: OperatorSet, h: float | None = None, scheme: str = "auto", interval: float | None = None):
    """Build a stepper obeying the step rule of its scheme.

    ``h`` is an explicit step (error if it breaks the rule); otherwise the
    step is derived from ``interval`` (the record spacing) by equal splitting.
    ``scheme='auto'`` prefers ETDRK4 and falls back to Lawson when the
    eigenvector matrix of ``H_eff`` has condition number above 1e4.
    """
    if scheme not in ("auto", "etd", "lawson"):
        raise StepSizeError(f"unknown integration scheme {scheme!r}")

    def pick_h(kind):
        limit = step_limit(ops, kind)
        if h is not None:
            if h > limit * (1 + 1e-12):
                raise StepSizeError(
                    f"step {h:.4g} us exceeds the {kind} stability rule h <= {limit:.4g} us"
                )
            return h
        if interval is None:
            return limit
        return substeps(interval, limit)[1]

    if scheme in ("auto", "etd"):
        st = ETDStepper(ops, pick_h("etd"))
        if scheme == "etd" or st.cond <= COND_LIMIT:
            return st
    return LawsonStepper(ops, pick_h("lawson"))
