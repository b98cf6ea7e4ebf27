"""Negativity and Schmidt decomposition for the electronic x vibrational split."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, StateError
from .model import N_ELECTRONIC
from .numerics import hermitian_eigvals

CLIP = 1e-10
NORM_TOL = 1e-6


def _split(dim: int, electronic_dim: int) -> int:
    if dim % electronic_dim:
        raise DimensionError(f"dimension {dim} is not divisible by {electronic_dim}")
    return dim // electronic_dim


def partial_transpose(rho, electronic_dim: int = N_ELECTRONIC) -> np.ndarray:
    """Transpose over the electronic factor (electronic-major ordering)."""
    r = np.asarray(rho)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {r.shape}")
    d = r.shape[0]
    nf = _split(d, electronic_dim)
    blocks = r.reshape(electronic_dim, nf, electronic_dim, nf)
    return blocks.transpose(2, 1, 0, 3).reshape(d, d)


def negativity(rho, electronic_dim: int = N_ELECTRONIC) -> float:
    """Sum of the negative eigenvalues of the partial transpose, in magnitude.

    For unit trace this is ``(||rho^T||_1 - 1) / 2``.  Eigenvalues in
    ``[-1e-10, 0)`` are treated as rounding noise.
    """
    lam = hermitian_eigvals(partial_transpose(rho, electronic_dim), tol=1e-8)
    neg = lam[lam < -CLIP]
    return float(-neg.sum())


@dataclass(frozen=True)
class SchmidtDecomposition:
    coefficients: np.ndarray  # descending, length min(3, n_fock)
    electronic: np.ndarray  # columns
    vibrational: np.ndarray  # columns

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.coefficients > 1e-12))

    def negativity(self) -> float:
        s = self.coefficients.sum()
        return float(max(0.0, 0.5 * (s * s - 1.0)))


def schmidt(psi, electronic_dim: int = N_ELECTRONIC, check_norm: bool = True) -> SchmidtDecomposition:
    v = np.asarray(psi, dtype=complex).ravel()
    nf = _split(v.size, electronic_dim)
    if check_norm:
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > NORM_TOL:
            raise StateError(f"state norm {norm:.9f} deviates from 1 by more than {NORM_TOL}")
    u, s, vh = np.linalg.svd(v.reshape(electronic_dim, nf), full_matrices=False)
    return SchmidtDecomposition(s, u, vh.T)


def negativity_pure(psi, electronic_dim: int = N_ELECTRONIC) -> float:
    """Pure-state negativity ``((sum alpha_i)^2 - 1) / 2``."""
    return schmidt(psi, electronic_dim).negativity()
