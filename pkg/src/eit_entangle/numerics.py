"""Dense complex linear algebra used by the physics modules.

Matrices are plain two-dimensional ``numpy`` arrays of ``complex128``.  The
functions here validate their inputs and enforce the accuracy contracts the
rest of the package relies on; the heavy lifting is delegated to LAPACK
through numpy/scipy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    AmbiguousKernelError,
    ConvergenceError,
    HermiticityError,
    NoKernelError,
    NonFiniteError,
    NotSquareError,
)

HERMITIAN_TOL = 1e-10
KERNEL_TOL = 1e-10
KERNEL_SEPARATION = 1e3
EIG_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    is_hermitian_path: bool

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        if self.is_hermitian_path:
            return (v * self.eigenvalues) @ v.conj().T
        return (v * self.eigenvalues) @ np.linalg.inv(v)


def as_matrix(m, square: bool = True) -> np.ndarray:
    """Return ``m`` as a finite complex 2-D array, optionally checking squareness."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise NotSquareError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise NotSquareError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("matrix contains NaN or Inf entries")
    return a


def hermiticity_defect(m: np.ndarray) -> float:
    """Largest entry of ``|m - m^dagger|``."""
    return float(np.max(np.abs(m - m.conj().T)))


def hermitian_eig(m, tol: float = HERMITIAN_TOL) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix.

    Eigenvalues are real and ascending; eigenvectors are orthonormal columns.
    Raises ``HermiticityError`` if ``max|m - m^dagger|`` exceeds ``tol``.
    """
    a = as_matrix(m)
    defect = hermiticity_defect(a)
    if defect > tol:
        raise HermiticityError(f"Hermiticity defect {defect:.3e} exceeds {tol:.1e}")
    a = 0.5 * (a + a.conj().T)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"Hermitian eigensolver failed: {exc}") from exc
    return EigenDecomposition(w, v, True)


def hermitian_eigvals(m, tol: float = HERMITIAN_TOL) -> np.ndarray:
    a = as_matrix(m)
    defect = hermiticity_defect(a)
    if defect > tol:
        raise HermiticityError(f"Hermiticity defect {defect:.3e} exceeds {tol:.1e}")
    try:
        return np.linalg.eigvalsh(0.5 * (a + a.conj().T))
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"Hermitian eigensolver failed: {exc}") from exc


def general_eig(m, residual_tol: float = EIG_RESIDUAL_TOL) -> EigenDecomposition:
    """Eigenpairs of a general square matrix.

    Every pair is checked for ``||m v - lambda v|| < residual_tol * ||m||``
    (2-norms); a violation is reported as ``ConvergenceError``.
    """
    a = as_matrix(m)
    try:
        w, v = scipy.linalg.eig(a)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"general eigensolver failed: {exc}") from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
        raise ConvergenceError("general eigensolver returned non-finite values")
    scale = np.linalg.norm(a, 2)
    res = np.linalg.norm(a @ v - v * w, axis=0) / np.linalg.norm(v, axis=0)
    worst = float(np.max(res)) if res.size else 0.0
    if worst > residual_tol * max(scale, np.finfo(float).tiny):
        raise ConvergenceError(f"eigenpair residual {worst:.3e} exceeds {residual_tol:.0e}*||m||")
    return EigenDecomposition(w, v, False)


def matrix_exp(m) -> np.ndarray:
    """Matrix exponential (Pade scaling-and-squaring)."""
    return scipy.linalg.expm(as_matrix(m))


@dataclass(frozen=True)
class KernelSolution:
    matrix: np.ndarray
    singular_values: np.ndarray  # descending
    residual: float
    basis: np.ndarray  # columns spanning the numerical kernel

    @property
    def separation(self) -> float:
        s = self.singular_values
        if s.size < 2 or s[-1] == 0.0:
            return np.inf
        return float(s[-2] / s[-1])


def null_space_solve(
    superop,
    tol: float = KERNEL_TOL,
    separation: float = KERNEL_SEPARATION,
    unique: bool = True,
) -> KernelSolution:
    """Kernel vector of a square superoperator, reshaped to a square matrix.

    The vector belongs to the smallest singular value.  It counts as a kernel
    vector only if that value lies below ``tol`` times the largest one.  With
    ``unique=True`` the kernel must also be one-dimensional, i.e. separated
    from the next singular value by at least ``separation``.  The vector is
    reshaped row-major, matching ``vec(X) = X.reshape(-1)``.
    """
    a = as_matrix(superop)
    dim = int(round(np.sqrt(a.shape[0])))
    if dim * dim != a.shape[0]:
        raise NotSquareError(f"superoperator size {a.shape[0]} is not a perfect square")
    try:
        _, s, vh = np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"SVD failed: {exc}") from exc
    threshold = tol * s[0]
    in_kernel = s <= threshold
    n_kernel = int(np.count_nonzero(in_kernel))
    if n_kernel == 0:
        raise NoKernelError(
            f"smallest singular value {s[-1]:.3e} above threshold {threshold:.3e}"
        )
    if unique and (n_kernel > 1 or s[-2] < separation * s[-1]):
        raise AmbiguousKernelError(
            f"kernel not isolated: {n_kernel} singular values below {threshold:.3e}, "
            f"next-to-smallest {s[-2]:.3e}"
        )
    v = vh[-1].conj()
    residual = float(np.linalg.norm(a @ v))
    basis = vh[in_kernel].conj().T
    return KernelSolution(v.reshape(dim, dim), s, residual, basis)
