import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_unitary
from eit_entangle.errors import (
    AmbiguousKernelError,
    HermiticityError,
    NoKernelError,
    NonFiniteError,
    NotSquareError,
)
from eit_entangle.model import displacement_phases
from eit_entangle.numerics import general_eig, hermitian_eig, matrix_exp, null_space_solve


def random_hermitian(rng, n):
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (x + x.conj().T)


def test_hermitian_eig_diagonal():
    dec = hermitian_eig(np.diag([1.0, -1.0]))
    np.testing.assert_allclose(dec.eigenvalues, [-1, 1])
    assert dec.is_hermitian_path


def test_hermitian_eig_pauli_x():
    dec = hermitian_eig([[0, 1], [1, 0]])
    np.testing.assert_allclose(dec.eigenvalues, [-1, 1], atol=1e-15)
    v = dec.eigenvectors
    # eigenvectors (1, -1)/sqrt2 and (1, 1)/sqrt2 up to phase
    assert abs(abs(v[:, 0] @ np.array([1, -1]) / np.sqrt(2)) - 1) < 1e-12
    assert abs(abs(v[:, 1] @ np.array([1, 1]) / np.sqrt(2)) - 1) < 1e-12


def test_hermitian_eig_reconstruction(rng):
    m = random_hermitian(rng, 8)
    dec = hermitian_eig(m)
    err = np.linalg.norm(dec.reconstruct() - m) / np.linalg.norm(m)
    assert err < 1e-10
    assert np.all(np.diff(dec.eigenvalues) >= 0)
    v = dec.eigenvectors
    assert np.max(np.abs(v.conj().T @ v - np.eye(8))) < 1e-10


def test_hermitian_eig_rejects_bad_input():
    with pytest.raises(NotSquareError):
        hermitian_eig(np.ones((2, 3)))
    with pytest.raises(HermiticityError):
        hermitian_eig([[0, 1], [0, 0]])
    with pytest.raises(NonFiniteError):
        hermitian_eig([[np.nan, 0], [0, 1]])


def test_hermitian_eig_tolerance_boundary():
    m = np.diag([1.0, 2.0]).astype(complex)
    m[0, 1] = 5e-11  # below the 1e-10 gate
    hermitian_eig(m)
    m[0, 1] = 5e-10
    with pytest.raises(HermiticityError):
        hermitian_eig(m)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2**32 - 1))
def test_hermitian_eig_trace_and_unitary_invariance(n, seed):
    rng = np.random.default_rng(seed)
    m = random_hermitian(rng, n)
    w = hermitian_eig(m).eigenvalues
    assert abs(w.sum() - np.trace(m).real) < 1e-10 * max(1, np.abs(w).max())
    u = random_unitary(rng, n)
    w2 = hermitian_eig(u @ m @ u.conj().T, tol=1e-9).eigenvalues
    np.testing.assert_allclose(w2, w, atol=1e-10 * max(1, np.abs(w).max()))


def test_general_eig_triangular():
    m = np.array([[1, 2, 3], [0, 4j, 5], [0, 0, -2]], dtype=complex)
    w = general_eig(m).eigenvalues
    np.testing.assert_allclose(np.sort_complex(w), np.sort_complex(np.diag(m)), atol=1e-12)


def test_general_eig_matches_hermitian(rng):
    m = random_hermitian(rng, 7)
    a = np.sort(general_eig(m).eigenvalues.real)
    np.testing.assert_allclose(a, hermitian_eig(m).eigenvalues, atol=1e-9)


def test_general_eig_nilpotent():
    dec = general_eig([[0, 1], [0, 0]])
    np.testing.assert_allclose(dec.eigenvalues, [0, 0], atol=1e-12)
    assert not dec.is_hermitian_path


def test_general_eig_residuals(rng):
    m = rng.standard_normal((9, 9)) + 1j * rng.standard_normal((9, 9))
    dec = general_eig(m)
    norm = np.linalg.norm(m, 2)
    for lam, v in zip(dec.eigenvalues, dec.eigenvectors.T):
        assert np.linalg.norm(m @ v - lam * v) < 1e-9 * norm


def test_general_eig_non_square():
    with pytest.raises(NotSquareError):
        general_eig(np.ones((3, 2)))


def test_matrix_exp_basic():
    np.testing.assert_allclose(matrix_exp(np.zeros((3, 3))), np.eye(3))
    np.testing.assert_allclose(matrix_exp(np.diag([1j * np.pi, 0])), np.diag([-1, 1]), atol=1e-15)
    with pytest.raises(NotSquareError):
        matrix_exp(np.ones((2, 3)))


def test_matrix_exp_displacement_unitary_below_edge():
    plus, minus = displacement_phases(30, 0.1)
    prod = plus @ plus.conj().T
    assert np.max(np.abs(prod[:25, :25] - np.eye(25))) < 1e-8
    np.testing.assert_array_equal(minus, plus.conj().T)


def test_matrix_exp_against_eigendecomposition(rng):
    # normal matrix: exp via eigenvectors is an independent route
    h = random_hermitian(rng, 6) * 5
    dec = hermitian_eig(h)
    ref = (dec.eigenvectors * np.exp(-1j * dec.eigenvalues)) @ dec.eigenvectors.conj().T
    got = matrix_exp(-1j * h)
    assert np.linalg.norm(got - ref) / np.linalg.norm(ref) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.floats(0.1, 10.0), st.integers(0, 2**32 - 1))
def test_matrix_exp_inverse_and_determinant(n, scale, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a *= scale / np.linalg.norm(a, 2)
    e = matrix_exp(a)
    assert np.max(np.abs(e @ matrix_exp(-a) - np.eye(n))) < 1e-10
    det = np.linalg.det(e)
    assert abs(det - np.exp(np.trace(a))) < 1e-8 * abs(np.exp(np.trace(a)))


def _dephasing_liouvillian(gamma=0.7):
    z = np.diag([1.0, -1.0])
    eye = np.eye(2)
    # row-major vec: vec(A X B) = kron(A, B.T) vec(X)
    return gamma * (np.kron(z, z.T) - np.kron(eye, eye))


def test_null_space_dephasing_kernel_is_diagonal():
    sup = _dephasing_liouvillian()
    sol = null_space_solve(sup, unique=False)
    assert sol.residual < 1e-10 * np.linalg.norm(sup, 2)
    assert sol.basis.shape[1] == 2
    for col in sol.basis.T:
        m = col.reshape(2, 2)
        assert abs(m[0, 1]) < 1e-12 and abs(m[1, 0]) < 1e-12
    # the default insists on a unique stationary state
    with pytest.raises(AmbiguousKernelError):
        null_space_solve(sup)


def test_null_space_zero_matrix_ambiguous():
    with pytest.raises(AmbiguousKernelError):
        null_space_solve(np.zeros((4, 4)))


def test_null_space_invertible_has_no_kernel(rng):
    with pytest.raises(NoKernelError):
        null_space_solve(np.eye(9) + 0.1 * rng.standard_normal((9, 9)))


def test_null_space_amplitude_damping():
    # decay |1> -> |0>: unique stationary state |0><0|
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    eye = np.eye(2)
    loss = lower.conj().T @ lower
    sup = np.kron(lower, lower.conj()) - 0.5 * np.kron(loss, eye) - 0.5 * np.kron(eye, loss.T)
    sol = null_space_solve(sup)
    rho = sol.matrix / np.trace(sol.matrix)
    np.testing.assert_allclose(rho, np.diag([1, 0]), atol=1e-12)
    assert sol.separation > 1e3


def test_null_space_rejects_non_square_size():
    with pytest.raises(NotSquareError):
        null_space_solve(np.eye(5))
