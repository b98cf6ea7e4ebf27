import numpy as np
import pytest

from eit_entangle.model import SystemParams, build_operators, build_space
from eit_entangle.spectral import find_avoided_crossing


@pytest.fixture(scope="session")
def ref_params():
    return SystemParams()


@pytest.fixture(scope="session")
def ops28(ref_params):
    return build_operators(build_space(28), ref_params)


@pytest.fixture(scope="session")
def crossing3(ref_params):
    return find_avoided_crossing(ref_params, 3, 28)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_density(rng, dim, rank=None):
    rank = rank or dim
    x = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


def random_pure(rng, dim):
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_unitary(rng, dim):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


# acceptance verdicts, filled in by test_acceptance and echoed at the end of the run
VERDICTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[k])
