import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from qme.liouville import LindbladChannel

settings.register_profile("qme", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("qme")

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=2, max_value=5)


def random_matrix(rng, d, m=None):
    m = d if m is None else m
    return rng.normal(size=(d, m)) + 1j * rng.normal(size=(d, m))


def random_hermitian(rng, d, scale=1.0):
    a = random_matrix(rng, d)
    return scale * 0.5 * (a + a.conj().T)


def random_unitary(rng, d):
    q, r = np.linalg.qr(random_matrix(rng, d))
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(rng, d, rank=None):
    a = random_matrix(rng, d, rank or d)
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_channels(rng, d, k=None):
    k = rng.integers(1, 4) if k is None else k
    return [LindbladChannel(random_matrix(rng, d) / np.sqrt(d), rng.uniform(0.05, 1.0)) for _ in range(k)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record and print one PASS/FAIL line for an acceptance criterion, then assert it."""
    def report(number, title, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2} ({title}): {detail}"
        request.config.stash[ACCEPTANCE_KEY].append((number, line))
        print(line)
        assert passed, line
    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
