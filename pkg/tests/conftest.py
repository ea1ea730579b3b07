import numpy as np
import pytest

from privmask import StateSpaceModel

# criterion id -> (passed, detail); filled by test_acceptance
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


def random_stable_model(rng, m=None, max_radius=0.9, sigma_range=(0.01, 1.0), pd_w=True):
    m = int(rng.integers(1, 4)) if m is None else m
    A = rng.standard_normal((m, m))
    rho = max(np.max(np.abs(np.linalg.eigvals(A))), 1e-12)
    A *= rng.uniform(0.05, max_radius) / rho
    C = rng.standard_normal(m)
    B = rng.standard_normal((m, m))
    W = B @ B.T + (0.05 * np.eye(m) if pd_w else 0.0)
    sv = rng.uniform(*sigma_range)
    return StateSpaceModel(A, C, W, sv)


@pytest.fixture
def m0():
    """White model: A = 0, C W C^T = 2, sigma_v^2 = 0.5."""
    return StateSpaceModel([[0.0]], [1.0], [[2.0]], 0.5)


@pytest.fixture
def m1():
    return StateSpaceModel.scalar(0.5, 1.0, 0.75, 0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE_RESULTS, key=lambda c: int(c.split()[0])):
        ok, detail = ACCEPTANCE_RESULTS[cid]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {cid}: {detail}")
