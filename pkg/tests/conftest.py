import numpy as np
import pytest

from nepv.problems import GpeParams, KohnShamParams, gpe, kohn_sham
from nepv.scf import ScfOptions, certify, scf_iterate

ACCEPTANCE_LINES: list[str] = []


def solve_and_certify(problem, sigma=0.0, tol=1e-13, seed=0, max_iter=50_000):
    hist = scf_iterate(problem, problem.start(seed), ScfOptions(tol_residual=tol, sigma=sigma, max_iter=max_iter))
    assert hist.converged, hist.status
    return certify(problem, hist.V, cert_tol=10 * tol)


@pytest.fixture(scope="session")
def ks085():
    p = kohn_sham(KohnShamParams(10, 2, 0.85))
    return p, solve_and_certify(p)


@pytest.fixture(scope="session")
def ks1():
    p = kohn_sham(KohnShamParams(10, 2, 1.0))
    return p, solve_and_certify(p, sigma=p.apriori_sigma)


@pytest.fixture(scope="session")
def gpe_small():
    """N=4 GPE (n=16): cheap complex benchmark for property tests."""
    p = gpe(GpeParams(N=4, beta=2.0))
    return p, solve_and_certify(p)


@pytest.fixture(scope="session")
def gpe_radial():
    p = gpe(GpeParams(N=10, ell=1.0, omega=0.85, beta=3.5, potential="radial"))
    return p, solve_and_certify(p)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
