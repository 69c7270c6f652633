from pathlib import Path

import numpy as np
import pytest

from hyperideal import geometry
from hyperideal.triangulation import parse

DATA = Path(__file__).resolve().parent.parent / "data"


def load(name, check=True):
    return parse((DATA / name).read_text(), check=check)


def interior_points(n, seed=0, lo=0.05, hi=4.0, margin=1e-3):
    """Rejection-sample n nondegenerate 6-vectors with every |phi| < 1 - margin."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        batch = rng.uniform(lo, hi, size=(4 * n, 6))
        ph = geometry.phi_all(batch)
        out.extend(batch[np.all(np.abs(ph) < 1 - margin, axis=-1)])
    return np.array(out[:n])


def omega_points(n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        batch = rng.uniform(0.05, 4.0, size=(20 * n, 6))
        codes = geometry.classify_many(batch, tol=1e-6)
        out.extend(batch[(codes >= 1) & (codes <= 3)])
    return np.array(out[:n])


@pytest.fixture(scope="session")
def degree12():
    return load("degree12.inc")


@pytest.fixture(scope="session")
def degree12_glued():
    return load("degree12.tri")


@pytest.fixture(scope="session")
def single_tet():
    return load("single_tet.inc")


@pytest.fixture(scope="session")
def three_tet():
    return load("three_tet.inc")


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.summary_line(number))
