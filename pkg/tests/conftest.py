import numpy as np
import pytest

from gencombo.model import Dataset


def make_blobs(n=200, num_classes=2, dim=2, scale=6.0, seed=0):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, num_classes, n)
    centers = scale * np.eye(num_classes, dim)
    return Dataset(centers[labels] + rng.standard_normal((n, dim)), labels, num_classes)


@pytest.fixture
def blobs():
    return make_blobs()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ----------------------------------------------------------

_acceptance = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): exit criterion reported in the terminal summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None and report.when == "call":
        _acceptance.append((marker.args[0], report.passed, report.duration))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, passed, duration in _acceptance:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  ({duration:.2f}s)")
