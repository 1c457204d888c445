import numpy as np
import pytest

from driftbench.data import Dataset, synthesize_dataset


@pytest.fixture
def blobs():
    """Small, well separated 4-class dataset used across module tests."""
    return synthesize_dataset(4, 40, 5, 6.0, seed=11)


def make_dataset(features, labels, num_classes):
    features = np.asarray(features, dtype=float)
    return Dataset(np.arange(len(labels)), features, labels, num_classes)


_ACCEPTANCE = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
