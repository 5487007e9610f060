import sys
from pathlib import Path

import numpy as np
import pytest

from cbal.data import Dataset

TESTS = Path(__file__).parent
DATA = TESTS.parent / "data"
sys.path.insert(0, str(TESTS))


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def blobs():
    """Three well-separated 2-d Gaussian blobs, 20 rows each."""
    rng = np.random.default_rng(0)
    centers = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
    X = np.vstack([c + rng.normal(scale=0.7, size=(20, 2)) for c in centers])
    y = np.repeat(np.arange(3), 20)
    return Dataset(X, y, 3)


def write_csv(path, header, rows):
    path.write_text("\n".join([",".join(header)] + [",".join(map(str, r)) for r in rows]) + "\n")
    return path


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(acceptance.LINES):
            terminalreporter.write_line(line)
