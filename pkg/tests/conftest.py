import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from tmonline.data import bundled_dataset_path, load_dataset, partition_blocks  # noqa: E402


@pytest.fixture(scope="session")
def iris():
    ds, _ = load_dataset(bundled_dataset_path())
    return ds


@pytest.fixture(scope="session")
def iris_blocks(iris):
    return partition_blocks(iris, 30)


@pytest.fixture
def xor_data():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.uint8)
    y = np.array([0, 1, 1, 0])
    return X, y


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, passed, detail in mod.RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {cid}: {detail}")
