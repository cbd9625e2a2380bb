import os
from pathlib import Path

import numpy as np
import pytest

from graphmix import synthetic_graph
from graphmix.checks import toy_graph

# criterion id -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def data_dir():
    return Path(os.environ.get("GRAPHMIX_DATA", Path(__file__).resolve().parents[1] / "data"))


@pytest.fixture
def three_node():
    return synthetic_graph("three_node_example")


@pytest.fixture(scope="session")
def two_clusters():
    return synthetic_graph("two_clusters", seed=0)


@pytest.fixture
def toy():
    return toy_graph(0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split(".")[0].rstrip("abc")), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
