import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qswitch import cases

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = os.path.join(os.path.dirname(__file__), "..", "data")


@pytest.fixture
def fig_mdp():
    return cases.figure_mdp()


@pytest.fixture
def melo_case():
    return cases.melo_mdp(), cases.melo_features()


@pytest.fixture
def binary_case():
    return cases.binary_feature_mdp(), cases.binary_features()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def data_dir():
    return os.path.abspath(DATA)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
