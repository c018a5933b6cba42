"""Shared pytest fixtures for the test suite."""
from pathlib import Path

import numpy as np
import pytest

import test_helper  # noqa: F401  # Ensures repository root is on sys.path
from tapopf.case_model import load_case, to_internal
from tapopf.global_variables import CASES_PATH


@pytest.fixture(scope="session")
def cases_dir():
    return Path(CASES_PATH)


@pytest.fixture(scope="session")
def case2(cases_dir):
    return load_case(cases_dir / "case2.json")


@pytest.fixture(scope="session")
def case3_tap(cases_dir):
    return load_case(cases_dir / "case3_tap.json")


@pytest.fixture(scope="session")
def case9(cases_dir):
    return load_case(cases_dir / "case9.json")


@pytest.fixture(scope="session")
def model2(case2):
    return to_internal(case2)


@pytest.fixture(scope="session")
def model3(case3_tap):
    return to_internal(case3_tap)


@pytest.fixture(scope="session")
def model9(case9):
    return to_internal(case9)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
