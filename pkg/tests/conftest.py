import numpy as np
import pytest

from parkipipe.features import extract_features
from parkipipe.synthcohort import CohortSpec, generate

SMALL_COUNTS = {"tier1": {"PD": 30, "DD": 20, "HC": 20}, "complete": {"PD": 12, "DD": 12, "HC": 12}}


@pytest.fixture(scope="session")
def small_spec():
    return CohortSpec(counts=SMALL_COUNTS, seed=5)


@pytest.fixture(scope="session")
def small_cohort(small_spec):
    return generate(small_spec)


@pytest.fixture(scope="session")
def small_features(small_cohort):
    return extract_features(small_cohort)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def table_cohort():
    """Default cohort shape: 279/133/90 tier-1 plus 21/27/23 with every modality."""
    return generate(CohortSpec(seed=0))


@pytest.fixture(scope="session")
def table_features(table_cohort):
    return extract_features(table_cohort)


# --- acceptance verdicts ------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
