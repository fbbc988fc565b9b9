import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from coxian import CoxianParams, Generator, build_generator  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


# Three-phase generator whose six diagonal orderings are all Markovian.
TABLE_DIAG = (-1.0018, -0.2138, -0.0259)
TABLE_SUPER = (1.0, 0.211)

# Two equal-likelihood fits of one three-phase model, as printed (3 decimals).
FIT_A_DIAG = (-0.571, -0.172, -0.091)
FIT_A_SUPER = (0.570, 0.029)
FIT_B_DIAG = (-0.172, -0.571, -0.091)
FIT_B_SUPER = (0.170, 0.096)

# Four-phase generator reported to have no other representation.
UNIQUE4_DIAG = (-1.0, -0.447, -0.446, -0.151)
UNIQUE4_SUPER = (0.965, 0.435, 0.120)

# Model used to simulate the 5000-observation dataset.
SIM_LAM = (0.55, 0.05)
SIM_MU = (0.003, 0.15, 0.1)


@pytest.fixture
def table_gen():
    return Generator(TABLE_DIAG, TABLE_SUPER)


@pytest.fixture
def fit_a():
    return Generator(FIT_A_DIAG, FIT_A_SUPER)


@pytest.fixture
def fit_b_printed():
    return Generator(FIT_B_DIAG, FIT_B_SUPER)


@pytest.fixture
def fit_b_exact():
    # b12 = a11 + a12 - V1 = 0.171; b23 from the unit row sum of the transform
    return Generator(FIT_B_DIAG, (0.171, 0.029 / 0.3))


@pytest.fixture
def unique4():
    return Generator(UNIQUE4_DIAG, UNIQUE4_SUPER)


@pytest.fixture
def sim_params():
    return CoxianParams(SIM_LAM, SIM_MU)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def gen_from(lam, mu):
    return build_generator(CoxianParams(lam, mu))


@pytest.fixture(scope="session")
def example1_run():
    """Simulated 5000-observation dataset and its 10-start three-phase fit."""
    import time

    from coxian import fit_mle, sample_dataset
    from coxian.fitter import FitOptions

    start = time.perf_counter()
    data = sample_dataset(CoxianParams(SIM_LAM, SIM_MU), 5000, seed=42)
    results = fit_mle(data, 3, FitOptions(n_starts=10, seed=42))
    return data, results, time.perf_counter() - start
