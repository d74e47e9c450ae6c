"""Shared fixtures: small systems for unit tests, paper-scale for acceptance."""
from __future__ import annotations

import numpy as np
import pytest

from drivenbilliard.pipeline import build_law_setup, build_system, make_law

UNIT_KMAX = 25.0
PAPER_KMAX = 40.0


@pytest.fixture(scope="session")
def system_small():
    return build_system(UNIT_KMAX)


@pytest.fixture(scope="session")
def system_paper():
    return build_system(PAPER_KMAX)


@pytest.fixture(scope="session")
def ratio_small(system_small):
    return build_law_setup(system_small, make_law("ratio"), n_keep=12)


@pytest.fixture(scope="session")
def volume_small(system_small):
    return build_law_setup(system_small, make_law("volume"), n_keep=12)


@pytest.fixture(scope="session")
def breathing_small(system_small):
    return build_law_setup(system_small, make_law("breathing"), n_keep=12)


@pytest.fixture(scope="session")
def ratio_paper(system_paper):
    return build_law_setup(system_paper, make_law("ratio"), n_keep=16)


@pytest.fixture(scope="session")
def breathing_paper(system_paper):
    return build_law_setup(system_paper, make_law("breathing"), n_keep=16)


@pytest.fixture(scope="session")
def volume_paper(system_paper):
    return build_law_setup(system_paper, make_law("volume"), n_keep=16)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)
