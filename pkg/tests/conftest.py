"""Shared fixtures and hypothesis profile."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from maee.channel import Scenario, sample_channel
from maee.motor import MotorParams
from maee.problem import Problem

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=100,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

# verdict lines collected by the acceptance suite, echoed in the terminal summary
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):  # keys are (criterion number, part)
        for line in ACCEPTANCE[key]:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def motor():
    return MotorParams()


@pytest.fixture(scope="session")
def su_scenario():
    return Scenario(num_users=1)


@pytest.fixture(scope="session")
def mu_scenario():
    return Scenario()


def toy_scenario(num_paths: int = 3, num_users: int = 1, num_antennas: int = 2) -> Scenario:
    """Twenty-point grid: A = 20 steps, half-wavelength spacing of five steps."""
    step = MotorParams().step_size
    return Scenario(wavelength=0.012, array_length=20 * step, num_antennas=num_antennas,
                    num_users=num_users, num_paths=num_paths, d_min=0.006, d_th=0.006)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def build_problem(scenario, seed, motor=None):
    motor = motor or MotorParams()
    return Problem.build(scenario, motor, sample_channel(scenario, seed))
