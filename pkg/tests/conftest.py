import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_piecewise_path(rng, letters=(1, 2), n_pieces=8, jump_prob=0.3, scale=1.0):
    """Random path with linear pieces and jumps over the given letters."""
    from levysig.paths import from_increments

    A = len(letters)
    steps = []
    for k in range(n_pieces):
        prev_jump = bool(steps) and steps[-1][2]
        if 0 < k < n_pieces - 1 and not prev_jump and rng.uniform() < jump_prob:
            steps.append((0.0, rng.normal(size=A) * scale, True))
        else:
            steps.append((rng.uniform(0.05, 0.3), rng.normal(size=A) * scale, False))
    return from_increments(letters, steps)


def random_pure_jump_primary(rng, K=3, n_jumps=4, drift=-0.4):
    """Primary-process path with time, no Brownian part, linear compensator drift and jumps."""
    from levysig.paths import from_increments

    letters = tuple(range(-1, K + 1))
    steps = []
    for _ in range(n_jumps):
        dt = rng.uniform(0.05, 0.4)
        steps.append((dt, [dt, 0.0, drift * dt] + [0.0] * (K - 1), False))
        a = rng.normal(scale=0.8)
        steps.append((0.0, [0.0, 0.0] + [a**k for k in range(1, K + 1)], True))
    dt = rng.uniform(0.05, 0.4)
    steps.append((dt, [dt, 0.0, drift * dt] + [0.0] * (K - 1), False))
    return from_increments(letters, steps)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: dict = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(number, passed, detail)``."""

    def record(number: int, passed: bool, detail: str):
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
