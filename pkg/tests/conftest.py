from __future__ import annotations

import math
import random
from fractions import Fraction

import pytest

from greedybeta.exactnum import GOLDEN, QuadExt, make_quadratic
from greedybeta.errors import GreedyBetaError
from greedybeta.system import SupportCase, make_system

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def golden():
    return make_system(GOLDEN, [0, 3, 4])


@pytest.fixture(scope="session")
def fig1():
    """The four systems of the support-case figure, in panel order."""
    return {
        "a": make_system(make_quadratic(0, 1, 3), [0, 1, 3]),
        "b": make_system(make_quadratic(1, 1, 2), [0, 1, 3]),
        "c": make_system(make_quadratic(0, 1, 7), [0, 3, 7]),
        "d": make_system(GOLDEN, [0, 3, 4]),
    }


BETA_BANDS = [(105, 140), (141, 161), (163, 199), (205, 295)]


def random_main_case(rng: random.Random, band=None):
    """An exact MainCase system with beta = p + q*sqrt(d) and rational digits."""
    while True:
        d = rng.choice([2, 3, 5, 7])
        q = Fraction(rng.randint(1, 40), rng.randint(1, 40)) * rng.choice([1, -1])
        lo_t, hi_t = band or rng.choice(BETA_BANDS)
        target = Fraction(rng.randint(lo_t, hi_t), 100)
        p = target - q * Fraction(round(math.sqrt(d) * 10**6), 10**6)
        beta = make_quadratic(Fraction(round(p * 1000), 1000), q, d)
        if not 1 < beta < 3:
            continue
        lo = beta - 1 if beta - 1 > 1 else QuadExt(1)
        hi = beta if beta < 2 else QuadExt(2)
        if not lo < hi:
            continue
        a1 = Fraction(rng.randint(1, 20), rng.randint(1, 5))
        for _ in range(20):
            r = Fraction(rng.randint(1, 999), 1000)
            a2 = Fraction(round(float((lo + (hi - lo) * r) * a1) * 1000), 1000)
            try:
                sysm = make_system(beta, [0, a1, a2])
            except GreedyBetaError:
                continue
            if sysm.support_case is SupportCase.MAIN_CASE:
                return sysm
