"""One test per acceptance criterion; each records a pass/fail line for the summary."""

from __future__ import annotations

import random
import time
from contextlib import contextmanager
from fractions import Fraction

import pytest

from greedybeta.density import acim, birkhoff_runs, parry_density, phi, transfer_apply, transfer_residual
from greedybeta.exactnum import GOLDEN, QuadExt, pow_int
from greedybeta.intervals import (
    check_kappa_bounds,
    count_levels,
    decompose_full_word,
    fib,
    image_end_of,
    kappa_table,
    tail_count_bound,
)
from greedybeta.system import SupportCase, classical_system, expand, make_system, orbit, verify_lemmas
from greedybeta.tower import build_tower, check_measure_preservation, tower_return_time

from . import conftest
from .conftest import random_main_case

G = GOLDEN


@contextmanager
def criterion(n: int, what: str):
    try:
        yield
    except BaseException as exc:
        line = f"[FAIL] criterion {n}: {what} ({type(exc).__name__}: {exc})"
        conftest.ACCEPTANCE_LINES.append(line)
        print(line)
        raise
    line = f"[PASS] criterion {n}: {what}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)


def test_criterion_01_golden_orbits(golden):
    with criterion(1, "golden orbits of 1 and 3*beta-4 match exactly"):
        t0 = time.perf_counter()
        a = orbit(golden, QuadExt(1), 50)
        assert list(a.values[:7]) == [1, G, G * G, pow_int(G, -3), pow_int(G, -2), 1 / G, 1]
        assert (a.preperiod, a.period) == (0, 6)
        b = orbit(golden, 3 * G - 4, 50)
        assert list(b.values[:4]) == [3 * G - 4, 3 - G, 2 * G - 1, 1 / G]
        assert b.values[4] == 1 and b.preperiod == 3
        assert time.perf_counter() - t0 < 1.0


def test_criterion_02_golden_bracket(golden):
    with criterion(2, "closed phi has exactly the ten golden indicator terms"):
        want = {
            (3 * G - 4, 1 / G),
            (3 - G, pow_int(G, -2)),
            (2 * G - 1, pow_int(G, -3)),
            (QuadExt(1), QuadExt(1)),
            (G, 1 / G),
            (G * G, pow_int(G, -2)),
            (pow_int(G, -3), pow_int(G, -3)),
            (pow_int(G, -2), pow_int(G, -4)),
            (1 / G, pow_int(G, -3)),
            (QuadExt(3), QuadExt(1)),
        }
        res = phi(golden, "closed")
        assert len(res.terms) == 10
        assert set(res.terms) == want


def test_criterion_03_golden_normalizer(golden):
    with criterion(3, "integral of phi = 58 - 31*beta = (27 - 4*beta)/beta^2, note attached"):
        total = phi(golden, "closed").fn.integral()
        assert total == 58 - 31 * G
        assert total == (27 - 4 * G) * pow_int(G, -2)
        h = acim(golden)
        assert any("58 - 31*beta" in n and "27 - 4*beta" in n for n in h.notes)


def test_criterion_04_transfer_fixed_point(fig1):
    with criterion(4, "transfer fixes acim: exact for 1(d), within 2x tail <= 1e-9 for 1(a)-(c)"):
        t0 = time.perf_counter()
        h = acim(fig1["d"], "closed")
        assert transfer_residual(fig1["d"], h) == 0
        assert transfer_apply(fig1["d"], h).same_function(h)
        assert time.perf_counter() - t0 < 10
        for key in "abc":
            t0 = time.perf_counter()
            s = fig1[key]
            h = acim(s, "truncated")
            assert h.tail_bound is not None and h.tail_bound <= QuadExt(Fraction(1, 10**9))
            assert transfer_residual(s, h) <= 2 * h.tail_bound
            assert time.perf_counter() - t0 < 10


def test_criterion_05_kappa_table(golden):
    with criterion(5, "golden kappa(n) follows the Fibonacci pattern for n <= 18"):
        rows = kappa_table(golden, 18)
        assert rows[0].kappa == 2
        for r in rows[1:]:
            assert r.kappa == fib((r.n - 1) // 3 + 2) + fib((r.n - 2) // 3 + 1)


def test_criterion_06_height_sum(golden):
    with criterion(6, "heights over [0,1) sum to 3; N = 30 truncation within kappa tail"):
        x = pow_int(G, -3)
        P = 1 / (1 - x - x * x)
        closed = 3 * pow_int(G, -1) * P + 3 * pow_int(G, -2) * x * P
        assert closed == 3
        rows, weights, trans = count_levels(golden, 30)
        slot = trans.index.index(QuadExt(1))
        part = sum((3 * w.get(slot, 0) * pow_int(G, -(k + 1)) for k, w in enumerate(weights)), QuadExt(0))
        gap = 3 - part
        assert gap >= 0
        assert gap <= rows[-1].kappa * 3 * pow_int(G, -30)
        assert gap <= golden.s * tail_count_bound(golden, 30, rows[-1].kappa)


def test_criterion_07_bounds_suite():
    with criterion(7, "kappa bounds and critical-orbit lemmas on 100 random main-case systems"):
        rng = random.Random(20240607)
        bands = conftest.BETA_BANDS
        lemma_runs = 0
        for k in range(100):
            s = random_main_case(rng, bands[k % len(bands)])
            assert s.support_case is SupportCase.MAIN_CASE
            rep = check_kappa_bounds(s, 15)
            assert rep.ok, (s.descriptor(), [c.__dict__ for c in rep.checks])
            checks = verify_lemmas(s)
            lemma_runs += len(checks)
            assert all(c.passed for c in checks), [c.__dict__ for c in checks]
        assert lemma_runs > 0


def test_criterion_08_support_classification(fig1):
    with criterion(8, "the four panel systems classify with supports 1, 2, 4, 3"):
        want = {
            "a": (SupportCase.ISO_CLASSICAL, 1),
            "b": (SupportCase.BIG_SECOND_GAP, 2),
            "c": (SupportCase.BIG_SECOND_GAP, 4),
            "d": (SupportCase.MAIN_CASE, 3),
        }
        for key, (case, s) in want.items():
            assert fig1[key].support_case is case
            assert fig1[key].s == s


def test_criterion_09_tower_conservation(golden):
    with criterion(9, "golden tower depth 12 conserves area and brackets 3(58 - 31*beta)"):
        tw = build_tower(golden, 12)
        rep = check_measure_preservation(tw, 11)
        assert rep.area_ok and rep.ok, rep.failures
        closed = 3 * (58 - 31 * G)
        assert tw.lambda_R_closed == closed
        assert tw.lambda_R_truncated <= closed <= tw.lambda_R_upper


def first_full_rank(sys, x):
    word = expand(sys, x, 200)
    t = sys.s
    for k, b in enumerate(word):
        t = image_end_of(sys, (b,), start=t)
        if t == sys.s:
            return decompose_full_word(sys, word[: k + 1]).ranks[0]
    raise AssertionError("no full prefix within 200 digits")


def test_criterion_10_return_times(golden):
    with criterion(10, "tower return time equals first full rank on 1000 points, y-independent"):
        tw = build_tower(golden, 12)
        rng = random.Random(10)
        den = 1000003
        for _ in range(1000):
            x = QuadExt(Fraction(rng.randrange(1, 3 * den), den))
            y = QuadExt(Fraction(rng.randrange(0, 3 * den), den))
            r, _ = tower_return_time(tw, x, y)
            assert r == first_full_rank(golden, x)
        for _ in range(100):
            x = QuadExt(Fraction(rng.randrange(1, 3 * den), den))
            y1, y2 = (QuadExt(Fraction(rng.randrange(0, 3 * den), den)) for _ in range(2))
            assert tower_return_time(tw, x, y1)[0] == tower_return_time(tw, x, y2)[0]


def test_criterion_11_parry_oracle():
    with criterion(11, "golden complete digits give the two-step Parry density; beta = 2 is uniform"):
        csys = make_system(G, [0, 1])
        h = acim(csys)
        norm = 1 + pow_int(G, -2)
        assert h.breakpoints == (0, 1 / G, 1)
        assert h.values == ((1 + 1 / G) / norm, 1 / norm)
        assert h.same_function(parry_density(G))
        assert transfer_apply(csys, h).same_function(h)
        u = acim(make_system(QuadExt(2), [0, 1, 2]))
        assert u.same_function(parry_density(QuadExt(2)))
        assert u.values == (1,) and u.breakpoints == (0, 1)
        assert transfer_apply(classical_system(QuadExt(2)), u).same_function(u)


def test_criterion_12_birkhoff(golden):
    with criterion(12, "golden Birkhoff histograms, 1e6 iterates, 64 bins, three seeds, L1 < 0.02"):
        t0 = time.perf_counter()
        runs = birkhoff_runs(golden, [1, 2, 3], 10**6, 64, jobs=3)
        elapsed = time.perf_counter() - t0
        for r in runs:
            print(f"  seed {r.seed}: L1 = {r.l1:.4f}")
            assert r.iterations == 10**6 and r.l1 < 0.02
        assert elapsed < 30
