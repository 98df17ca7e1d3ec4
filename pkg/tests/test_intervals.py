from __future__ import annotations

import random
from fractions import Fraction

import pytest

from greedybeta.errors import DepthExceeded, NotFull, WrongCase
from greedybeta.exactnum import GOLDEN, QuadExt, make_quadratic, pow_int
from greedybeta.intervals import (
    MAX_DEPTH,
    check_kappa_bounds,
    children,
    count_levels,
    decompose_full_word,
    dn_partial_sums,
    fib,
    fib_closed,
    image_end_of,
    interval_of,
    is_full,
    kappa_table,
    level_partition,
    levels,
    refine_to,
    root,
    tail_count_bound,
)
from greedybeta.system import SupportCase, make_system, orbit

from .conftest import random_main_case

G = GOLDEN


def test_level_partition_golden(golden):
    cells = level_partition(golden)
    assert cells == [(0, (0, 3 / G)), (3, (3 / G, 4 / G)), (4, (4 / G, 3))]


def test_level_partition_rational_beta():
    b = QuadExt(Fraction(13, 10))
    s = make_system(b, [0, 1, Fraction(5, 4)])
    assert s.support_case is SupportCase.MAIN_CASE
    cells = level_partition(s)
    assert [c[1] for c in cells] == [(0, 1 / b), (1 / b, Fraction(5, 4) / b), (Fraction(5, 4) / b, 1)]
    # cover [0, s) without gaps
    assert cells[0][1][0] == 0 and cells[-1][1][1] == s.s
    assert all(a[1][1] == b_[1][0] for a, b_ in zip(cells, cells[1:]))


def test_level_partition_wrong_case():
    with pytest.raises(WrongCase):
        level_partition(make_system(G, [0, 1]))


def test_golden_level_one(golden):
    lv = levels(golden, 4)
    B1 = {(iv.word, iv.image_end) for iv in lv[0].B}
    assert B1 == {((3,), QuadExt(1)), ((4,), 3 * G - 4)}
    assert lv[0].kappa == 2
    assert lv[3].kappa == 3
    assert is_full(golden, (4, 0, 0, 0))
    assert is_full(golden, (3, 0, 0, 0))
    assert sorted("".join(str(b) for b in iv.word) for iv in lv[3].B) == ["3003", "3004", "4003"]


def test_refine_depth_cap(golden):
    with pytest.raises(DepthExceeded):
        next(refine_to(golden, MAX_DEPTH + 1))


def test_kappa_table_examples(golden):
    rows = kappa_table(golden, 18)
    assert rows[1].kappa == 2 == fib(2) + fib(1)
    assert rows[6].kappa == 4 == fib(4) + fib(2)
    for a, b in zip(rows, rows[1:]):
        assert b.kappa - a.kappa == a.kappa_bar
        assert a.kappa == a.kappa1 + a.kappa2


def test_aggregated_counts_match_word_enumeration(golden):
    rng = random.Random(3)
    systems = [golden] + [random_main_case(rng) for _ in range(5)]
    for s in systems:
        words = levels(s, 9)
        rows, _, _ = count_levels(s, 9)
        for lv, r in zip(words, rows):
            assert (lv.kappa, lv.kappa1, lv.kappa2, lv.kappa_bar) == (r.kappa, r.kappa1, r.kappa2, r.kappa_bar)
            assert len(lv.D) == r.n_full


def test_kappa_bounds_golden(golden):
    rep = check_kappa_bounds(golden, 18)
    assert rep.ok
    assert [c.name for c in rep.checks][0] == "2^(floor(n/2)+1)"


def test_kappa_bounds_fibonacci_regime():
    s = make_system(QuadExt(Fraction(19, 10)), [0, 1, Fraction(9, 5)])
    rep = check_kappa_bounds(s, 15)
    assert rep.ok and rep.checks[0].name == "F(n+2)"


def test_fibonacci_closed_form():
    assert fib(10) == 55 == fib_closed(10)


def test_dn_partial_sums_golden(golden):
    sums = dn_partial_sums(golden, 12)
    assert sums[0].covered == 3 / G
    assert all(p.ok for p in sums)
    assert all(a.covered <= b.covered for a, b in zip(sums, sums[1:]))
    assert sums[-1].residual <= kappa_table(golden, 12)[-1].kappa * 3 * pow_int(G, -12)


def test_decompose_examples(golden):
    d = decompose_full_word(golden, (0,))
    assert d.blocks == ((0,),) and d.ranks == (1,)
    d = decompose_full_word(golden, (0, 4, 0, 0, 0))
    assert d.blocks == ((0,), (4, 0, 0, 0)) and d.ranks == (1, 5)
    d = decompose_full_word(golden, (0, 0))
    assert d.blocks == ((0,), (0,))
    with pytest.raises(NotFull):
        decompose_full_word(golden, (4, 0))


def _all_nodes(s, N):
    out = []
    frontier = [root(s)]
    for _ in range(N):
        nxt = []
        for node in frontier:
            for k in children(s, node):
                out.append((node, k))
                if not k.full:
                    nxt.append(k)
        frontier = nxt
    return out


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_fullness_length_equivalence_and_tree_consistency(golden, seed):
    s = golden if seed == 0 else random_main_case(random.Random(seed))
    pairs = _all_nodes(s, 8)
    for _, k in pairs:
        scaled = k.length * pow_int(s.beta, k.level)
        assert k.full == (scaled == s.s)
        if not k.full:
            assert scaled < s.s
    by_parent = {}
    for parent, k in pairs:
        by_parent.setdefault(parent.word, (parent, []))[1].append(k)
    for parent, kids in by_parent.values():
        assert kids[0].left == parent.left
        assert all(a.right == b.left for a, b in zip(kids, kids[1:]))
        # the last child reaches the parent's right end exactly
        assert kids[-1].right == parent.right


@pytest.mark.parametrize("seed", [0, 4, 5])
def test_image_end_provenance(golden, seed):
    s = golden if seed == 0 else random_main_case(random.Random(seed))
    c1, c2 = s.a2 - s.a1, s.beta * s.a1 - s.a2
    N = 10
    orbit_vals = set(orbit(s, c1, N + 1).values) | set(orbit(s, c2, N + 1).values)
    for lv in levels(s, N):
        for iv in lv.B:
            assert iv.image_end in orbit_vals


def test_concatenation_of_full_words(golden):
    rng = random.Random(11)
    full = [iv.word for lv in levels(golden, 7) for iv in lv.D]
    for _ in range(100):
        u, v = rng.choice(full), rng.choice(full)
        w = u + v
        assert image_end_of(golden, w) == golden.s
        iv = interval_of(golden, w)
        assert iv.full and iv.length * pow_int(G, len(w)) == golden.s


def test_tail_bound_dominates_actual_tail(golden):
    rows, _, _ = count_levels(golden, 60)
    for N in (10, 20, 30):
        actual = sum((r.kappa * pow_int(G, -r.n) for r in rows[N:]), QuadExt(0))
        assert actual < tail_count_bound(golden, N, rows[N - 1].kappa)
