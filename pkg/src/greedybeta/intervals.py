"""Fundamental intervals, the B_n/D_n level sets and kappa statistics.

Every fundamental interval maps onto an interval of the form ``[0, t)`` under
the appropriate power of T, so a node of the refinement tree is described by
its word and the image endpoint ``t``.  A child for digit ``a_j`` exists when
the cell of ``a_j`` starts below ``t``; its image endpoint is
``beta*min(t, right_j) - a_j``, and it is full when that equals ``s``.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional, Sequence

from .errors import DepthExceeded, InvalidWord, NotFull, WrongCase
from .exactnum import GOLDEN, ApproxScalar, QuadExt, compare_across, pow_int
from .system import (
    GreedySystem,
    SupportCase,
    Word,
    lemma_m,
)

MAX_DEPTH = 64

CLASSICAL_CASES = (SupportCase.ISO_CLASSICAL, SupportCase.CLASSICAL_COMPLETE)


@dataclass(frozen=True)
class FundInterval:
    word: Word
    level: int
    left: object
    right: object
    image_end: object
    full: bool

    @property
    def length(self):
        return self.right - self.left


@dataclass(frozen=True)
class LevelSets:
    n: int
    B: tuple  # non-full rank-n intervals not inside a lower-rank full one
    D: tuple  # full rank-n intervals not inside a lower-rank full one
    D_measure: object
    kappa: int
    kappa1: int
    kappa2: int
    kappa_bar: int


def child_images(sys: GreedySystem, t):
    """``[(cell, image_end, full)]`` for every digit cell starting below ``t``."""
    out = []
    for c in sys.cells:
        if not c.left < t:
            break
        right = c.right if c.right < t else t
        e = sys.beta * right - c.digit
        out.append((c, e, e == sys.s))
    return out


def root(sys: GreedySystem) -> FundInterval:
    zero = sys.s - sys.s
    return FundInterval((), 0, zero, sys.s, sys.s, True)


def children(sys: GreedySystem, node: FundInterval) -> list:
    scale = pow_int(sys.beta, -node.level)
    out = []
    for c, e, full in child_images(sys, node.image_end):
        hi = c.right if c.right < node.image_end else node.image_end
        out.append(
            FundInterval(
                node.word + (c.digit,),
                node.level + 1,
                node.left + c.left * scale,
                node.left + hi * scale,
                e,
                full,
            )
        )
    return out


def refine_to(sys: GreedySystem, N: int) -> Iterator[LevelSets]:
    """Lazily yield levels 1..N of the tree, breadth-first.

    Full nodes are not expanded.  Level n is yielded once level n+1 is known,
    since kappa_bar(n) counts B_n nodes with two children in B_{n+1}.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > MAX_DEPTH:
        raise DepthExceeded(f"depth {N} exceeds the hard cap {MAX_DEPTH}")
    d1 = sys.digits[1] if len(sys.digits) > 1 else None
    zero = sys.s - sys.s

    def split(frontier):
        B, D, kbar = [], [], 0
        for node in frontier:
            kids = children(sys, node)
            if sum(1 for k in kids if not k.full) == 2:
                kbar += 1
            for k in kids:
                (D if k.full else B).append(k)
        return B, D, kbar

    B, D, _ = split([root(sys)])
    for n in range(1, N + 1):
        nB, nD, kbar = split(B)
        k1 = sum(1 for b in B if b.word[0] == d1)
        meas = sum((d.length for d in D), zero)
        yield LevelSets(n, tuple(B), tuple(D), meas, len(B), k1, len(B) - k1, kbar)
        B, D = nB, nD


def levels(sys: GreedySystem, N: int) -> list:
    return list(refine_to(sys, N))


def level_partition(sys: GreedySystem) -> list:
    """Rank-1 cells with their digits."""
    if sys.support_case not in (
        SupportCase.MAIN_CASE,
        SupportCase.BIG_SECOND_GAP,
        SupportCase.ENDPOINT,
    ):
        raise WrongCase(f"level partition needs a deleted-digit case, got {sys.support_case}")
    return [(c.digit, (c.left, c.right)) for c in sys.cells]


# -- words --------------------------------------------------------------------


def image_end_of(sys: GreedySystem, word: Sequence, start=None):
    """Image endpoint of Delta(word) (relative to a node with image ``start``)."""
    t = sys.s if start is None else start
    for b in word:
        for c in sys.cells:
            if c.digit == b:
                break
        else:
            raise InvalidWord(f"{b} is not a digit")
        if not c.left < t:
            raise InvalidWord(f"word {tuple(word)} names an empty interval")
        right = c.right if c.right < t else t
        t = sys.beta * right - c.digit
    return t


def is_full(sys: GreedySystem, word: Sequence) -> bool:
    return len(word) > 0 and image_end_of(sys, word) == sys.s


def interval_of(sys: GreedySystem, word: Sequence) -> FundInterval:
    node = root(sys)
    for b in word:
        for k in children(sys, node):
            if k.word[-1] == b:
                node = k
                break
        else:
            raise InvalidWord(f"word {tuple(word)} names an empty interval")
    return node


@dataclass(frozen=True)
class Decomposition:
    blocks: tuple
    ranks: tuple


def decompose_full_word(sys: GreedySystem, word: Sequence) -> Decomposition:
    """Split a full word at its successive full-completion ranks."""
    word = tuple(word)
    t = sys.s
    ranks = []
    for k, b in enumerate(word):
        t = image_end_of(sys, (b,), start=t)
        if t == sys.s:
            ranks.append(k + 1)
    if not ranks or ranks[-1] != len(word):
        raise NotFull(f"Delta{word} is not full")
    bounds = [0] + ranks
    blocks = tuple(word[bounds[i] : bounds[i + 1]] for i in range(len(ranks)))
    first_full = {c.digit for c, _, full in child_images(sys, sys.s) if full}
    for blk in blocks:
        assert is_full(sys, blk), "block not full"
        if blk[0] in first_full:
            assert len(blk) == 1, "block starting with a full rank-1 digit must be a singleton"
    assert sum(blocks, ()) == word and is_full(sys, sum(blocks, ()))
    return Decomposition(blocks, tuple(ranks))


# -- aggregated counting --------------------------------------------------------


class KeyIndex:
    """Maps image endpoints to slots; hashing for exact values, scan for floats."""

    def __init__(self):
        self.keys = []
        self._map = {}

    def index(self, key) -> int:
        if isinstance(key, ApproxScalar):
            for i, k in enumerate(self.keys):
                if k == key:
                    return i
        else:
            i = self._map.get(key)
            if i is not None:
                return i
            self._map[key] = len(self.keys)
        self.keys.append(key)
        return len(self.keys) - 1

    def __len__(self):
        return len(self.keys)


class Transitions:
    """Memoized child structure of a node as a function of its image endpoint."""

    def __init__(self, sys: GreedySystem):
        self.sys = sys
        self.index = KeyIndex()
        self._kids = {}

    def slot(self, t) -> int:
        return self.index.index(t)

    def kids(self, i: int):
        """``(nonfull_slots, n_full)`` for the node with image endpoint slot ``i``."""
        got = self._kids.get(i)
        if got is None:
            t = self.index.keys[i]
            nonfull, nfull = [], 0
            for _, e, full in child_images(self.sys, t):
                if full:
                    nfull += 1
                else:
                    nonfull.append(self.slot(e))
            got = (tuple(nonfull), nfull)
            self._kids[i] = got
        return got


@dataclass(frozen=True)
class KappaRow:
    n: int
    kappa: int
    kappa1: int
    kappa2: int
    kappa_bar: int
    n_full: int
    bound: Optional[int] = None
    bound_ok: Optional[bool] = None


def count_levels(sys: GreedySystem, N: int, trans: Optional[Transitions] = None):
    """Per-level counts by (first digit, image endpoint) without materializing words.

    Returns ``(rows, weights)`` where ``weights[n-1]`` is a Counter over image
    endpoint slots at level n.
    """
    trans = trans or Transitions(sys)
    d1 = sys.digits[1] if len(sys.digits) > 1 else None
    # state: (first digit is a1?, slot) -> count
    state = Counter()
    nonfull_root = [
        (c.digit, e) for c, e, full in child_images(sys, sys.s) if not full
    ]
    nfull1 = sum(1 for _, _, full in child_images(sys, sys.s) if full)
    for dg, e in nonfull_root:
        state[(dg == d1, trans.slot(e))] += 1
    rows, weights = [], []
    full_counts = [nfull1]
    for n in range(1, N + 1):
        kappa = sum(state.values())
        k1 = sum(v for (f, _), v in state.items() if f)
        w = Counter()
        for (_, sl), v in state.items():
            w[sl] += v
        weights.append(w)
        nxt = Counter()
        kbar = 0
        nfull = 0
        for (f, sl), v in state.items():
            kids, nf = trans.kids(sl)
            if len(kids) == 2:
                kbar += v
            nfull += nf * v
            for c in kids:
                nxt[(f, c)] += v
        rows.append([n, kappa, k1, kappa - k1, kbar])
        full_counts.append(nfull)
        state = nxt
    out = [KappaRow(*r, n_full=full_counts[k]) for k, r in enumerate(rows)]
    return out, weights, trans


def fib(n: int) -> int:
    a, b = 0, 1
    for _ in range(n):
        a, b = b, a + b
    return a


def fib_closed(n: int) -> QuadExt:
    """(G**n - (1-G)**n)/sqrt(5), evaluated exactly in Q(sqrt 5)."""
    return (pow_int(GOLDEN, n) - pow_int(1 - GOLDEN, n)) / QuadExt(0, 1, 5)


def applicable_bounds(sys: GreedySystem) -> list:
    """Names and formulas of the kappa upper bounds whose hypotheses hold."""
    if sys.support_case is not SupportCase.MAIN_CASE:
        raise WrongCase(f"kappa bounds need MainCase, got {sys.support_case}")
    beta = sys.beta
    out = []
    if beta > 2:
        out.append(("2^n", lambda n: 2**n))
    elif compare_across(beta, GOLDEN) > 0:
        out.append(("F(n+2)", lambda n: fib(n + 2)))
    else:
        out.append(("2^(floor(n/2)+1)", lambda n: 2 ** (n // 2 + 1)))
        m = lemma_m(beta)
        if m >= 2:
            out.append((f"2^(floor(n/{m})+1)", lambda n, m=m: 2 ** (n // m + 1)))
    return out


def kappa_table(sys: GreedySystem, N: int) -> list:
    """Exact kappa, kappa1, kappa2, kappa_bar per level; recursion asserted."""
    rows, _, _ = count_levels(sys, N + 1)
    for a, b in zip(rows, rows[1:]):
        assert b.kappa == a.kappa + a.kappa_bar, f"kappa recursion fails at n={a.n}"
    rows = rows[:N]
    if sys.support_case is SupportCase.MAIN_CASE:
        name, fn = applicable_bounds(sys)[-1]
        rows = [
            KappaRow(r.n, r.kappa, r.kappa1, r.kappa2, r.kappa_bar, r.n_full, fn(r.n), r.kappa <= fn(r.n))
            for r in rows
        ]
    return rows


@dataclass(frozen=True)
class BoundCheck:
    name: str
    ok: bool
    first_failure: Optional[int]


@dataclass(frozen=True)
class KappaBoundReport:
    checks: tuple
    recursion_ok: bool
    fibonacci_closed_ok: bool

    @property
    def ok(self) -> bool:
        return self.recursion_ok and self.fibonacci_closed_ok and all(c.ok for c in self.checks)


def check_kappa_bounds(sys: GreedySystem, N: int) -> KappaBoundReport:
    rows, _, _ = count_levels(sys, N + 1)
    recursion_ok = all(
        b.kappa == a.kappa + a.kappa_bar for a, b in zip(rows, rows[1:])
    )
    rows = rows[:N]
    checks = []
    for name, fn in applicable_bounds(sys):
        bad = [r.n for r in rows if r.kappa > fn(r.n)]
        checks.append(BoundCheck(name, not bad, bad[0] if bad else None))
    fib_ok = all(fib_closed(n) == fib(n) for n in range(N + 3))
    return KappaBoundReport(tuple(checks), recursion_ok, fib_ok)


@dataclass(frozen=True)
class PartialSum:
    n: int
    covered: object
    residual: object
    bound: object
    ok: bool


def dn_partial_sums(sys: GreedySystem, N: int) -> list:
    """Exact sum of lambda(D_n) over n <= N with the residual and its kappa bound."""
    rows, weights, trans = count_levels(sys, N)
    out = []
    covered = sys.s - sys.s
    for r, w in zip(rows, weights):
        scale = pow_int(sys.beta, -r.n)
        covered = covered + sys.s * r.n_full * scale
        residual = sys.s - covered
        direct = sum((trans.index.keys[sl] * v for sl, v in w.items()), sys.s - sys.s) * scale
        bound = sys.s * r.kappa * scale
        ok = residual == direct and 0 <= residual <= bound
        out.append(PartialSum(r.n, covered, residual, bound, ok))
    return out


# -- certified tails ------------------------------------------------------------


def descendant_series(sys: GreedySystem, x):
    """Upper bound on sum_{k>=1} U_k x**k, U_k bounding B-descendants at depth k.

    Growth classes: classical maps have one non-full child per node; beta > 2
    at most two; MainCase with a2-a1 outside Delta(a2) is Fibonacci-bounded;
    when both critical orbits stay in Delta(0) for m steps, branching is
    separated by m non-branching levels.  Returns ``None`` if none converges.
    """
    beta = sys.beta
    one = x - x + 1
    cands = []
    if sys.support_case in CLASSICAL_CASES:
        cands.append(x / (one - x))
    if 2 * x < 1:
        cands.append(2 * x / (one - 2 * x))
    if sys.support_case is SupportCase.MAIN_CASE:
        c1 = sys.a2 - sys.a1
        c2 = beta * sys.a1 - sys.a2
        edge = sys.a1 / beta
        if c1 < sys.a2 / beta and x + x * x < 1:
            cands.append((2 * x + x * x) / (one - x - x * x))
        m = 0
        v1, v2 = c1, c2
        while m < MAX_DEPTH and v1 < edge and v2 < edge:
            m += 1
            v1, v2 = beta * v1, beta * v2
        if m >= 1:
            xm = pow_int(x, m + 1)
            if 2 * xm < 1:
                cands.append(2 * x * (one - xm) / ((one - x) * (one - 2 * xm)))
    if not cands:
        return None
    return min(cands)


def formula_tail(sys: GreedySystem, N: int):
    """sum_{n>N} kappa_bound(n)/beta**n for the applicable formula bound, if convergent."""
    x = 1 / sys.beta
    one = x - x + 1
    if sys.support_case in CLASSICAL_CASES:
        return pow_int(x, N + 1) / (one - x)
    if sys.support_case is not SupportCase.MAIN_CASE:
        if 2 * x < 1:
            return pow_int(2 * x, N + 1) / (one - 2 * x)
        return None
    best = None
    for name, fn in applicable_bounds(sys):
        if name == "2^n":
            val = pow_int(2 * x, N + 1) / (one - 2 * x) if 2 * x < 1 else None
        elif name == "F(n+2)":
            if not x + x * x < 1:
                continue
            total = (one + x) / (one - x - x * x)
            val = total - sum((fib(n + 2) * pow_int(x, n) for n in range(N + 1)), x - x)
        else:
            m = 2 if name.startswith("2^(floor(n/2)") else int(name.split("/")[1].split(")")[0])
            xm = pow_int(x, m)
            if not 2 * xm < 1:
                continue
            total = 2 * (one - xm) / ((one - x) * (one - 2 * xm))
            val = total - sum((fn(n) * pow_int(x, n) for n in range(N + 1)), x - x)
        if val is not None and (best is None or val < best):
            best = val
    return best


def tail_count_bound(sys: GreedySystem, N: int, kappa_N: int):
    """Certified upper bound on sum_{n>N} kappa(n)/beta**n."""
    x = 1 / sys.beta
    cands = []
    ser = descendant_series(sys, x)
    if ser is not None:
        cands.append(kappa_N * pow_int(x, N) * ser)
    f = formula_tail(sys, N)
    if f is not None:
        cands.append(f)
    if not cands:
        raise DepthExceeded("no convergent tail bound for this system")
    return min(cands)


def default_depth(sys: GreedySystem, rel: float = 1e-9) -> int:
    """Smallest N whose certified kappa tail falls below ``rel * s``."""
    rows, _, _ = count_levels(sys, MAX_DEPTH)
    target = sys.s * QuadExt(Fraction(rel).limit_denominator(10**15))
    for r in rows:
        if tail_count_bound(sys, r.n, r.kappa) < target:
            return r.n
    return MAX_DEPTH
