"""Greedy beta-transformations with deleted digits.

A :class:`GreedySystem` bundles ``beta``, a normalized digit set, the support
``[0, s)`` of the acim and the half-open digit cells partitioning it.  The map
itself is ``T x = beta*x - a_j`` on the cell of ``a_j``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import (
    BoundaryAmbiguous,
    EmptyTail,
    InvalidSystem,
    NotAllowable,
    OutOfDomain,
    WrongCase,
)
from .exactnum import (
    GOLDEN,
    ApproxScalar,
    QuadExt,
    Scalar,
    as_scalar,
    backend_of,
    common_radicand,
    compare_across,
    pow_int,
)

Word = tuple  # tuple of digit scalars

DEFAULT_ORBIT_CAP = 10**4
BOUNDARY_RTOL = Fraction(1, 10**15)
LEMMA_M_CAP = 64


class SupportCase(str, enum.Enum):
    ISO_CLASSICAL = "IsoClassical"
    BIG_SECOND_GAP = "BigSecondGap"
    MAIN_CASE = "MainCase"
    CLASSICAL_COMPLETE = "ClassicalComplete"
    # a1 = a2/(beta-1): support [0, a1), beta > 2, Delta(a2) is full of rank 1
    ENDPOINT = "EndpointCase"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class DigitSet:
    digits: tuple
    shift: Scalar = QuadExt(0)

    @property
    def normalized(self) -> bool:
        return self.digits[0] == 0

    def __len__(self):
        return len(self.digits)

    def __iter__(self):
        return iter(self.digits)

    def __getitem__(self, i):
        return self.digits[i]


def make_digit_set(digits: Iterable) -> DigitSet:
    """Sort-checked digit set shifted so that the smallest digit is 0."""
    ds = [as_scalar(a) for a in digits]
    if not ds:
        raise InvalidSystem("empty digit set")
    shift = ds[0]
    return DigitSet(tuple(a - shift for a in ds), shift)


@dataclass(frozen=True)
class AllowabilityReport:
    cond_i: bool
    cond_ii: bool
    shortcut_used: bool
    max_gap: Scalar
    gap_limit: Scalar

    @property
    def allowable(self) -> bool:
        return self.cond_i and self.cond_ii


def check_allowable(beta, digits) -> AllowabilityReport:
    beta = as_scalar(beta)
    if not beta > 1:
        raise InvalidSystem("beta must exceed 1")
    ds = [as_scalar(a) for a in (digits.digits if isinstance(digits, DigitSet) else digits)]
    if not ds:
        raise InvalidSystem("empty digit set")
    cond_i = all(ds[k] < ds[k + 1] for k in range(len(ds) - 1))
    gaps = [ds[k + 1] - ds[k] for k in range(len(ds) - 1)]
    max_gap = max(gaps) if gaps else QuadExt(0)
    limit = (ds[-1] - ds[0]) / (beta - 1)
    cond_ii = max_gap <= limit
    shortcut = False
    if cond_i and len(ds) == 3 and beta <= 2:
        a1, a2 = ds[1] - ds[0], ds[2] - ds[0]
        shortcut = beta * a1 > a2
    return AllowabilityReport(cond_i, cond_ii, shortcut, max_gap, limit)


def condition_main(beta, a1, a2) -> bool:
    """a1*max(beta-1, 1) < a2 < a1*min(2, beta)."""
    lo = a1 * (beta - 1 if beta - 1 > 1 else QuadExt(1))
    hi = a1 * (beta if beta < 2 else QuadExt(2))
    return lo < a2 < hi


def classify_support(beta, digits) -> tuple[SupportCase, Scalar]:
    """Support case and right endpoint ``s`` for an allowable ``{0, a1, a2}``."""
    beta = as_scalar(beta)
    ds = digits if isinstance(digits, DigitSet) else make_digit_set(digits)
    if len(ds) != 3:
        raise InvalidSystem("support classification needs exactly three digits")
    if not (1 < beta < 3):
        raise InvalidSystem("three-digit systems need 1 < beta < 3")
    if not check_allowable(beta, ds).allowable:
        raise NotAllowable("digit set is not allowable for this beta")
    _, a1, a2 = ds.digits
    if a1 < a2 / beta:
        # T a1 = beta*a1 - a1
        if beta * a1 - a1 <= a1:
            return SupportCase.ISO_CLASSICAL, a1
        return SupportCase.BIG_SECOND_GAP, a2 - a1
    gap = a2 - a1
    if gap > a1:
        return SupportCase.BIG_SECOND_GAP, gap
    if gap == a1:
        return SupportCase.ISO_CLASSICAL, a1
    if a1 == a2 / beta:
        return SupportCase.ISO_CLASSICAL, a1
    if a1 == a2 / (beta - 1):
        return SupportCase.ENDPOINT, a1
    return SupportCase.MAIN_CASE, a1


@dataclass(frozen=True)
class Cell:
    index: int
    digit: Scalar
    left: Scalar
    right: Scalar


@dataclass(frozen=True)
class GreedySystem:
    """Immutable description of T on its support ``[0, s)``."""

    beta: Scalar
    digit_set: DigitSet
    support_case: SupportCase
    s: Scalar
    cells: tuple = field(repr=False)

    @property
    def digits(self) -> tuple:
        return self.digit_set.digits

    @property
    def backend(self) -> str:
        return backend_of(self.beta, *self.digits)

    @property
    def exact(self) -> bool:
        return self.backend == "exact"

    @property
    def a1(self):
        return self.digits[1]

    @property
    def a2(self):
        return self.digits[2]

    def cell_of(self, digit) -> Cell:
        for c in self.cells:
            if c.digit == digit:
                return c
        raise KeyError(digit)

    def descriptor(self) -> dict:
        from .exactnum import scalar_to_json

        return {
            "beta": scalar_to_json(self.beta),
            "digits": [scalar_to_json(a) for a in self.digits],
            "digit_shift": scalar_to_json(self.digit_set.shift),
            "support_case": self.support_case.value,
            "s": scalar_to_json(self.s),
            "backend": self.backend,
        }


def _build_cells(beta, digits, s) -> tuple:
    cells = []
    for j, a in enumerate(digits):
        left = a / beta
        if not left < s:
            break
        right = digits[j + 1] / beta if j + 1 < len(digits) else s
        if right > s:
            right = s
        cells.append(Cell(j, a, left, right))
    return tuple(cells)


def is_complete_digit_set(beta, digits) -> bool:
    top = math.floor(beta)
    return len(digits) == top + 1 and all(digits[k] == k for k in range(top + 1))


def make_system(beta, digits) -> GreedySystem:
    """Validate, normalize (a0 -> 0) and classify.

    Complete digit sets ``{0, ..., floor(beta)}`` give the classical map on
    ``[0, 1)``; two-digit sets are a rescaled classical map on ``[0, a1)``;
    three-digit sets go through :func:`classify_support`.
    """
    beta = as_scalar(beta)
    if not beta > 1:
        raise InvalidSystem("beta must exceed 1")
    raw = [as_scalar(a) for a in digits]
    common_radicand([beta, *raw])
    report = check_allowable(beta, raw)
    if not report.allowable:
        raise NotAllowable(
            "digits not strictly increasing"
            if not report.cond_i
            else f"max gap {report.max_gap} exceeds {report.gap_limit}"
        )
    ds = make_digit_set(raw)
    if is_complete_digit_set(beta, ds.digits):
        case, s = SupportCase.CLASSICAL_COMPLETE, QuadExt(1)
    elif len(ds) == 2:
        case, s = SupportCase.ISO_CLASSICAL, ds.digits[1]
    elif len(ds) == 3:
        case, s = classify_support(beta, ds)
    else:
        raise InvalidSystem(
            "support determination for more than three digits is only "
            "implemented for complete digit sets"
        )
    if isinstance(beta, ApproxScalar):
        s = ApproxScalar(s)
    return GreedySystem(beta, ds, case, s, _build_cells(beta, ds.digits, s))


def classical_system(beta) -> GreedySystem:
    beta = as_scalar(beta)
    return make_system(beta, list(range(math.floor(beta) + 1)))


# -- the map ------------------------------------------------------------------


def _check_domain(sys: GreedySystem, x):
    if x < 0 or not x < sys.s:
        raise OutOfDomain(f"x = {x} outside [0, {sys.s})")


def greedy_cell(sys: GreedySystem, x) -> Cell:
    x = as_scalar(x)
    _check_domain(sys, x)
    approx = isinstance(x, ApproxScalar) or not sys.exact
    found = sys.cells[0]
    for c in sys.cells[1:]:
        if approx:
            tol = max(QuadExt(1), abs(c.left)) * BOUNDARY_RTOL
            if abs(ApproxScalar(x) - c.left) <= ApproxScalar(tol):
                raise BoundaryAmbiguous(f"x = {x} within tolerance of boundary {c.left}")
        if c.left <= x:
            found = c
        else:
            break
    return found


def greedy_digit(sys: GreedySystem, x):
    return greedy_cell(sys, x).digit


def step(sys: GreedySystem, x):
    x = as_scalar(x)
    return sys.beta * x - greedy_digit(sys, x)


@dataclass(frozen=True)
class OrbitRecord:
    start: Scalar
    values: tuple
    digits: Word
    preperiod: Optional[int]
    period: Optional[int]
    backend: str

    @property
    def eventually_periodic(self) -> bool:
        return self.period is not None


def orbit(sys: GreedySystem, x, n_max: int = DEFAULT_ORBIT_CAP) -> OrbitRecord:
    """Iterate T from ``x``; exact systems stop at the first repeated value."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    x = as_scalar(x)
    _check_domain(sys, x)
    exact = sys.exact and isinstance(x, QuadExt)
    values = [x]
    digits = []
    seen = {x: 0} if exact else None
    for k in range(1, n_max + 1):
        b = greedy_digit(sys, values[-1])
        nxt = sys.beta * values[-1] - b
        digits.append(b)
        values.append(nxt)
        if exact:
            if nxt in seen:
                pre = seen[nxt]
                return OrbitRecord(x, tuple(values), tuple(digits), pre, k - pre, "exact")
            seen[nxt] = k
    return OrbitRecord(x, tuple(values), tuple(digits), None, None, sys.backend)


def expand(sys: GreedySystem, x, n: int) -> Word:
    x = as_scalar(x)
    out = []
    for _ in range(n):
        b = greedy_digit(sys, x)
        out.append(b)
        x = sys.beta * x - b
    return tuple(out)


def evaluate_word(beta, word: Sequence, repeating_tail: Optional[Sequence] = None):
    """Sum b_i/beta**i over ``word``, plus a periodic tail summed in closed form."""
    beta = as_scalar(beta)
    inv = 1 / beta
    total = QuadExt(0)
    w = QuadExt(1)
    for b in word:
        w = w * inv
        total = total + w * as_scalar(b)
    if repeating_tail is not None:
        if len(repeating_tail) == 0:
            raise EmptyTail("repeating tail must be nonempty")
        block = QuadExt(0)
        v = QuadExt(1)
        for b in repeating_tail:
            v = v * inv
            block = block + v * as_scalar(b)
        total = total + w * block / (1 - pow_int(inv, len(repeating_tail)))
    return total


# -- classical map ------------------------------------------------------------


def classical_step(beta, x):
    """Digit and image under the classical greedy map on [0, floor(beta)/(beta-1)]."""
    beta = as_scalar(beta)
    x = as_scalar(x)
    top = math.floor(beta)
    if x < 0 or x > top / (beta - 1):
        raise OutOfDomain(f"x = {x} outside the classical domain")
    if x < top / beta:
        b = math.floor(beta * x)
    else:
        b = top
    return b, beta * x - b


def classical_orbit(beta, x, n_max: int = DEFAULT_ORBIT_CAP) -> OrbitRecord:
    beta = as_scalar(beta)
    x = as_scalar(x)
    exact = isinstance(beta, QuadExt) and isinstance(x, QuadExt)
    values, digits = [x], []
    seen = {x: 0} if exact else None
    for k in range(1, n_max + 1):
        b, nxt = classical_step(beta, values[-1])
        digits.append(b)
        values.append(nxt)
        if exact:
            if nxt in seen:
                pre = seen[nxt]
                return OrbitRecord(x, tuple(values), tuple(digits), pre, k - pre, "exact")
            seen[nxt] = k
    return OrbitRecord(x, tuple(values), tuple(digits), None, None, backend_of(beta, x))


# -- main-case analysis --------------------------------------------------------


def critical_points(sys: GreedySystem):
    """``(a2 - a1, beta*a1 - a2)``, the points whose orbits shape B_n."""
    if sys.support_case is not SupportCase.MAIN_CASE:
        raise WrongCase(f"critical points need MainCase, got {sys.support_case}")
    c1 = sys.a2 - sys.a1
    c2 = sys.beta * sys.a1 - sys.a2
    for c in (c1, c2):
        assert 0 <= c < sys.s, "condition (main) violated"
    return c1, c2


def golden_for(beta):
    return ApproxScalar(GOLDEN) if isinstance(beta, ApproxScalar) else GOLDEN


def beta_le_golden(beta) -> bool:
    return compare_across(beta, GOLDEN) <= 0


def lemma_m(beta, cap: int = LEMMA_M_CAP) -> int:
    """Largest m <= cap with beta**m <= 2 (0 if beta > 2)."""
    m = 0
    p = QuadExt(1) if isinstance(beta, QuadExt) else ApproxScalar(1)
    while m < cap:
        p = p * beta
        if p <= 2:
            m += 1
        else:
            break
    return m


@dataclass(frozen=True)
class LemmaCheck:
    name: str
    hypothesis: str
    passed: bool
    detail: str


def verify_lemmas(sys: GreedySystem) -> list[LemmaCheck]:
    """Check each critical-orbit lemma whose hypothesis holds for ``sys``."""
    c1, c2 = critical_points(sys)
    beta, a1, a2 = sys.beta, sys.a1, sys.a2
    out = []
    if beta <= 2:
        ok = c1 < a2 / beta
        out.append(LemmaCheck("top_cell_excluded", "beta <= 2", ok, "a2 - a1 < a2/beta"))
    if beta_le_golden(beta):
        ok = c1 < a1 / beta and c2 < a1 / beta
        out.append(LemmaCheck("zero_cell", "beta <= G", ok, "both critical points in Delta(0)"))
    m = lemma_m(beta)
    if m >= 2:
        ok = True
        for c in (c1, c2):
            v = c
            for _ in range(m):
                if not v < a1 / beta:
                    ok = False
                    break
                v = beta * v
        out.append(
            LemmaCheck(
                "zero_cell_m",
                f"beta <= 2**(1/{m})",
                ok,
                f"first {m} iterates of both critical points in Delta(0)",
            )
        )
    return out
