"""The stacked-rectangle natural extension of T.

``R0 = [0, s) x [0, s)`` sits at level 0.  Every non-full fundamental interval
of rank n (an element of B_n) contributes a rectangle ``[0, t) x [0, s/beta**n)``
where ``[0, t)`` is its image under T**n.  The map moves a point to the child
rectangle (y shrinks by beta) or, when the child interval is full, back into
R0 on the y-band equal to that full interval.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .density import phi
from .errors import (
    BoundaryPoint,
    DepthExceeded,
    InvalidPoint,
    NotEventuallyPeriodic,
    OrbitBudgetExceeded,
    WrongCase,
)
from .exactnum import ApproxScalar, pow_int, scalar_to_json, to_decimal
from .intervals import MAX_DEPTH, count_levels, interval_of, refine_to, tail_count_bound
from .system import GreedySystem, SupportCase, greedy_cell

RETURN_CAP = 10**4

TOWER_CASES = (SupportCase.MAIN_CASE, SupportCase.BIG_SECOND_GAP, SupportCase.ENDPOINT)


@dataclass(frozen=True)
class Rect:
    n: int
    i: int
    word: tuple
    x_end: object
    height: object

    @property
    def area(self):
        return self.x_end * self.height


@dataclass(frozen=True)
class TowerPoint:
    x: object
    y: object
    n: int = 0
    i: int = 0


def _digit_label(b) -> str:
    if isinstance(b, ApproxScalar):
        return to_decimal(b, 12).rstrip("0").rstrip(".")
    return str(b)


def word_value(beta, word) -> object:
    """sum_k b_k / beta**(k+1), the left end of Delta(word)."""
    v = beta - beta
    ib = 1 / beta
    scale = ib
    for b in word:
        v = v + b * scale
        scale = scale * ib
    return v


class Tower:
    """Rectangles up to ``depth``; deeper levels are materialized on demand."""

    def __init__(self, sys: GreedySystem, depth: int):
        self.sys = sys
        self.depth = depth
        self.R0_side = sys.s
        self._levels: dict[int, list] = {}
        self._by_word: dict[tuple, Rect] = {}
        self._gen: Iterator = refine_to(sys, MAX_DEPTH)
        self._built = 0
        self._extend_to(depth)
        s = sys.s
        total = s * s
        for n in range(1, depth + 1):
            for r in self._levels[n]:
                total = total + r.area
        self.lambda_R_truncated = total
        rows, _, _ = count_levels(sys, depth)
        self.kappa = tuple(r.kappa for r in rows)
        self.tail_bound = s * s * tail_count_bound(sys, depth, rows[-1].kappa)
        self.lambda_R_closed = None
        self.c2_closed = None
        try:
            res = phi(sys, "closed")
        except NotEventuallyPeriodic:
            res = None
        if res is not None:
            self.lambda_R_closed = s * res.fn.integral()
            self.c2_closed = sum((w for _, w in res.terms), s - s)

    # -- levels --------------------------------------------------------------

    def _extend_to(self, n: int):
        if n > MAX_DEPTH:
            raise DepthExceeded(f"tower level {n} exceeds the hard cap {MAX_DEPTH}")
        sys = self.sys
        while self._built < n:
            lv = next(self._gen)
            height = sys.s * pow_int(sys.beta, -lv.n)
            rects = []
            for k, b in enumerate(lv.B, start=1):
                r = Rect(lv.n, k, b.word, b.image_end, height)
                rects.append(r)
                self._by_word[self._key(b.word)] = r
            self._levels[lv.n] = rects
            self._built = lv.n

    def _key(self, word) -> tuple:
        # digit positions: float digits are not hashable
        digits = self.sys.digits
        return tuple(next(k for k, a in enumerate(digits) if a == b) for b in word)

    def level(self, n: int) -> list:
        self._extend_to(n)
        return self._levels[n]

    def rect(self, n: int, i: int) -> Rect:
        rects = self.level(n)
        if not 1 <= i <= len(rects):
            raise InvalidPoint(f"no rectangle ({n}, {i})")
        return rects[i - 1]

    def rect_for_word(self, word: tuple) -> Rect:
        self._extend_to(len(word))
        r = self._by_word.get(self._key(word))
        if r is None:
            raise InvalidPoint(f"word {word} has no rectangle")
        return r

    def rects(self) -> list:
        return [r for n in range(1, self.depth + 1) for r in self._levels[n]]

    @property
    def lambda_R_upper(self):
        return self.lambda_R_truncated + self.tail_bound

    def manifest(self, digits: int = 20) -> dict:
        return {
            "system": self.sys.descriptor(),
            "depth": self.depth,
            "R0_side": scalar_to_json(self.R0_side, digits),
            "levels": [
                {
                    "n": n,
                    "kappa": len(self._levels[n]),
                    "rects": [
                        {
                            "i": r.i,
                            "word": [_digit_label(b) for b in r.word],
                            "x_end": scalar_to_json(r.x_end, digits),
                            "height": scalar_to_json(r.height, digits),
                        }
                        for r in self._levels[n]
                    ],
                }
                for n in range(1, self.depth + 1)
            ],
            "lambda_R_truncated": scalar_to_json(self.lambda_R_truncated, digits),
            "tail_bound": scalar_to_json(self.tail_bound, digits),
            "lambda_R_closed": None
            if self.lambda_R_closed is None
            else scalar_to_json(self.lambda_R_closed, digits),
        }

    def to_dot(self, max_level: Optional[int] = None) -> str:
        """Transition diagram: rectangle -> child rectangle, or -> R0 on full children."""
        sys = self.sys
        top = self.depth if max_level is None else min(max_level, self.depth)
        lines = ["digraph tower {", '  rankdir=TB;', '  R0 [shape=box,label="R0"];']

        def name(r):
            return f"R_{r.n}_{r.i}"

        def edges(src, word, t, src_level):
            for c in sys.cells:
                if not c.left < t:
                    break
                hi = c.right if c.right < t else t
                e = sys.beta * hi - c.digit
                if e == sys.s:
                    lines.append(f'  {src} -> R0 [label="{c.digit}"];')
                elif src_level + 1 <= top:
                    child = self.rect_for_word(word + (c.digit,))
                    lines.append(f'  {src} -> {name(child)} [label="{c.digit}"];')

        for n in range(1, top + 1):
            for r in self._levels[n]:
                w = "".join(_digit_label(b) for b in r.word)
                lines.append(f'  {name(r)} [shape=box,label="{w}\\nx<{to_decimal(r.x_end, 4)}"];')
        edges("R0", (), sys.s, 0)
        for n in range(1, top + 1):
            for r in self._levels[n]:
                edges(name(r), r.word, r.x_end, n)
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(self.manifest(), indent=2, sort_keys=True)


def build_tower(sys: GreedySystem, N: int) -> Tower:
    if sys.support_case not in TOWER_CASES:
        raise WrongCase(f"tower needs a deleted-digit case, got {sys.support_case}")
    if N < 1 or N > MAX_DEPTH:
        raise DepthExceeded(f"depth must lie in 1..{MAX_DEPTH}")
    return Tower(sys, N)


# -- the map ---------------------------------------------------------------------


def _locate(tower: Tower, p: TowerPoint):
    """``(word, image end, height)`` of the rectangle holding ``p``; validates p."""
    sys = tower.sys
    if p.n == 0:
        if p.i != 0:
            raise InvalidPoint("level-0 points carry index 0")
        word, t, height = (), sys.s, sys.s
    else:
        r = tower.rect(p.n, p.i)
        word, t, height = r.word, r.x_end, r.height
    if p.x < 0 or not p.x < t or p.y < 0 or not p.y < height:
        raise InvalidPoint(f"({p.x}, {p.y}) outside rectangle ({p.n}, {p.i})")
    return word, t, height


def tee_step(tower: Tower, p: TowerPoint) -> TowerPoint:
    sys = tower.sys
    word, t, _ = _locate(tower, p)
    c = greedy_cell(sys, p.x)
    if c.index > 0 and p.x == c.left and not isinstance(p.x, ApproxScalar):
        raise BoundaryPoint(f"x = {p.x} lies on a cell boundary")
    hi = c.right if c.right < t else t
    e = sys.beta * hi - c.digit
    x2 = sys.beta * p.x - c.digit
    child = word + (c.digit,)
    if e == sys.s:
        y2 = word_value(sys.beta, child) + p.y / sys.beta
        return TowerPoint(x2, y2, 0, 0)
    r = tower.rect_for_word(child)
    return TowerPoint(x2, p.y / sys.beta, r.n, r.i)


# -- measure preservation ------------------------------------------------------------


@dataclass(frozen=True)
class MeasureReport:
    levels_checked: int
    rects_checked: int
    area_ok: bool
    targets_ok: bool
    bands_ok: bool
    bands_disjoint: bool
    failures: tuple = field(default=())

    @property
    def ok(self) -> bool:
        return self.area_ok and self.targets_ok and self.bands_ok and self.bands_disjoint


def check_measure_preservation(tower: Tower, n_max: int) -> MeasureReport:
    """Exact area bookkeeping for every rectangle at level <= n_max.

    Each child branch of a rectangle ``[0, t) x [0, H)`` maps the strip over
    its cell onto ``[0, e) x [0, H/beta)``; the strip areas sum to ``t*H`` and
    must reappear as image areas.  Non-full images must coincide with the child
    rectangle; full images are y-bands in R0 that must equal the full interval
    of the completed word and be pairwise disjoint.
    """
    sys = tower.sys
    tower._extend_to(n_max + 1)
    failures = []
    bands = []
    area_ok = targets_ok = bands_ok = True
    sources = [((), sys.s, sys.s, (0, 0))] + [
        (r.word, r.x_end, r.height, (r.n, r.i))
        for n in range(1, n_max + 1)
        for r in tower.level(n)
    ]
    for word, t, H, addr in sources:
        img_area = sys.s - sys.s
        strip_area = img_area
        for c in sys.cells:
            if not c.left < t:
                break
            hi = c.right if c.right < t else t
            e = sys.beta * hi - c.digit
            h2 = H / sys.beta
            strip_area = strip_area + (hi - c.left) * H
            img_area = img_area + e * h2
            child = word + (c.digit,)
            if e == sys.s:
                lo = word_value(sys.beta, child)
                band = (lo, lo + h2)
                iv = interval_of(sys, child)
                if not (iv.left == band[0] and iv.right == band[1]):
                    bands_ok = False
                    failures.append(("band", addr, child))
                bands.append(band)
            else:
                r = tower.rect_for_word(child)
                if not (r.x_end == e and r.height == h2):
                    targets_ok = False
                    failures.append(("target", addr, child))
        if not (img_area == strip_area and strip_area == t * H):
            area_ok = False
            failures.append(("area", addr))
    bands.sort(key=lambda b: b[0])
    disjoint = all(a[1] <= b[0] for a, b in zip(bands, bands[1:]))
    disjoint = disjoint and all(0 <= b[0] and b[1] <= sys.s for b in bands)
    return MeasureReport(n_max, len(sources), area_ok, targets_ok, bands_ok, disjoint, tuple(failures))


# -- return times ----------------------------------------------------------------------


def return_times(sys: GreedySystem, x, k: int = 1, cap: int = RETURN_CAP) -> tuple:
    """Ranks at which the digit prefix of x completes its first k full blocks.

    Only the image endpoint of the current prefix is tracked, so this does not
    touch the tower (and hence does not depend on y).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    t = sys.s
    out = []
    for j in range(1, cap + 1):
        c = greedy_cell(sys, x)
        hi = c.right if c.right < t else t
        t = sys.beta * hi - c.digit
        x = sys.beta * x - c.digit
        if t == sys.s:
            out.append(j)
            if len(out) == k:
                return tuple(out)
    raise OrbitBudgetExceeded(f"fewer than {k} returns within {cap} steps")


def tower_return_time(tower: Tower, x, y, cap: int = RETURN_CAP):
    """``(r1, point)``: steps of tee_step from ``(x, y, 0, 0)`` until level 0 again."""
    p = TowerPoint(x, y, 0, 0)
    for j in range(1, cap + 1):
        p = tee_step(tower, p)
        if p.n == 0:
            return j, p
    raise OrbitBudgetExceeded(f"no return to R0 within {cap} steps")


def induced_map(tower: Tower, x, y, cap: int = RETURN_CAP):
    _, p = tower_return_time(tower, x, y, cap)
    return p.x, p.y


# -- exactness constants -------------------------------------------------------------------


@dataclass(frozen=True)
class Constants:
    c1: tuple  # (lo, hi)
    c2: tuple
    gamma: tuple
    exact: bool


def exactness_constants(tower: Tower) -> Constants:
    """c1 = s/lambda_R, c2 = 1 + sum_n kappa(n)/beta**n, gamma = c1*c2**2*s.

    With a closed form the intervals collapse to points.
    """
    sys = tower.sys
    s = sys.s
    if tower.lambda_R_closed is not None:
        c1 = s / tower.lambda_R_closed
        c2 = tower.c2_closed  # the terms include the base 1
        g = c1 * c2 * c2 * s
        return Constants((c1, c1), (c2, c2), (g, g), True)
    c1 = (s / tower.lambda_R_upper, s / tower.lambda_R_truncated)
    ib = 1 / sys.beta
    part = ib / ib
    scale = part
    for k in tower.kappa:
        scale = scale * ib
        part = part + k * scale
    tail = tower.tail_bound / (s * s)
    c2 = (part, part + tail)
    g = (c1[0] * c2[0] * c2[0] * s, c1[1] * c2[1] * c2[1] * s)
    return Constants(c1, c2, g, False)


__all__ = [
    "Rect",
    "Tower",
    "TowerPoint",
    "build_tower",
    "tee_step",
    "check_measure_preservation",
    "MeasureReport",
    "return_times",
    "tower_return_time",
    "induced_map",
    "exactness_constants",
    "Constants",
    "word_value",
]
