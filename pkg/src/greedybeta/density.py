"""Invariant densities as exact step functions.

The unnormalized density is ``phi = 1 + sum_t w_t * 1_[0,t)`` where ``t`` runs
over image endpoints of non-full fundamental intervals and ``w_t`` sums
``beta**-n`` over all such intervals of rank n with image ``[0, t)``.  In
closed mode the weights solve a finite linear system over the field of beta;
in truncated mode they are partial sums with a certified sup-norm tail.
"""
from __future__ import annotations

import bisect
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import DepthExceeded, NotEventuallyPeriodic, WrongCase, ZeroIntegral
from .exactnum import GOLDEN, ApproxScalar, QuadExt, backend_of, pow_int
from .intervals import Transitions, child_images, count_levels, tail_count_bound, descendant_series
from .system import GreedySystem, SupportCase, classical_orbit

MAX_KEYS = 1024
DENSITY_MAX_DEPTH = 256
DEFAULT_REL_TAIL = 1e-12

NORMALIZATION_NOTE = "normalized against Lebesgue measure: integral of h over [0, s) equals 1"


# -- step functions -------------------------------------------------------------


@dataclass(frozen=True)
class StepFn:
    """Piecewise constant on ``[bp[i], bp[i+1])``; one value per gap."""

    breakpoints: tuple
    values: tuple
    backend: str = "exact"
    normalized: bool = False
    mode: str = "exact"
    tail_bound: object = None
    notes: tuple = field(default=(), compare=False)

    def __post_init__(self):
        bp = self.breakpoints
        if len(bp) != len(self.values) + 1:
            raise ValueError("need exactly one value per gap")
        for a, b in zip(bp, bp[1:]):
            if not a < b:
                raise ValueError("breakpoints must be strictly increasing")

    @property
    def lo(self):
        return self.breakpoints[0]

    @property
    def hi(self):
        return self.breakpoints[-1]

    def _zero(self):
        return self.hi - self.hi

    def gaps(self):
        bp = self.breakpoints
        return [(bp[i], bp[i + 1], v) for i, v in enumerate(self.values)]

    def evaluate(self, x):
        if x < self.lo or not x < self.hi:
            return self._zero()
        i = bisect.bisect_right(self.breakpoints, x) - 1
        return self.values[i]

    def integral(self):
        return sum(((b - a) * v for a, b, v in self.gaps()), self._zero())

    def integrate(self, a, b):
        """Integral over ``[a, b)`` (clipped to the domain)."""
        total = self._zero()
        for l, r, v in self.gaps():
            lo = l if l > a else a
            hi = r if r < b else b
            if lo < hi:
                total = total + (hi - lo) * v
        return total

    def refine(self, points) -> "StepFn":
        """Same function on a breakpoint set enlarged by ``points``."""
        pts = list(self.breakpoints)
        for p in points:
            if self.lo < p < self.hi:
                pts.append(p)
        pts = _sorted_unique(pts)
        vals = tuple(self.evaluate(a) for a in pts[:-1])
        return replace(self, breakpoints=tuple(pts), values=vals)

    def canonical(self) -> "StepFn":
        """Merge neighbouring gaps with equal values."""
        bp = [self.breakpoints[0]]
        vals = []
        for a, b, v in self.gaps():
            if vals and vals[-1] == v:
                bp[-1] = b
            else:
                vals.append(v)
                bp.append(b)
        return replace(self, breakpoints=tuple(bp), values=tuple(vals))

    def _combine(self, other: "StepFn", fn) -> "StepFn":
        if not (self.lo == other.lo and self.hi == other.hi):
            raise ValueError("step functions live on different domains")
        pts = _sorted_unique(list(self.breakpoints) + list(other.breakpoints))
        vals = tuple(fn(self.evaluate(a), other.evaluate(a)) for a in pts[:-1])
        return StepFn(tuple(pts), vals, backend_of(*vals, *pts), False, "derived")

    def __add__(self, other):
        return self._combine(other, lambda u, v: u + v)

    def __sub__(self, other):
        return self._combine(other, lambda u, v: u - v)

    def scale(self, c) -> "StepFn":
        return replace(self, values=tuple(c * v for v in self.values), normalized=False)

    def sup_abs(self):
        return max(abs(v) for v in self.values)

    def same_function(self, other: "StepFn") -> bool:
        a, b = self.canonical(), other.canonical()
        return a.breakpoints == b.breakpoints and a.values == b.values

    def to_json(self, digits: int = 30) -> dict:
        from .exactnum import scalar_to_json

        return {
            "breakpoints": [scalar_to_json(b, digits) for b in self.breakpoints],
            "values": [scalar_to_json(v, digits) for v in self.values],
            "normalized": self.normalized,
            "mode": self.mode,
            "backend": self.backend,
            "tail_bound": None if self.tail_bound is None else scalar_to_json(self.tail_bound, digits),
            "notes": list(self.notes),
        }


def _sorted_unique(pts: list) -> list:
    pts = sorted(pts)
    out = []
    for p in pts:
        if not out or not out[-1] == p:
            out.append(p)
    return out


def constant(value, lo, hi) -> StepFn:
    return StepFn((lo, hi), (value,), backend_of(value, lo, hi))


def from_indicators(lo, hi, base, terms: Sequence) -> StepFn:
    """``base + sum w * 1_[lo, t)`` for ``(t, w)`` in ``terms``."""
    ends = _sorted_unique([t for t, _ in terms if lo < t < hi] + [lo, hi])
    vals = []
    for right in ends[1:]:
        v = base
        for t, w in terms:
            if not t < right:
                v = v + w
        vals.append(v)
    return StepFn(tuple(ends), tuple(vals), backend_of(base, *ends))


def normalize(f: StepFn) -> StepFn:
    total = f.integral()
    if not total > 0:
        raise ZeroIntegral("cannot normalize a function with non-positive integral")
    g = replace(f, values=tuple(v / total for v in f.values), normalized=True)
    if f.tail_bound is not None:
        g = replace(g, tail_bound=f.tail_bound / total)
    return g


# -- linear algebra over the scalar field ----------------------------------------


def solve_linear(M: list, b: list) -> list:
    """Gaussian elimination with exact pivots; ``M`` is a list of rows."""
    n = len(M)
    A = [list(row) + [b[i]] for i, row in enumerate(M)]
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular system")
        A[col], A[piv] = A[piv], A[col]
        inv = 1 / A[col][col]
        A[col] = [v * inv for v in A[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [u - f * v for u, v in zip(A[r], A[col])]
    return [A[r][n] for r in range(n)]


# -- phi -------------------------------------------------------------------------


@dataclass(frozen=True)
class PhiResult:
    fn: StepFn
    terms: tuple  # (image end t, weight) including the base term (s, 1)
    tail_sup_bound: object
    mode: str
    depth: Optional[int] = None


def _close_keys(sys: GreedySystem, trans: Transitions, max_keys: int):
    """Breadth-first closure of the image endpoints reachable from the root."""
    first = [trans.slot(e) for _, e, full in child_images(sys, sys.s) if not full]
    seen = set(first)
    queue = list(first)
    while queue:
        i = queue.pop(0)
        for j in trans.kids(i)[0]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
                if len(seen) > max_keys:
                    raise NotEventuallyPeriodic(
                        f"more than {max_keys} distinct image endpoints; "
                        "critical orbits do not look eventually periodic"
                    )
    return first, sorted(seen)


def closed_weights(sys: GreedySystem, max_keys: int = MAX_KEYS) -> list:
    """Exact ``(t, w_t)`` for every reachable image endpoint.

    With ``A[u][v]`` the number of non-full children with endpoint u of a node
    with endpoint v, the weight vector solves ``(I - A/beta) w = v1/beta``.
    """
    trans = Transitions(sys)
    first, slots = _close_keys(sys, trans, max_keys)
    pos = {sl: k for k, sl in enumerate(slots)}
    n = len(slots)
    one = sys.beta / sys.beta
    zero = one - one
    ib = one / sys.beta
    M = [[zero] * n for _ in range(n)]
    for k in range(n):
        M[k][k] = one
    for v, sl in enumerate(slots):
        for kid in trans.kids(sl)[0]:
            M[pos[kid]][v] = M[pos[kid]][v] - ib
    rhs = [zero] * n
    for sl in first:
        rhs[pos[sl]] = rhs[pos[sl]] + ib
    w = solve_linear(M, rhs)
    return [(trans.index.keys[sl], w[k]) for k, sl in enumerate(slots)]


def truncated_weights(sys: GreedySystem, N: int):
    """Partial weights over ranks 1..N and ``kappa(N)``."""
    rows, weights, trans = count_levels(sys, N)
    ib = 1 / sys.beta
    scale = ib / ib
    sums = {}
    for w in weights:
        scale = scale * ib
        for sl, c in w.items():
            sums[sl] = sums[sl] + c * scale if sl in sums else c * scale
    terms = [(trans.index.keys[sl], v) for sl, v in sums.items()]
    return terms, rows[-1].kappa


def truncation_depth(sys: GreedySystem, rel: float = DEFAULT_REL_TAIL, cap: int = DENSITY_MAX_DEPTH) -> int:
    """Smallest N whose certified kappa tail is below ``rel`` (phi >= 1, so this is relative)."""
    rows, _, _ = count_levels(sys, cap)
    x = float(1 / sys.beta)
    ser = descendant_series(sys, 1 / sys.beta)
    ser = None if ser is None else float(ser)
    target = QuadExt(Fraction(rel).limit_denominator(10**18))
    for r in rows:
        if ser is not None and r.kappa * x**r.n * ser > rel * 0.5:
            continue
        if tail_count_bound(sys, r.n, r.kappa) < target:
            return r.n
    raise DepthExceeded(f"tail bound does not reach {rel} by depth {cap}")


def phi(sys: GreedySystem, mode: str = "closed", N: Optional[int] = None) -> PhiResult:
    """Unnormalized density on ``[0, s)`` as a step function.

    ``mode`` is ``closed`` (exact, needs finitely many image endpoints) or
    ``truncated`` (ranks up to ``N``; default depth from :func:`truncation_depth`).
    """
    zero = sys.s - sys.s
    one = sys.s / sys.s
    if mode == "closed":
        terms = [(t, w) for t, w in closed_weights(sys) if t > 0]
        tail, depth = zero, None
    elif mode == "truncated":
        if N is None:
            N = truncation_depth(sys)
        if N < 1 or N > DENSITY_MAX_DEPTH:
            raise DepthExceeded(f"density depth must lie in 1..{DENSITY_MAX_DEPTH}")
        terms, kappa_N = truncated_weights(sys, N)
        terms = [(t, w) for t, w in terms if t > 0]
        tail, depth = tail_count_bound(sys, N, kappa_N), N
    else:
        raise ValueError(f"unknown mode {mode!r}")
    terms = sorted(terms, key=lambda tw: tw[0])
    fn = from_indicators(zero, sys.s, one, terms)
    fn = replace(fn, mode=mode, tail_bound=tail, backend=sys.backend)
    return PhiResult(fn, tuple(terms) + ((sys.s, one),), tail, mode, depth)


# -- transfer operator --------------------------------------------------------------


def transfer_apply(sys: GreedySystem, f: StepFn) -> StepFn:
    """``(Lf)(x) = sum_j f((x + a_j)/beta)/beta`` over branches whose image covers x."""
    beta = sys.beta
    pts = [f.lo, f.hi]
    branches = []
    for c in sys.cells:
        end = beta * c.right - c.digit
        branches.append((c, end))
        if end < f.hi:
            pts.append(end)
        for b in f.breakpoints:
            if c.left < b < c.right:
                pts.append(beta * b - c.digit)
    pts = _sorted_unique(pts)
    vals = []
    for a, b in zip(pts, pts[1:]):
        mid = (a + b) / 2
        v = f._zero()
        for c, end in branches:
            if mid < end:
                v = v + f.evaluate((mid + c.digit) / beta) / beta
        vals.append(v)
    out = StepFn(tuple(pts), tuple(vals), f.backend, False, f.mode, f.tail_bound)
    return out.canonical()


def transfer_residual(sys: GreedySystem, f: StepFn):
    """Sup norm of ``Lf - f``."""
    return (transfer_apply(sys, f) - f).sup_abs()


# -- classical (Parry) density ------------------------------------------------------


def parry_density(beta, N: Optional[int] = None, orbit_cap: int = 300) -> StepFn:
    """Normalized Parry density on ``[0, 1)`` from the orbit of 1 under T_c.

    Exact when the orbit is detected as eventually periodic; otherwise the sum
    is cut at ``N`` with tail ``beta**-N/(beta - 1)`` before normalization.
    """
    beta = beta if not isinstance(beta, (int, Fraction)) else QuadExt(beta)
    one = beta / beta
    zero = one - one
    if math.floor(beta) == beta:
        return constant(one, zero, one)
    ib = one / beta
    rec = classical_orbit(beta, one, orbit_cap if N is None else N)
    terms = []
    if rec.period is not None and N is None:
        pre, per = rec.preperiod, rec.period
        geo = one / (one - pow_int(ib, per))
        for n in range(pre + per):
            w = pow_int(ib, n) * (geo if n >= pre else one)
            terms.append((rec.values[n], w))
        mode, tail = "closed", zero
    else:
        if N is None:
            N = _parry_depth(beta)
            rec = classical_orbit(beta, one, N)
        for n in range(N + 1):
            terms.append((rec.values[n], pow_int(ib, n)))
        mode, tail = "truncated", pow_int(ib, N) / (beta - 1)
    merged = {}
    for t, w in terms:
        if t > 0:
            merged[t] = merged[t] + w if t in merged else w
    fn = from_indicators(zero, one, zero, sorted(merged.items(), key=lambda tw: tw[0]))
    fn = replace(fn, mode=mode, tail_bound=tail)
    return normalize(fn)


def _parry_depth(beta, rel: float = DEFAULT_REL_TAIL) -> int:
    b = float(beta)
    return max(1, math.ceil(math.log(1 / (rel * (b - 1))) / math.log(b)))


def rescale(f: StepFn, factor) -> StepFn:
    """``x -> f(x/factor)/factor`` on ``[0, factor*hi)``; preserves the integral."""
    bp = tuple(factor * b for b in f.breakpoints)
    vals = tuple(v / factor for v in f.values)
    tb = None if f.tail_bound is None else f.tail_bound / factor
    return replace(f, breakpoints=bp, values=vals, tail_bound=tb)


# -- acim ---------------------------------------------------------------------------


def _is_golden_example(sys: GreedySystem) -> bool:
    return sys.exact and sys.beta.d == 5 and sys.beta == GOLDEN and tuple(sys.digits) == (0, 3, 4)


GOLDEN_NOTE = (
    "normalizer: integral of phi = 58 - 31*beta = (27 - 4*beta)/beta**2; "
    "the closed form in circulation prints 27 - 4*beta, which drops the 1/beta**2 factor"
)


def acim(sys: GreedySystem, mode: Optional[str] = None, N: Optional[int] = None) -> StepFn:
    """Normalized invariant density, dispatched on the support case.

    ``mode=None`` tries closed mode and falls back to truncation.
    """
    case = sys.support_case
    if case in (SupportCase.CLASSICAL_COMPLETE, SupportCase.ISO_CLASSICAL):
        if case is SupportCase.ISO_CLASSICAL and math.floor(sys.beta) > 1:
            raise WrongCase("rescaled classical route needs beta < 2")
        h = parry_density(sys.beta, N=N if mode == "truncated" else None)
        if case is SupportCase.ISO_CLASSICAL:
            h = rescale(h, sys.s)
        return replace(h, notes=(NORMALIZATION_NOTE, "classical Parry density") + (
            ("rescaled from [0, 1) to [0, a1)",) if case is SupportCase.ISO_CLASSICAL else ()
        ))
    if mode is None:
        try:
            res = phi(sys, "closed")
        except NotEventuallyPeriodic:
            res = phi(sys, "truncated", N)
    else:
        res = phi(sys, mode, N)
    h = normalize(res.fn)
    if res.mode == "truncated":
        # |h - h_N| <= tail/I_N + sup(phi_N) * tail * s / I_N**2
        I = res.fn.integral()
        bound = res.tail_sup_bound / I + res.fn.sup_abs() * res.tail_sup_bound * sys.s / (I * I)
        h = replace(h, tail_bound=bound)
    notes = [NORMALIZATION_NOTE, f"phi mode {res.mode}"]
    if _is_golden_example(sys):
        notes.append(GOLDEN_NOTE)
    return replace(h, notes=tuple(notes))


# -- Monte Carlo --------------------------------------------------------------------


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    density: np.ndarray
    reference: np.ndarray
    l1: float
    seed: int
    iterations: int


def _float_map(sys: GreedySystem):
    beta = float(sys.beta)
    lefts = [float(c.left) for c in sys.cells]
    digits = [float(c.digit) for c in sys.cells]
    return beta, lefts, digits, float(sys.s)


def orbit_samples(sys: GreedySystem, iterations: int, seed: int, x0=None, burn_in: int = 1000) -> np.ndarray:
    """Float64 orbit of T.

    For integer beta with integer digits the float orbit collapses after about
    53 steps, so the digit shifted out at the bottom is refilled at random; this
    is exactly the law of the orbit of a uniformly random real.
    """
    rng = np.random.default_rng(seed)
    beta, lefts, digits, s = _float_map(sys)
    refill = float(sys.beta) == math.floor(sys.beta) and all(d == int(d) for d in digits)
    x = float(x0) if x0 is not None else rng.random() * s
    total = iterations + burn_in
    noise = rng.random(total) * s * beta ** -40 if refill else None
    out = np.empty(iterations)
    nc = len(lefts)
    for k in range(total):
        j = bisect.bisect_right(lefts, x) - 1
        x = beta * x - digits[j if j < nc else nc - 1]
        if refill:
            x += noise[k]
            if x >= s:
                x -= s
        if x < 0.0:
            x = 0.0
        elif x >= s:
            x = math.nextafter(s, 0.0)
        if k >= burn_in:
            out[k - burn_in] = x
    return out


def birkhoff_histogram(
    sys: GreedySystem,
    iterations: int = 10**6,
    bins: int = 64,
    seed: int = 0,
    x0=None,
    reference: Optional[StepFn] = None,
) -> Histogram:
    """Occupation histogram on equal-width bins and its L1 distance to the acim.

    ``l1 = sum_i width * |hist_i - mean of h over bin i|``.
    """
    if iterations < 10**4 or bins < 8:
        raise ValueError("need iterations >= 1e4 and bins >= 8")
    h = reference if reference is not None else acim(sys)
    xs = orbit_samples(sys, iterations, seed, x0)
    s = float(sys.s)
    counts, edges = np.histogram(xs, bins=bins, range=(0.0, s))
    width = s / bins
    dens = counts / (iterations * width)
    ref = np.empty(bins)
    for i in range(bins):
        a = sys.s * Fraction(i, bins)
        b = sys.s * Fraction(i + 1, bins)
        ref[i] = float(h.integrate(a, b)) / width
    l1 = float(np.sum(np.abs(dens - ref)) * width)
    return Histogram(edges, dens, ref, l1, seed, iterations)


def _hist_job(args):
    sys, iterations, bins, seed, ref = args
    return birkhoff_histogram(sys, iterations, bins, seed, reference=ref)


def birkhoff_runs(sys: GreedySystem, seeds: Sequence[int], iterations: int = 10**6, bins: int = 64, jobs: Optional[int] = None) -> list:
    """Independent histograms, one per seed; runs in worker processes when ``jobs > 1``."""
    ref = acim(sys)
    args = [(sys, iterations, bins, sd, ref) for sd in seeds]
    jobs = jobs or os.cpu_count() or 1
    if jobs <= 1 or len(args) <= 1:
        return [_hist_job(a) for a in args]
    with ProcessPoolExecutor(max_workers=min(jobs, len(args))) as ex:
        return list(ex.map(_hist_job, args))


__all__ = [
    "StepFn",
    "PhiResult",
    "constant",
    "from_indicators",
    "normalize",
    "phi",
    "closed_weights",
    "truncation_depth",
    "transfer_apply",
    "transfer_residual",
    "parry_density",
    "rescale",
    "acim",
    "birkhoff_histogram",
    "birkhoff_runs",
    "Histogram",
    "solve_linear",
]
