"""Greedy beta-expansions with deleted digits: exact arithmetic, fundamental
intervals, the natural-extension tower and invariant densities."""
from __future__ import annotations

from .errors import GreedyBetaError
from .exactnum import GOLDEN, ApproxScalar, QuadExt, compare, make_quadratic, pow_int, to_decimal
from .system import (
    SupportCase,
    check_allowable,
    classify_support,
    expand,
    evaluate_word,
    make_system,
    orbit,
    step,
)
from .intervals import count_levels, decompose_full_word, kappa_table, refine_to
from .density import StepFn, acim, normalize, parry_density, phi, transfer_apply
from .tower import build_tower, tee_step

__version__ = "0.1.0"
