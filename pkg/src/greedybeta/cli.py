"""Command line front end: ``greedybeta <command> --beta ... --digits ...``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import random
import re
import sys
from fractions import Fraction
from typing import Optional

from . import density, intervals, system, tower
from .errors import GreedyBetaError, NonSquareFreeRadicand, NegativeRadicand
from .exactnum import ApproxScalar, QuadExt, make_quadratic, scalar_to_json, to_decimal

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE = 0, 1, 2

NAMED = {
    "golden": (Fraction(1, 2), Fraction(1, 2), 5),
    "sqrt2": (0, 1, 2),
    "sqrt3": (0, 1, 3),
    "sqrt7": (0, 1, 7),
    "one_plus_sqrt2": (1, 1, 2),
}

_SURD = re.compile(r"^\s*([+-]?[\d./]+)?\s*([+-])?\s*([\d./]*)\s*\*?\s*sqrt\(?(\d+)\)?\s*$")


class UsageError(Exception):
    pass


def parse_scalar(text: str, backend: str = "exact"):
    """Named constant, ``p,q,d``, ``a+bsqrt(d)``, a decimal or a rational."""
    t = text.strip()
    try:
        if t in NAMED:
            v = make_quadratic(*NAMED[t])
        elif t.count(",") == 2:
            p, q, d = t.split(",")
            v = make_quadratic(Fraction(p), Fraction(q), int(d))
        elif "sqrt" in t:
            m = _SURD.match(t)
            if not m:
                raise UsageError(f"cannot parse {text!r}")
            a, sign, b, d = m.groups()
            if sign is None and a is not None and not b:
                # "3sqrt(5)" style: the leading number is the coefficient
                a, b = None, a
            coef = Fraction(b) if b else Fraction(1)
            if sign == "-":
                coef = -coef
            v = make_quadratic(Fraction(a) if a else 0, coef, int(d))
        else:
            v = QuadExt(Fraction(t))
    except (NonSquareFreeRadicand, NegativeRadicand) as exc:
        raise UsageError(str(exc)) from exc
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"cannot parse {text!r}") from exc
    return ApproxScalar(v) if backend == "float" else v


def parse_digits(text: str, backend: str = "exact") -> list:
    parts = [p for p in re.split(r"[;\s]+|,(?![^()]*\))", text) if p]
    if not parts:
        raise UsageError("empty digit list")
    return [parse_scalar(p, backend) for p in parts]


# -- output ------------------------------------------------------------------------


def config_hash(args) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "jobs", "cfg_hash")}
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def header(args, backend: str) -> dict:
    return {"command": args.command, "config_hash": args.cfg_hash, "backend": backend}


def emit(args, text: str):
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def emit_json(args, backend: str, result) -> None:
    doc = {"header": header(args, backend), "result": result}
    emit(args, json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def emit_csv(args, backend: str, columns: list, rows: list) -> None:
    buf = io.StringIO()
    h = header(args, backend)
    buf.write(f"# command={h['command']} config_hash={h['config_hash']} backend={h['backend']}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    emit(args, buf.getvalue())


def sj(x):
    return scalar_to_json(x, 20)


def digit_str(b) -> str:
    if isinstance(b, QuadExt):
        return str(b)
    return to_decimal(b, 12).rstrip("0").rstrip(".")


def dec(x, digits: int = 20) -> str:
    return to_decimal(x, digits)


def _system(args):
    return system.make_system(args.beta, args.digits)


# -- commands ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    beta, digits = args.beta, args.digits
    rep = system.check_allowable(beta, digits)
    result = {
        "cond_i": rep.cond_i,
        "cond_ii": rep.cond_ii,
        "shortcut_used": rep.shortcut_used,
        "allowable": rep.allowable,
    }
    backend = "float" if isinstance(beta, ApproxScalar) else "exact"
    if rep.allowable:
        sysm = system.make_system(beta, digits)
        result["system"] = sysm.descriptor()
        if len(sysm.digits) == 3:
            result["condition_main"] = system.condition_main(sysm.beta, sysm.a1, sysm.a2)
        backend = sysm.backend
    emit_json(args, backend, result)
    return EXIT_OK if rep.allowable else EXIT_NEGATIVE


def _start_point(args, sysm):
    return parse_scalar(args.x, sysm.backend) if args.x is not None else sysm.s - sysm.s


def cmd_orbit(args) -> int:
    sysm = _system(args)
    rec = system.orbit(sysm, _start_point(args, sysm), args.steps)
    if args.format == "csv":
        rows = [
            [k, dec(v), digit_str(rec.digits[k]) if k < len(rec.digits) else ""]
            for k, v in enumerate(rec.values)
        ]
        emit_csv(args, sysm.backend, ["step", "value_decimal", "digit"], rows)
        return EXIT_OK
    emit_json(
        args,
        sysm.backend,
        {
            "system": sysm.descriptor(),
            "start": sj(rec.start),
            "values": [sj(v) for v in rec.values],
            "digits": [digit_str(b) for b in rec.digits],
            "preperiod": rec.preperiod,
            "period": rec.period,
        },
    )
    return EXIT_OK


def cmd_expand(args) -> int:
    sysm = _system(args)
    x = _start_point(args, sysm)
    word = system.expand(sysm, x, args.steps)
    if args.format == "csv":
        emit_csv(args, sysm.backend, ["position", "digit"], [[k + 1, digit_str(b)] for k, b in enumerate(word)])
        return EXIT_OK
    emit_json(args, sysm.backend, {"x": sj(x), "digits": [digit_str(b) for b in word]})
    return EXIT_OK


def cmd_kappa(args) -> int:
    sysm = _system(args)
    N = args.depth or 18
    rows = intervals.kappa_table(sysm, N)
    if args.format == "csv":
        emit_csv(
            args,
            sysm.backend,
            ["n", "kappa", "kappa1", "kappa2", "kappa_bar", "bound", "bound_ok"],
            [[r.n, r.kappa, r.kappa1, r.kappa2, r.kappa_bar, r.bound if r.bound is not None else "", r.bound_ok if r.bound_ok is not None else ""] for r in rows],
        )
        return EXIT_OK
    result = {"rows": [r.__dict__ for r in rows]}
    ok = True
    if sysm.support_case is system.SupportCase.MAIN_CASE:
        rep = intervals.check_kappa_bounds(sysm, N)
        result["bounds"] = [c.__dict__ for c in rep.checks]
        result["recursion_ok"] = rep.recursion_ok
        ok = rep.ok
    sums = intervals.dn_partial_sums(sysm, N)
    result["dn_partial_sums"] = [
        {"n": p.n, "covered": sj(p.covered), "residual": sj(p.residual), "bound": sj(p.bound), "ok": p.ok}
        for p in sums
    ]
    ok = ok and all(p.ok for p in sums)
    emit_json(args, sysm.backend, result)
    return EXIT_OK if ok else EXIT_NEGATIVE


def cmd_tower(args) -> int:
    sysm = _system(args)
    N = args.depth or 12
    tw = tower.build_tower(sysm, N)
    if args.format == "dot":
        h = header(args, sysm.backend)
        emit(args, f"// command={h['command']} config_hash={h['config_hash']} backend={h['backend']}\n" + tw.to_dot())
        return EXIT_OK
    rep = tower.check_measure_preservation(tw, N - 1)
    const = tower.exactness_constants(tw)
    if args.format == "csv":
        rows = [[r.n, r.i, "".join(digit_str(b) for b in r.word), dec(r.x_end), dec(r.height)] for r in tw.rects()]
        emit_csv(args, sysm.backend, ["n", "i", "word", "x_end", "height"], rows)
        return EXIT_OK if rep.ok else EXIT_NEGATIVE
    man = tw.manifest()
    man["measure_check"] = {
        "levels_checked": rep.levels_checked,
        "area_ok": rep.area_ok,
        "targets_ok": rep.targets_ok,
        "bands_ok": rep.bands_ok,
        "bands_disjoint": rep.bands_disjoint,
    }
    man["constants"] = {
        "exact": const.exact,
        "c1": [sj(v) for v in const.c1],
        "c2": [sj(v) for v in const.c2],
        "gamma": [sj(v) for v in const.gamma],
    }
    emit_json(args, sysm.backend, man)
    return EXIT_OK if rep.ok else EXIT_NEGATIVE


def cmd_density(args) -> int:
    sysm = _system(args)
    mode = None if args.mode == "auto" else args.mode
    h = density.acim(sysm, mode, args.depth)
    if args.format == "csv":
        rows = [[dec(a), dec(b), dec(v)] for a, b, v in h.gaps()]
        emit_csv(args, sysm.backend, ["left", "right", "value_decimal"], rows)
        return EXIT_OK
    result = h.to_json(20)
    if sysm.support_case not in intervals.CLASSICAL_CASES:
        res = density.phi(sysm, h.mode if h.mode in ("closed", "truncated") else "closed", args.depth)
        result["phi_terms"] = [{"end": sj(t), "weight": sj(w)} for t, w in res.terms]
        result["phi_integral"] = sj(res.fn.integral())
    emit_json(args, sysm.backend, result)
    return EXIT_OK


def cmd_verify(args) -> int:
    sysm = _system(args)
    result = {"system": sysm.descriptor()}
    ok = True
    if sysm.support_case is system.SupportCase.MAIN_CASE:
        checks = system.verify_lemmas(sysm)
        result["lemmas"] = [c.__dict__ for c in checks]
        ok = all(c.passed for c in checks)
        rep = intervals.check_kappa_bounds(sysm, args.depth or 18)
        result["kappa_bounds_ok"] = rep.ok
        ok = ok and rep.ok
    mode = None if args.mode == "auto" else args.mode
    h = density.acim(sysm, mode, args.depth)
    res = density.transfer_residual(sysm, h)
    result["density_mode"] = h.mode
    result["transfer_residual"] = sj(res)
    result["integral"] = sj(h.integral())
    if h.mode == "closed":
        fixed = res == 0
    else:
        fixed = res <= 2 * h.tail_bound
        result["tail_bound"] = sj(h.tail_bound)
    result["fixed_point_ok"] = fixed
    ok = ok and fixed
    emit_json(args, sysm.backend, result)
    return EXIT_OK if ok else EXIT_NEGATIVE


def cmd_simulate(args) -> int:
    sysm = _system(args)
    seeds = [args.seed + k for k in range(args.runs)]
    runs = density.birkhoff_runs(sysm, seeds, args.iterations, args.bins, args.jobs)
    result = {
        "iterations": args.iterations,
        "bins": args.bins,
        "runs": [{"seed": r.seed, "l1": round(r.l1, 12)} for r in runs],
    }
    if sysm.support_case in tower.TOWER_CASES and sysm.exact:
        rng = random.Random(args.seed)
        den = 10**9
        total = 0
        for _ in range(args.samples):
            x = sysm.s * Fraction(rng.randrange(den), den)
            total += tower.return_times(sysm, x, 1)[0]
        tw = tower.build_tower(sysm, 1)
        lam = tw.lambda_R_closed
        result["return_time"] = {
            "samples": args.samples,
            "mean_r1": total / args.samples,
            "kac_expected": None if lam is None else float(lam / (sysm.s * sysm.s)),
        }
    if args.format == "csv":
        rows = []
        for r in runs:
            for k in range(len(r.density)):
                rows.append([r.seed, k, repr(float(r.edges[k])), repr(float(r.edges[k + 1])), repr(float(r.density[k])), repr(float(r.reference[k]))])
        emit_csv(args, "float", ["seed", "bin", "left", "right", "empirical", "exact"], rows)
        return EXIT_OK
    emit_json(args, "float", result)
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "orbit": cmd_orbit,
    "expand": cmd_expand,
    "kappa": cmd_kappa,
    "tower": cmd_tower,
    "density": cmd_density,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="greedybeta", description="Greedy beta-expansions with deleted digits.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("--beta", required=True, help="golden, sqrt2, sqrt3, sqrt7, one_plus_sqrt2, p,q,d, a+bsqrt(d), or a decimal/rational")
        c.add_argument("--digits", default=None, help="comma-separated digits (default: complete digit set)")
        c.add_argument("--depth", type=int, default=None)
        c.add_argument("--mode", choices=["auto", "closed", "truncated"], default="auto")
        c.add_argument("--seed", type=int, default=0)
        c.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
        c.add_argument("--format", choices=["json", "csv", "dot"], default="csv" if name == "kappa" else "json")
        c.add_argument("--out", default=None)
        c.add_argument("--backend", choices=["exact", "float"], default="exact")
        c.add_argument("--x", default=None, help="start point for orbit/expand")
        c.add_argument("--steps", type=int, default=20)
        c.add_argument("--iterations", type=int, default=10**6)
        c.add_argument("--bins", type=int, default=64)
        c.add_argument("--runs", type=int, default=1)
        c.add_argument("--samples", type=int, default=1000)
    return p


def _prepare(args):
    args.beta = parse_scalar(args.beta, args.backend)
    if not args.beta > 1:
        raise UsageError("beta must exceed 1")
    if args.digits is None:
        args.digits = [QuadExt(k) for k in range(math.floor(args.beta) + 1)]
        if args.backend == "float":
            args.digits = [ApproxScalar(d) for d in args.digits]
    else:
        args.digits = parse_digits(args.digits, args.backend)
    if args.depth is not None and not 1 <= args.depth <= intervals.MAX_DEPTH:
        if not (args.command in ("density", "verify") and args.depth <= density.DENSITY_MAX_DEPTH):
            raise UsageError(f"depth must lie in 1..{intervals.MAX_DEPTH}")
    if args.format == "dot" and args.command != "tower":
        raise UsageError("dot output is only available for the tower command")


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit": code}) + "\n")
    return code


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        raw = list(sys.argv[1:] if argv is None else argv)
        args = parser.parse_args(raw)
        # hash the configuration as typed, before parsing scalars
        args.cfg_hash = config_hash(args)
        _prepare(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "UsageError", str(exc))
    try:
        return COMMANDS[args.command](args)
    except GreedyBetaError as exc:
        return _fail(EXIT_NEGATIVE, exc.code, str(exc))


if __name__ == "__main__":
    sys.exit(main())
