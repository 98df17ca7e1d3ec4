from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import pytest

from greedybeta.cli import main, parse_digits, parse_scalar
from greedybeta.exactnum import GOLDEN, ApproxScalar, QuadExt, make_quadratic
from greedybeta.intervals import fib

GOLD = ["--beta", "golden", "--digits", "0,3,4"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_parse_scalar_forms():
    assert parse_scalar("golden") == GOLDEN
    assert parse_scalar("1,1,2") == make_quadratic(1, 1, 2)
    assert parse_scalar("1+sqrt(2)") == make_quadratic(1, 1, 2)
    assert parse_scalar("3sqrt(5)") == make_quadratic(0, 3, 5)
    assert parse_scalar("2.5") == QuadExt(5) / 2
    assert parse_scalar("7/3") == QuadExt(7) / 3
    assert isinstance(parse_scalar("2.5", "float"), ApproxScalar)
    assert parse_digits("0,1+sqrt(2),3") == [QuadExt(0), make_quadratic(1, 1, 2), QuadExt(3)]


def test_check_exit_codes(capsys):
    code, out, _ = run(capsys, "check", *GOLD)
    assert code == 0
    doc = json.loads(out)
    assert doc["header"]["command"] == "check"
    assert doc["result"]["allowable"] and doc["result"]["condition_main"]
    code, out, _ = run(capsys, "check", "--beta", "2.9", "--digits", "0,1,3")
    assert code == 1 and not json.loads(out)["result"]["allowable"]
    code, out, err = run(capsys, "check", "--beta", "1.0")
    assert code == 2 and out == ""
    assert json.loads(err)["error"] == "UsageError"


def test_usage_errors_are_json(capsys):
    code, _, err = run(capsys, "kappa", *GOLD, "--depth", "65")
    assert code == 2 and json.loads(err)["exit"] == 2
    code, _, err = run(capsys, "nonsense")
    assert code == 2 and "error" in json.loads(err)
    code, _, err = run(capsys, "kappa", *GOLD, "--format", "dot")
    assert code == 2


def test_domain_error_exit_one(capsys):
    code, _, err = run(capsys, "tower", "--beta", "sqrt3", "--digits", "0,1,3")
    assert code == 1 and json.loads(err)["error"] == "WrongCase"


def test_kappa_csv_matches_golden_pattern(capsys):
    code, out, _ = run(capsys, "kappa", *GOLD, "--depth", "18")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# command=kappa config_hash=")
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert len(rows) == 18
    assert int(rows[0]["kappa"]) == 2
    for r in rows[1:]:
        n = int(r["n"])
        assert int(r["kappa"]) == fib((n - 1) // 3 + 2) + fib((n - 2) // 3 + 1)
        assert r["bound_ok"] == "True"


def test_density_json(capsys):
    code, out, _ = run(capsys, "density", *GOLD)
    assert code == 0
    res = json.loads(out)["result"]
    assert res["mode"] == "closed" and res["normalized"]
    assert len(res["phi_terms"]) == 10
    assert len(res["values"]) == 10
    assert res["phi_integral"]["decimal"].startswith("7.84094634875")
    assert any("58 - 31*beta" in n for n in res["notes"])


def test_verify_and_rerun_identical(capsys):
    code, out1, _ = run(capsys, "verify", *GOLD)
    assert code == 0
    res = json.loads(out1)["result"]
    assert res["fixed_point_ok"] and res["transfer_residual"]["decimal"].strip("0.") == ""
    code, out2, _ = run(capsys, "verify", *GOLD)
    assert out1 == out2


def test_config_hash_tracks_arguments(capsys):
    _, a, _ = run(capsys, "kappa", *GOLD, "--depth", "5")
    _, b, _ = run(capsys, "kappa", *GOLD, "--depth", "6")
    _, c, _ = run(capsys, "kappa", *GOLD, "--depth", "5", "--jobs", "3")
    ha, hb, hc = (s.splitlines()[0] for s in (a, b, c))
    assert ha != hb and ha == hc


def test_tower_formats(capsys, tmp_path):
    code, out, _ = run(capsys, "tower", *GOLD, "--depth", "6")
    assert code == 0
    man = json.loads(out)["result"]
    assert man["measure_check"]["area_ok"] and man["constants"]["exact"]
    code, out, _ = run(capsys, "tower", *GOLD, "--depth", "4", "--format", "dot")
    assert code == 0 and out.startswith("// command=tower") and "digraph" in out
    path = tmp_path / "t.csv"
    code, out, _ = run(capsys, "tower", *GOLD, "--depth", "4", "--format", "csv", "--out", str(path))
    assert code == 0 and out == ""
    text = path.read_text()
    assert text.splitlines()[1] == "n,i,word,x_end,height"


def test_orbit_expand(capsys):
    code, out, _ = run(capsys, "orbit", *GOLD, "--x", "2", "--steps", "5")
    assert code == 0
    res = json.loads(out)["result"]
    assert res["digits"][0] == "3"
    code, out, _ = run(capsys, "expand", *GOLD, "--x", "0", "--steps", "4")
    assert json.loads(out)["result"]["digits"] == ["0"] * 4


def test_float_backend(capsys):
    code, out, _ = run(capsys, "density", *GOLD, "--backend", "float")
    assert code == 0
    doc = json.loads(out)
    assert doc["header"]["backend"] == "float"
    code, out, _ = run(capsys, "kappa", *GOLD, "--backend", "float", "--depth", "8")
    assert code == 0


def test_simulate_small(capsys):
    code, out, _ = run(capsys, "simulate", *GOLD, "--iterations", "20000", "--bins", "16", "--jobs", "1", "--samples", "50")
    assert code == 0
    res = json.loads(out)["result"]
    assert res


def test_console_script():
    p = subprocess.run(
        [sys.executable, "-m", "greedybeta.cli", "check", *GOLD], capture_output=True, text=True
    )
    assert p.returncode == 0 and json.loads(p.stdout)["result"]["allowable"]
