import math
import pathlib

import pytest

from statepop.cli import main

PROBLEMS = pathlib.Path(__file__).resolve().parent.parent / "problems"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def parse_report(text):
    return dict(line.split(": ", 1) for line in text.splitlines() if ": " in line)


def test_solve_chsh(capsys):
    code, out, err = run(capsys, "solve", PROBLEMS / "chsh.spop", "--level", "1")
    rep = parse_report(out)
    assert code == 0
    assert abs(float(rep["bound"]) - 2 * math.sqrt(2)) < 1e-5
    assert rep["status"] == "optimal"
    assert "time" in err and "time" not in out


def test_report_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    run(capsys, "solve", PROBLEMS / "exa3.spop", "--report", a, "--extract")
    run(capsys, "solve", PROBLEMS / "exa3.spop", "--report", b, "--extract")
    assert a.read_bytes() == b.read_bytes()
    rep = parse_report(a.read_text())
    assert rep["flat"] == "yes" and rep["model_dimension"] == "4" and rep["certified"] == "yes"


def test_parse_error_exit_code(capsys):
    code, out, err = run(capsys, "solve", PROBLEMS / "bad.spop")
    assert code == 3
    assert "2:" in err


def test_builtin_prefix_and_json(capsys):
    import json
    code, out, _ = run(capsys, "solve", "builtin:chsh", "--json")
    assert code == 0
    assert json.loads(out)["blocks"] == [9]


def test_export_then_import_matches_direct(capsys, tmp_path):
    f = tmp_path / "chsh.dat-s"
    code, out, _ = run(capsys, "export", PROBLEMS / "covariance.spop", "--level", "1", "-o", f)
    assert code == 0
    const = float(parse_report(out)["objective_constant"])
    code, out, _ = run(capsys, "sdpa", f)
    p = float(parse_report(out)["primal_objective"])
    code, out, _ = run(capsys, "solve", PROBLEMS / "covariance.spop", "--level", "1")
    direct = float(parse_report(out)["bound"])
    # maximization: bound = p - constant
    assert abs((p - const) - direct) < 1e-7


def test_export_flag_on_solve(capsys, tmp_path):
    f = tmp_path / "x.dat-s"
    run(capsys, "solve", PROBLEMS / "chsh.spop", "--export-sdpa", f)
    assert f.read_text().splitlines()[0] == "20"


def test_certify(capsys):
    code, out, _ = run(capsys, "certify", PROBLEMS / "cauchy_schwarz.cert")
    assert code == 0 and out.strip() == "EXACT: verified"
    code, out, _ = run(capsys, "certify", PROBLEMS / "adjugate_minor.cert")
    assert code == 0


def test_certify_rejects(capsys, tmp_path):
    f = tmp_path / "bad.cert"
    f.write_text("target: s(x1^2)*s(x2^2) - s(x1*x2)^2\nnumerator: s(x1^2)*x2 - s(x1*x2)*x1\n")
    code, out, _ = run(capsys, "certify", f)
    assert code == 1 and "rejected" in out


def test_verify_model(capsys):
    code, out, _ = run(capsys, "verify-model", PROBLEMS / "exa3.spop", PROBLEMS / "exa3_model.txt")
    rep = parse_report(out)
    assert code == 0 and rep["feasible"] == "yes"
    assert abs(float(rep["objective"]) - 3.51148) < 5e-4


def test_examples_list_and_run(capsys):
    code, out, _ = run(capsys, "examples", "list")
    assert code == 0 and "uffink" in out
    code, out, _ = run(capsys, "examples", "run", "covariance")
    row = out.splitlines()[1].split()
    assert code == 0 and row[0] == "covariance" and abs(float(row[2]) - 5) < 1e-4


def test_missing_level(capsys, tmp_path):
    f = tmp_path / "p.spop"
    f.write_text("scenario c { parties x y; sources s -> x y; inputs x:1 y:1 }\nobjective s(x1*y1)\n")
    code, _, err = run(capsys, "solve", f)
    assert code == 1 and "level" in err
