import csv
import io
import json

import pytest

from artifact.cli import main

E1 = "p cnf 3 1\n1 2 -3 0\n"
UNSAT8 = "p cnf 3 8\n" + "".join(f"{a} {b} {c} 0\n" for a in (1, -1) for b in (2, -2) for c in (3, -3))


@pytest.fixture
def cnf(tmp_path):
    def write(text, name="f.cnf"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return write


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def kv(line):
    return dict(tok.split("=", 1) for tok in line.split())


def test_reduce_verify_extract_pipeline(tmp_path, cnf, capsys):
    out = tmp_path / "o"
    code, text, _ = run(capsys, "reduce", cnf(E1), "--problem", "etsparse", "--field", "q", "--out", out)
    assert code == 0 and kv(text)["budget"] == "29"
    meta = json.loads((out / "instance.json").read_text())["meta"]
    assert meta["params"]["s"] == "29"

    inst = out / "instance.json"
    code, text, _ = run(capsys, "witness", "--instance", inst, "--assignment", "1,0,0", "--out", out)
    assert code == 0
    code, text, _ = run(capsys, "verify", "--instance", inst, "--witness", out / "witness.json", "--out", out)
    assert code == 0 and kv(text)["measured"] == "27"
    code, text, _ = run(capsys, "extract", "--instance", inst, "--witness", out / "witness.json", "--out", out)
    assert code == 0 and kv(text)["assignment"] == "1,0,0"
    for name in ("reduce", "witness", "verify", "extract"):
        manifest = json.loads((out / f"{name}.manifest.json").read_text())
        assert manifest["command"] == name and manifest["seed"] == 0
        assert manifest["outputs"]


def test_verify_failure_exit_1(tmp_path, cnf, capsys):
    out = tmp_path / "o"
    run(capsys, "reduce", cnf(E1), "--problem", "etsparse", "--out", out)
    ident = {"kind": "affine_transform", "assignment": None,
             "images": {v: {"linear": {v: "1"}, "constant": "0"} for v in ("x0", "x1", "x2", "x3", "y1", "y2", "y3")},
             "codomain": ["x0", "x1", "x2", "x3", "y1", "y2", "y3"]}
    (tmp_path / "w.json").write_text(json.dumps(ident))
    code, text, _ = run(capsys, "verify", "--instance", out / "instance.json", "--witness", tmp_path / "w.json",
                        "--out", out)
    assert code == 1
    assert kv(text)["measured"] == "48" and kv(text)["passed"] == "false"


def test_input_errors_exit_2(tmp_path, cnf, capsys):
    code, _, err = run(capsys, "reduce", cnf("p cnf 2 1\n1 1 2 0\n"), "--problem", "etsparse", "--out", tmp_path)
    assert code == 2 and "reason=NormalizationRequired" in err
    code, _, _ = run(capsys, "reduce", cnf("p cnf 2 1\n1 1 2 0\n"), "--problem", "etsparse", "--normalize",
                     "--out", tmp_path)
    assert code == 0
    code, _, err = run(capsys, "reduce", str(tmp_path / "missing.cnf"), "--problem", "etsparse", "--out", tmp_path)
    assert code == 2 and "reason=unreadable_input" in err
    code, _, err = run(capsys, "reduce", cnf(E1), "--problem", "nope")
    assert code == 2 and "bad_arguments" in err
    code, _, err = run(capsys, "reduce", cnf(E1), "--problem", "etsparse", "--field", "f4", "--out", tmp_path)
    assert code == 2
    # the assignment does not satisfy the formula
    run(capsys, "reduce", cnf(E1), "--problem", "etsparse", "--out", tmp_path)
    code, _, err = run(capsys, "witness", "--instance", tmp_path / "instance.json", "--assignment", "0,0,1",
                       "--out", tmp_path)
    assert code == 2 and err.startswith("status=error exit=2")


def test_search_cap_exit_3(tmp_path, cnf, capsys):
    run(capsys, "reduce", cnf(E1), "--problem", "etsparse", "--out", tmp_path)
    code, _, err = run(capsys, "search", "--instance", tmp_path / "instance.json", "--family", "structured",
                       "--coeff-pool=-2,-1,0,1,2", "--cap", "10", "--out", tmp_path)
    assert code == 3 and "reason=cap_exceeded" in err


def test_search_unsat_setsparse(tmp_path, cnf, capsys):
    run(capsys, "reduce", cnf(UNSAT8), "--problem", "setsparse", "--field", "f3", "--out", tmp_path)
    code, text, _ = run(capsys, "search", "--instance", tmp_path / "instance.json", "--family", "all-shifts",
                        "--out", tmp_path)
    status = kv(text)
    assert code == 0 and int(status["min"]) > 2839 and status["within_budget"] == "false"


def test_report(tmp_path, cnf, capsys):
    sat, unsat = tmp_path / "sat", tmp_path / "unsat"
    run(capsys, "reduce", cnf(E1), "--problem", "setsparse", "--field", "f3", "--out", sat)
    run(capsys, "search", "--instance", sat / "instance.json", "--family", "all-shifts", "--out", sat)
    run(capsys, "reduce", cnf(UNSAT8, "u.cnf"), "--problem", "setsparse", "--field", "f3", "--out", unsat)
    run(capsys, "search", "--instance", unsat / "instance.json", "--family", "all-shifts", "--out", unsat)
    code, text, _ = run(capsys, "report", sat / "search.json", unsat / "search.json", "--out", tmp_path)
    assert code == 0 and kv(text)["rows"] == "2"
    rows = list(csv.DictReader(io.StringIO((tmp_path / "report.csv").read_text())))
    by_m = {r["m"]: r for r in rows}
    assert by_m["1"]["ratio"] == "" and int(by_m["1"]["measured_sat"]) <= int(by_m["1"]["s"])
    assert by_m["8"]["floor"] == "729/2839"
    assert by_m["8"]["floor_violation"] == "false"


def test_report_empty_batch(tmp_path, capsys):
    code, _, err = run(capsys, "report", "--out", tmp_path)
    assert code == 2 and "empty_batch" in err


def test_outputs_are_byte_deterministic(tmp_path, cnf, capsys):
    path = cnf(E1)
    for d in ("a", "b"):
        run(capsys, "reduce", path, "--problem", "etsparse-hom", "--field", "f3", "--out", tmp_path / d)
    for name in ("instance.json", "reduce.manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_selftest_subset(tmp_path, capsys):
    code, text, _ = run(capsys, "selftest", "--criteria", "1,8", "--seed", "3", "--out", tmp_path)
    assert code == 0
    assert text.splitlines()[0].startswith("PASS criterion 1")
    assert json.loads((tmp_path / "selftest.json").read_text())["seed"] == 3
