import csv
import io
import json

import pytest

from cprigid import numeric_harness
from cprigid.cli import main
from cprigid.numeric_harness import CheckSpec, Outcome


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def failing_suite(params):
    return [CheckSpec("broken.always", "exact", lambda: Outcome("x", False))]


def test_verify_exact_suite_passes(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "h0", "--m", "sym")
    assert code == 0
    rep = json.loads(out)
    assert rep["summary"]["fail"] == 0 and rep["summary"]["pass"] >= 4
    assert rep["params"] == {"m": "sym", "n2": 3, "suites": ["h0"]}


def test_failing_check_exits_1(capsys, monkeypatch):
    numeric_harness._load()
    monkeypatch.setitem(numeric_harness._SUITES, "_broken", (failing_suite, False))
    code, out, _ = run(capsys, "verify", "--suite", "_broken", "--m", "sym")
    assert code == 1
    assert json.loads(out)["summary"] == {"pass": 0, "fail": 1}


@pytest.mark.parametrize(
    "argv",
    [
        ("verify", "--m", "1"),
        ("verify", "--m", "x"),
        ("verify", "--suite", "nope"),
        ("verify", "--n2", "0"),
        ("verify", "--samples", "5", "--suite", "h0"),
        ("verify", "--fd-step", "1.0", "--suite", "h0"),
        ("verify", "--format", "xml"),
        ("show", "--object", "nothing"),
        ("show", "--object", "psi", "--n2", "0"),
        (),
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_m1_message(capsys):
    code, _, err = run(capsys, "verify", "--m", "1")
    assert code == 2
    assert "m must be >= 2" in err and "CP^1" in err


def test_unwritable_out_path(capsys, tmp_path):
    code, _, err = run(capsys, "verify", "--suite", "h0", "--m", "sym", "--out", str(tmp_path / "missing" / "r.json"))
    assert code == 2 and "cannot write" in err


def test_json_round_trip_and_csv_agree(capsys, tmp_path):
    path = tmp_path / "r.json"
    code, _, err = run(capsys, "verify", "--suite", "obstruction", "--m", "2", "--samples", "2000", "--out", str(path))
    assert code == 0 and "passed" in err
    text = path.read_text(encoding="utf-8")
    rep = json.loads(text)
    assert json.dumps(rep, indent=2, ensure_ascii=False) + "\n" == text
    assert rep["schema_version"] == 1
    assert rep["closed_forms"]["total"] == "-32/35"
    assert rep["config"]["samples"] == 2000 and "workers" not in rep["config"]

    code, out, _ = run(capsys, "verify", "--suite", "obstruction", "--m", "2", "--samples", "2000", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["id"] for r in rows] == [r["id"] for r in rep["results"]]
    assert [r["status"] for r in rows] == [r["status"] for r in rep["results"]]
    assert list(rows[0]) == ["id", "kind", "status", "observed", "tolerance", "seed"]


def test_symbolic_obstruction_report(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "obstruction", "--m", "sym")
    assert code == 0
    rep = json.loads(out)
    assert {r["kind"] for r in rep["results"]} == {"exact"}
    cf = rep["closed_forms"]
    assert cf["total"] == "-24*(m - 1)*(4*m^3 - m^2 + m + 2)/((m + 1)*(2*m + 1)*(2*m + 3)*(3*m + 2))"
    assert cf["total_canonical"].startswith("(-96*m^4")


def test_text_format(capsys):
    code, out, _ = run(capsys, "verify", "--suite", "h0", "--m", "3", "--format", "text")
    assert code == 0
    assert out.splitlines()[-2].endswith("0 failed")
    assert out.startswith("PASS")


def test_show_total_m2(capsys):
    code, out, _ = run(capsys, "show", "--object", "total", "--m", "2")
    assert code == 0 and out.strip() == "-32/35"


def test_show_i1_i2_m2(capsys):
    assert run(capsys, "show", "--object", "i1", "--m", "2")[1].strip() == "-66/35"
    assert run(capsys, "show", "--object", "i2", "--m", "2")[1].strip() == "34/35"


def test_show_l_matrix_and_inverse(capsys):
    _, out, _ = run(capsys, "show", "--object", "l-matrix", "--m", "3")
    assert len(out.strip().splitlines()) == 5
    _, out, _ = run(capsys, "show", "--object", "l-inverse", "--m", "3")
    assert len(out.strip().splitlines()) == 5


def test_show_h0_symbolic(capsys):
    _, out, _ = run(capsys, "show", "--object", "h0")
    lines = out.strip().splitlines()
    assert len(lines) == 5 and all(":" in ln for ln in lines)
    assert "m" in out


def test_show_ftt_and_psi(capsys):
    _, out, _ = run(capsys, "show", "--object", "ftt", "--m", "2")
    assert out.startswith("f_tt = ")
    _, out, _ = run(capsys, "show", "--object", "psi", "--m", "2", "--n2", "3")
    assert "psi1:" in out and "psi2:" in out and "x^2 = x + 1/4" in out


def test_list(capsys):
    code, out, _ = run(capsys, "list")
    assert code == 0
    assert "obstruction" in out.split()


def test_help_exits_0(capsys):
    assert main(["--help"]) == 0
