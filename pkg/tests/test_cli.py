from __future__ import annotations

import json
import os
import subprocess
import sys

import pytest

from lrlab import cli, report
from lrlab.connections import InternalInconsistency
from lrlab.presets import EXAMPLE1

# the example 1 bracket written as a table, with {x, y} moved from 0 to x
PERTURBED = """\
field QQ
vars x y
ideal x*y x^2 y^2
bracket table
{1, x} = y
{x, y} = x
"""


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def strip_timings(text: str) -> dict:
    d = json.loads(text)
    d.pop("timings")
    return d


@pytest.fixture
def ex1_file(tmp_path):
    p = tmp_path / "ex1.lr"
    p.write_text(EXAMPLE1, encoding="utf-8")
    return str(p)


def test_verify_example1(capsys, ex1_file):
    code, out, _ = run(capsys, "verify", ex1_file)
    assert code == report.EXIT_OK
    d = json.loads(out)
    assert d["status"] == "pass"
    assert d["dims"] == {"A": 3, "AA": 9, "AhA": 3, "Ann": 2, "H": 2, "jet": 6}
    subjects = [r["subject"] for r in d["verification"]]
    assert subjects[:2] == ["jacobi", "hamiltonian"]
    assert "ah-hypothesis" in subjects and "jet-descent" in subjects


def test_verify_perturbed_table_reports_witness(capsys, tmp_path):
    p = tmp_path / "bad.lr"
    p.write_text(PERTURBED, encoding="utf-8")
    code, out, _ = run(capsys, "verify", str(p))
    assert code == report.EXIT_CHECK_FAILED
    d = json.loads(out)
    assert d["status"] == "fail"
    jac = d["verification"][0]
    assert jac["subject"] == "jacobi" and not jac["passed"]
    failing = [c for c in jac["checks"] if not c["passed"]]
    assert failing and all(len(c["witnesses"][0]) == 3 for c in failing)


def test_antipode_example1(capsys, ex1_file):
    code, out, _ = run(capsys, "antipode", ex1_file, "--target", "ah")
    assert code == report.EXIT_NO
    v = json.loads(out)["verdict"]
    assert v["answer"] == "no" and v["certificate"]["kind"] == "existence-2a"
    assert v["certificate"]["witness"]["inconsistent_equations"] == ["a*x = y"]
    code, out, _ = run(capsys, "antipode", ex1_file, "--target", "jet")
    assert code == report.EXIT_OK
    v = json.loads(out)["verdict"]
    assert v["answer"] == "yes" and v["witness"]["source"] == "canonical-jet"


def drop_timings_block(text: str) -> str:
    lines = text.splitlines(keepends=True)
    start = next(i for i, ln in enumerate(lines) if ln.startswith('  "timings": {'))
    end = next(i for i in range(start, len(lines)) if lines[i].startswith("  }"))
    return "".join(lines[:start] + lines[end + 1:])


def test_reports_are_byte_stable(capsys, ex1_file):
    outs = [run(capsys, "antipode", ex1_file, "--target", "ah")[1] for _ in range(2)]
    assert drop_timings_block(outs[0]) == drop_timings_block(outs[1])
    assert strip_timings(outs[0]) == strip_timings(outs[1])


def test_keys_are_sorted(capsys, ex1_file):
    _, out, _ = run(capsys, "verify", ex1_file)
    d = json.loads(out)
    assert list(d) == sorted(d)
    assert out == json.dumps(d, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def test_out_writes_atomically(capsys, ex1_file, tmp_path):
    target = tmp_path / "report.json"
    target.write_text("old", encoding="utf-8")
    code, out, _ = run(capsys, "verify", ex1_file, "--out", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text(encoding="utf-8"))["status"] == "pass"
    assert sorted(os.listdir(tmp_path)) == ["ex1.lr", "report.json"]


def test_text_format(capsys, ex1_file):
    code, out, _ = run(capsys, "antipode", ex1_file, "--target", "ah", "--format", "text")
    assert code == report.EXIT_NO
    assert out.startswith("lrlab ")
    assert "ah: antipode no" in out
    assert "certificate existence-2a: obstructed" in out


def test_syntax_error_exit_code(capsys, tmp_path):
    p = tmp_path / "bad.lr"
    p.write_text("field GF(6)\nvars x\nideal x^2\nbracket table\n", encoding="utf-8")
    code, out, err = run(capsys, "verify", str(p))
    assert code == report.EXIT_INPUT
    e = json.loads(out)["error"]
    assert e["kind"] == "syntax" and e["line"] == 1 and "prime" in e["message"]
    assert "syntax" in err


def test_missing_h_is_an_input_error(capsys, tmp_path):
    p = tmp_path / "noh.lr"
    p.write_text(EXAMPLE1.replace("h = y\n", ""), encoding="utf-8")
    code, out, _ = run(capsys, "antipode", str(p), "--target", "ah")
    assert code == report.EXIT_INPUT
    assert json.loads(out)["error"]["kind"] == "missing-h"


def test_hypothesis_failure_is_an_input_error(capsys, tmp_path):
    p = tmp_path / "hyp.lr"
    p.write_text("field GF(2)\nvars x\nideal x^3\nder E: x -> x\nbracket vector_field(E)\nh = x^2\n",
                 encoding="utf-8")
    code, out, _ = run(capsys, "antipode", str(p), "--target", "ah")
    assert code == report.EXIT_INPUT
    assert json.loads(out)["error"]["kind"] == "ah-hypothesis"


def test_invalid_bracket_is_an_input_error(capsys, tmp_path):
    p = tmp_path / "bad.lr"
    p.write_text(PERTURBED, encoding="utf-8")
    code, out, _ = run(capsys, "antipode", str(p), "--target", "jet")
    assert code == report.EXIT_INPUT
    assert json.loads(out)["error"]["kind"] == "invalid-bracket"


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "verify", str(tmp_path / "nope.lr"))
    assert code == report.EXIT_INPUT and "lrlab:" in err


def test_unknown_preset_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["preset", "example3"])
    assert exc.value.code == 2
    rep, code = report.run_preset("example3")
    assert code == report.EXIT_INPUT and rep["error"]["kind"] == "usage"


def test_preset_example1(capsys):
    code, out, _ = run(capsys, "preset", "example1")
    assert code == 0
    d = json.loads(out)
    assert d["expectations"] == {"met": True, "mismatches": []}
    assert d["dims"]["A"] == 3 and d["dims"]["AhA"] == 3
    assert d["verdicts"]["ah"]["answer"] == "no"


def test_internal_inconsistency_exit_code(monkeypatch, capsys, ex1_file):
    def broken(*args, **kwargs):
        raise InternalInconsistency("solver disagreement")

    monkeypatch.setattr(report, "antipode_verdict", broken)
    code, out, _ = run(capsys, "antipode", ex1_file, "--target", "ah")
    assert code == report.EXIT_INTERNAL
    assert json.loads(out)["error"]["kind"] == "InternalInconsistency"


def test_mine_cli(capsys):
    code, out, _ = run(capsys, "mine", "--dim-max", "3", "--seed", "0", "--count", "2")
    assert code == 0
    d = json.loads(out)
    assert len(d["instances"]) == 2 and d["summary"]["inconsistencies"] == 0
    code, out, _ = run(capsys, "mine", "--dim-max", "9", "--count", "1")
    assert code == report.EXIT_INPUT


def test_stdin_input(capsys, monkeypatch):
    import io

    monkeypatch.setattr(sys, "stdin", io.StringIO(EXAMPLE1))
    code, out, _ = run(capsys, "verify", "-")
    assert code == 0 and json.loads(out)["dims"]["A"] == 3


def test_module_entry_point(ex1_file):
    proc = subprocess.run([sys.executable, "-m", "lrlab", "antipode", ex1_file, "--target", "ah",
                           "--format", "text"], capture_output=True, text=True, check=False)
    assert proc.returncode == 10
    assert "antipode no" in proc.stdout
