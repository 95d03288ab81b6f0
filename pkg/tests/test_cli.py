import io
import json
import subprocess
import sys

import pytest

from pgradient.cli import main


def run(argv):
    out = io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


@pytest.fixture
def pres(tmp_path):
    def make(text, name="g.pres"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return make


def test_b1(pres):
    code, out = run(["b1", pres("# surface\n< a, b, c, d | [a,b]*[c,d] >\n"), "--primes", "2,3"])
    rec = json.loads(out)
    assert code == 0 and rec["free_rank"] == 4 and rec["betti_mod"] == {"2": 4, "3": 4}


def test_error_location_survives_comment_lines(pres, capsys):
    code, _ = run(["b1", pres("# header\n< x, y |\n x^4, z >\n")])
    assert code == 2
    assert "line 3, column 7" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["b1", "/nonexistent.pres"],
    ["b1", "{P}", "--primes", "4"],
    ["chain", "{P}", "--kind", "cyclic", "--weights", "1,0", "--moduli", "2,3"],
    ["chain", "{P}", "--kind", "cyclic", "--weights", "1"],
    ["chain", "{P}"],
    ["b1", "{P}", "--format", "csv"],
    ["construct", "--resume", "{P}"],
    ["construct", "-d", "1"],
    ["regularity", "{P}", "-p", "6"],
])
def test_input_errors_exit_2(argv, pres):
    path = pres("< x, y | x^4 >")
    assert run([a.replace("{P}", path) for a in argv])[0] == 2


def test_chain_formats(pres):
    path = pres("< x, y | >")
    code, out = run(["chain", path, "-p", "2", "--depth", "2"])
    rec = json.loads(out)
    assert code == 0 and [r["index"] for r in rec["rows"]] == [1, 4, 128]
    assert rec["monotone_F2"] is True
    code, out = run(["chain", path, "-p", "2", "--format", "csv"])
    assert code == 0 and out.splitlines()[0].startswith("i,index,b1_rational")
    code, out = run(["chain", path, "-p", "2", "--format", "text"])
    assert code == 0 and "level 1: index 4" in out


def test_truncation_is_success(pres):
    code, out = run(["chain", pres("< x, y, z | >"), "-p", "2", "--depth", "3"])
    rec = json.loads(out)
    assert code == 0 and rec["truncated"] and "1048576" in rec["truncation"]


def test_cyclic_chain_and_reference(pres):
    code, out = run(["chain", pres("< a, b, c, d | [a,b]*[c,d] >"), "--kind", "cyclic",
                     "--weights", "1,0,0,0", "--moduli", "2,4", "--b1-l2", "2", "--primes", "2"])
    rec = json.loads(out)
    assert code == 0
    assert rec["rows"][2]["ref_gap"]["b1_rational"] == {"num": 1, "den": 2}


def test_counterexample_and_gradient(pres):
    code, out = run(["counterexample", "--moduli", "2,4"])
    rec = json.loads(out)
    assert code == 0 and rec["closed_forms_match"] and rec["strict_inequalities"] == [True, True]
    code, out = run(["gradient", pres("< x, y | >"), "-p", "2"])
    assert code == 0 and json.loads(out)["p_gradient_upper_bound"] == {"num": 129, "den": 128}


def test_regularity_unknown_is_success(pres):
    code, out = run(["regularity", pres("< x | x^4, x^6 >"), "-p", "2"])
    assert code == 0 and json.loads(out)["status"] == "Unknown"
    code, out = run(["regularity", pres("< x, y | x^4 >"), "-p", "2", "--format", "text"])
    assert code == 0 and out.startswith("Certified")


def test_oracle_groupring():
    code, out = run(["oracle-groupring", "--samples", "20"])
    rec = json.loads(out)
    assert code == 0 and rec["violations"] == 0 and all(d["matches_catalog"] for d in rec["demos"])


def test_construct_with_log_and_resume(tmp_path):
    log, state = tmp_path / "log.jsonl", tmp_path / "state.json"
    code, out = run(["construct", "-d", "2", "-p", "2", "--epsilon", "0.9", "--stages", "1",
                     "--seed", "7", "--log", str(log), "--state-out", str(state)])
    rec = json.loads(out)
    assert code == 0 and rec["status"] == "complete"
    assert len(rec["checks"]) == 6 and all(c["ok"] for c in rec["checks"])
    lines = [json.loads(x) for x in log.read_text().splitlines()]
    assert lines[0]["action"] == "start" and lines[-1]["action"] == "done"
    code, out = run(["construct", "--resume", str(state), "--stages", "1", "--index-budget", "200"])
    rec = json.loads(out)
    assert code == 0 and rec["status"] == "partial" and rec["failure"]


def test_tampered_state_exits_3(tmp_path):
    state = tmp_path / "state.json"
    run(["construct", "--stages", "1", "--state-out", str(state)])
    rec = json.loads(state.read_text())
    rec["epsilon"] = {"num": 1, "den": 100}
    state.write_text(json.dumps(rec))
    code, out = run(["construct", "--resume", str(state), "--stages", "1", "--index-budget", "200"])
    assert code == 3


def test_determinism_and_flag_placement(pres):
    path = pres("< x, y | x^4 >")
    a = run(["--seed", "5", "chain", path, "-p", "2"])[1]
    b = run(["chain", path, "-p", "2", "--seed", "5"])[1]
    assert a == b
    assert run(["oracle-groupring", "--samples", "10", "--seed", "3"]) == \
        run(["--seed", "3", "oracle-groupring", "--samples", "10"])


def test_module_entry_point(pres):
    proc = subprocess.run([sys.executable, "-m", "pgradient", "b1", pres("< x | x^6 >"), "--format", "text"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "Z/6" in proc.stdout
