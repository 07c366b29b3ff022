import json
import subprocess
import sys

import pytest

from gelfandlab.cli import main
from oracles import exact_lambda
from test_harness import BAD, PAIR, SMALL


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_green(capsys):
    code, out, _ = run(["green", "--x", "0.5,0"], capsys)
    assert code == 0
    rec = json.loads(out)
    assert rec["R_x"] == pytest.approx(-0.0457860, abs=1e-7)
    code, out, _ = run(["green", "--x", "0.5,0", "--y", "0,0.3"], capsys)
    assert code == 0 and json.loads(out)["G"] > 0


def test_green_export_needs_numeric(tmp_path, capsys):
    code, _, err = run(["green", "--x", "0.1,0", "--y", "0,0.3", "--export-csv",
                        str(tmp_path / "k.csv")], capsys)
    assert code == 1 and "numeric" in err
    code, _, _ = run(["green", "--mode", "numeric", "--green-n", "33", "--x", "0.1,0",
                      "--y", "0,0.3", "--export-csv", str(tmp_path / "k.csv")], capsys)
    assert code == 0
    lines = (tmp_path / "k.csv").read_text().splitlines()
    assert len(lines) > 100


def test_hamiltonian(tmp_path, capsys):
    code, out, _ = run(["hamiltonian", "--start", "0.3,0.2"], capsys)
    assert code == 0
    rec = json.loads(out)
    assert rec["points"][0] == pytest.approx([0.0, 0.0], abs=1e-8)
    starts = tmp_path / "starts.csv"
    starts.write_text("x,y\n0.5,0\n-0.5,0\n")
    code, out, _ = run(["hamiltonian", "--V", "exp(5*x1^2)", "--m", "2", "--starts", str(starts)],
                       capsys)
    assert code == 0
    assert abs(json.loads(out)["points"][0][0]) == pytest.approx(0.50616, abs=1e-4)


def test_hamiltonian_errors(capsys):
    assert run(["hamiltonian"], capsys)[0] == 1
    assert run(["hamiltonian", "--m", "2", "--start", "0.3,0.2"], capsys)[0] == 1
    assert run(["hamiltonian", "--V", "exp(", "--start", "0,0"], capsys)[0] == 1


def test_branch1d(tmp_path, capsys):
    out = tmp_path / "b.jsonl"
    code, _, _ = run(["branch1d", "--s-min", "1", "--s-max", "3", "--N", "2000", "--out", str(out),
                      "--fields-dir", str(tmp_path / "f")], capsys)
    assert code == 0
    recs = [json.loads(x) for x in out.read_text().splitlines()]
    assert [r["s"] for r in recs] == [1.0, 1.5, 2.0, 2.5, 3.0]
    assert recs[0]["lambda"] == pytest.approx(exact_lambda(1.0), rel=1e-5)
    assert len(recs[0]["mu"]) == 4
    assert len(list((tmp_path / "f").glob("eig_*.csv"))) == 5


def test_branch1d_rejects_angular_weight(capsys):
    code, _, err = run(["branch1d", "--V", "exp(x1)", "--s-max", "2"], capsys)
    assert code == 1 and "radial" in err


def test_branch2d(tmp_path, capsys):
    anchors = tmp_path / "a.csv"
    anchors.write_text("0.5,0\n-0.5,0\n")
    out = tmp_path / "b.jsonl"
    code, _, _ = run(["branch2d", "--V", "exp(5*x1^2)", "--m", "2", "--anchors", str(anchors),
                      "--n", "129", "--s-min", "6", "--s-max", "7", "--out", str(out)], capsys)
    assert code == 0
    recs = [json.loads(x) for x in out.read_text().splitlines()]
    assert len(recs) == 3 and len(recs[-1]["peaks"]) == 2


def test_branch2d_truncation_reported(tmp_path, capsys):
    anchors = tmp_path / "a.csv"
    anchors.write_text("0,0\n")
    out = tmp_path / "b.jsonl"
    code, _, err = run(["branch2d", "--anchors", str(anchors), "--n", "65", "--s-min", "3",
                        "--s-max", "12", "--out", str(out)], capsys)
    assert code == 0 and "truncated" in err
    last = json.loads(out.read_text().splitlines()[-1])
    assert last["truncated"] and "depth limit" in last["reason"]


def test_eigs(capsys):
    code, out, _ = run(["eigs", "--s", "3", "--N", "4000"], capsys)
    assert code == 0
    rec = json.loads(out)
    assert rec["lambda"] == pytest.approx(exact_lambda(3.0), rel=1e-5)
    assert len(rec["mu"]) == 4 and rec["mu"][1] == rec["mu"][2]


def test_verify_list(capsys):
    code, out, _ = run(["verify", "--list"], capsys)
    assert code == 0 and out.split() == ["disk_m1_V1", "disk_m1_Va2", "disk_m2_sym"]


def test_verify_and_report_exit_codes(tmp_path, capsys):
    good = tmp_path / "pair.ini"
    good.write_text(PAIR)
    code, out, _ = run(["verify", str(good), "--jsonl", str(tmp_path / "p.jsonl")], capsys)
    assert code == 0 and "FAIL" not in out and "PASS" in out
    code, out, _ = run(["report", str(tmp_path / "p.jsonl"), "--csv", str(tmp_path / "p.csv")], capsys)
    assert code == 0 and (tmp_path / "p.csv").read_text().startswith("#gelfandlab-report/1")

    # N = 2000 misses the exact-branch tolerance: some assertion fails
    bad = tmp_path / "small.ini"
    bad.write_text(SMALL)
    code, out, _ = run(["verify", str(bad), "--jsonl", str(tmp_path / "s.jsonl")], capsys)
    assert code == 2 and "FAIL  exact_branch" in out
    assert run(["report", str(tmp_path / "s.jsonl")], capsys)[0] == 2


def test_report_rejects_foreign_schema(tmp_path, capsys):
    p = tmp_path / "r.jsonl"
    p.write_text(json.dumps({"record": "header", "schema": "gelfandlab-report/0"}) + "\n")
    code, _, err = run(["report", str(p)], capsys)
    assert code == 1 and "schema" in err
    assert run(["report", str(tmp_path / "missing.jsonl")], capsys)[0] == 1


@pytest.mark.parametrize("path", BAD, ids=lambda p: p.stem)
def test_verify_malformed_configs(path, capsys):
    code, _, err = run(["verify", str(path)], capsys)
    assert code == 1 and err.startswith("error:")


@pytest.mark.parametrize("argv", [[], ["bogus"], ["green"], ["green", "--x", "a,b"],
                                  ["eigs"], ["verify"], ["branch1d", "--N", "x"]])
def test_usage_errors(argv, capsys):
    # argparse errors exit through SystemExit; errors after parsing return
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1


def test_console_script_entry():
    res = subprocess.run([sys.executable, "-m", "gelfandlab.cli", "verify", "--list"],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and "disk_m1_V1" in res.stdout
