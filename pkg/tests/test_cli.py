import json
import os
import subprocess
import sys
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from photon_toffoli.cli import main
from photon_toffoli.schemas import BY_SCENARIO

GOLDEN = Path(__file__).parent / "golden"


def run_cli(*args, env=None):
    cmd = [sys.executable, "-m", "photon_toffoli", *args]
    return subprocess.run(cmd, capture_output=True, text=True, env={**os.environ, **(env or {})})


def run_main(tmp_path, *args):
    out = tmp_path / "out.json"
    code = main([*args, "--out", str(out)])
    return code, out.read_text()


def assert_close(a, b, tol=1e-9):
    """Recursive comparison: numbers within ``tol``, everything else equal."""
    if isinstance(a, dict):
        assert a.keys() == b.keys()
        for k in a:
            assert_close(a[k], b[k], tol)
    elif isinstance(a, list):
        assert len(a) == len(b)
        for x, y in zip(a, b):
            assert_close(x, y, tol)
    elif isinstance(a, float) or isinstance(b, float):
        assert abs(a - b) <= tol
    else:
        assert a == b


def test_bell_golden():
    result = run_cli("bell", "--noise", "paper_noise.cfg", "--duration", "100", "--seed", "7")
    assert result.returncode == 0, result.stderr
    got = json.loads(result.stdout)
    jsonschema.validate(got, BY_SCENARIO["bell"])
    assert_close(got, json.loads((GOLDEN / "bell_paper_noise_seed7.json").read_text()))
    assert len(got) == 4
    for r in got:
        assert 0.93 <= r["fidelity"] <= 0.99
        assert r["stddev"] > 0


def test_verify_exits_zero():
    result = run_cli("verify", "--seed", "1")
    assert result.returncode == 0, result.stderr
    report = json.loads(result.stdout)
    jsonschema.validate(report, BY_SCENARIO["verify"])
    assert report["ok"]


def test_truth_table_ideal(tmp_path):
    code, text = run_main(tmp_path, "truth-table", "--noise", "ideal.cfg")
    assert code == 0
    m = json.loads(text)
    jsonschema.validate(m, BY_SCENARIO["truth-table"])
    assert m["effective_rate"] == 1.0


@pytest.mark.parametrize(
    "args",
    [
        ("truth-table", "--noise", "paper_noise.cfg", "--seed", "3"),
        ("cnot-crosstalk", "--noise", "paper_noise.cfg", "--seed", "3"),
        ("tomography", "--noise", "paper_noise.cfg", "--target", "Psi-", "--mc-samples", "10"),
        ("fidelity-grid", "--noise", "ideal.cfg", "--mc-samples", "0"),
        ("calibrate",),
        ("calibrate", "--perturb", "--seed", "4"),
    ],
    ids=lambda a: " ".join(a),
)
def test_outputs_validate_and_repeat(tmp_path, args):
    code, first = run_main(tmp_path, *args)
    assert code == 0
    jsonschema.validate(json.loads(first), BY_SCENARIO[args[0]])
    code, second = run_main(tmp_path, *args)
    assert first == second


def test_cnot_crosstalk_shape(tmp_path):
    _, text = run_main(tmp_path, "cnot-crosstalk", "--noise", "ideal.cfg")
    out = json.loads(text)
    assert np.allclose(out["1"]["rates"], np.eye(4)[[0, 1, 3, 2]])
    assert np.allclose(out["0"]["rates"], np.eye(4))
    assert "effective_rate" not in out["+"]


def test_csv_output(tmp_path):
    out = tmp_path / "tt.csv"
    assert main(["truth-table", "--noise", "paper_noise.cfg", "--format", "csv", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "input_id,projector_id,counts,duration_s,seed"
    assert len(lines) == 65


def test_thread_count_does_not_change_output():
    args = ("tomography", "--noise", "paper_noise.cfg", "--mc-samples", "12", "--seed", "2")
    one = run_cli(*args, env={"PHOTON_SIM_THREADS": "1"})
    many = run_cli(*args, env={"PHOTON_SIM_THREADS": "4"})
    assert one.returncode == many.returncode == 0
    assert one.stdout == many.stdout


@pytest.mark.parametrize(
    "args",
    [
        ("nonsense",),
        ("bell", "--format", "csv"),
        ("bell", "--noise", "no_such_file.cfg"),
        ("truth-table", "--duration", "-5"),
        ("bell", "--mc-samples", "1"),
        ("truth-table", "--seed", "x"),
    ],
)
def test_usage_errors_exit_2(args):
    with pytest.raises(SystemExit) as info:
        main(list(args))
    assert info.value.code == 2


def test_bad_noise_file_is_usage_error(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("visibility_a = 3\n")
    with pytest.raises(SystemExit) as info:
        main(["truth-table", "--noise", str(cfg)])
    assert info.value.code == 2


def test_scientific_failure_exits_1(monkeypatch, tmp_path):
    import photon_toffoli.cli as cli

    def broken():
        return {"checks": {"toffoli_entrywise": False}, "max_entry_error": 1.0, "ok": False}

    monkeypatch.setattr(cli, "verify_blocks", broken)
    code, text = run_main(tmp_path, "verify")
    assert code == 1
    report = json.loads(text)
    assert report["ok"] is False and report["checks"]["toffoli_entrywise"] is False
