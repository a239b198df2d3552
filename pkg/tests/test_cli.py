import csv
import io
import json

import pytest

from occulimits.cli import main
from occulimits.model import example1_model, save_model
from occulimits.suite import random_model


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_validate_builtin(capsys):
    code, out, _ = run(capsys, "validate", "--builtin", "example1", "--y0", "0.5")
    assert code == 0
    assert "2 states" in out


def test_validate_malformed_file(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"states": [[0.0]], "mystery": 1}')
    code, _, err = run(capsys, "validate", "--model", str(path))
    assert code == 2
    assert "mystery" in err


def test_validate_model_file(tmp_path, capsys):
    path = tmp_path / "ok.json"
    save_model(random_model(2), path)
    code, out, _ = run(capsys, "validate", "--model", str(path))
    assert code == 0
    assert "states" in out and "noise" in out


def test_bounds_example1(tmp_path, capsys):
    out_path = tmp_path / "bounds.json"
    code, _, err = run(capsys, "bounds", "--builtin", "example1", "--y0", "0.5",
                       "--T", "1,10,100", "--eps", "0.5,0.1,0.01",
                       "--format", "json", "--output", str(out_path))
    assert code == 0
    doc = json.loads(out_path.read_text())
    assert doc["k_star_y0"] == pytest.approx(-0.25, abs=1e-8)
    assert doc["sandwich_ok"] is True
    assert "k*(y0)=-0.25" in err


def test_bounds_csv_shape(capsys):
    code, out, _ = run(capsys, "bounds", "--builtin", "example1", "--y0", "0.5",
                       "--T", "1,10", "--eps", "0.5")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["kind", "parameter", "value", "k_star_y0", "d_star_y0",
                       "in_sandwich"]
    assert len(rows) == 4


def test_ergodic_family_deviations_shrink(capsys):
    code, out, _ = run(capsys, "ergodic", "--builtin", "example1",
                       "--T", "10,100,1000", "--eps", "0.5,0.1,0.01")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))[1:]
    vt = [float(r[4]) for r in rows if r[0] == "vT"]
    he = [float(r[4]) for r in rows if r[0] == "heps"]
    assert vt == sorted(vt, reverse=True)
    assert he == sorted(he, reverse=True)
    assert float(rows[0][3]) == pytest.approx(-0.5, abs=1e-9)


def test_ergodic_constant_cost(tmp_path, capsys):
    m = random_model(3)
    for key in m.cost:
        m.cost[key] = 0.1
    path = tmp_path / "const.json"
    save_model(m, path)
    code, out, _ = run(capsys, "ergodic", "--model", str(path),
                       "--T", "5,50", "--eps", "0.5,0.1")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))[1:]
    assert all(float(r[4]) <= 1e-9 for r in rows)


def test_policy_example1_certified(capsys):
    code, out, _ = run(capsys, "policy", "--builtin", "example1", "--y0", "0.5")
    assert code == 0
    assert "certified=True" in out
    assert "prg=yes T0=1 period=1" in out
    assert "(-0.5) -> (1)" in out and "(0.5) -> (-1)" in out


def test_policy_certification_failure_exit_code(capsys):
    # at this coarse grid the dense-kernel dual is a degenerate vertex whose
    # greedy plan strays off the certified support
    code, out, _ = run(capsys, "policy", "--builtin", "example2", "--m", "5",
                       "--y0", "-0.5")
    assert code == 5
    assert "certified=False" in out


def test_ergodic_random_model_hits_acceptance_thresholds(tmp_path, capsys):
    # 6-state seeded model at the acceptance operating point (T=5000, eps=1e-4)
    path = tmp_path / "six.json"
    save_model(random_model(5), path)
    code, out, _ = run(capsys, "ergodic", "--model", str(path),
                       "--T", "5000", "--eps", "0.0001")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))[1:]
    assert all(float(r[4]) <= 5e-3 for r in rows)


def test_ergodic_thread_cap_is_deterministic(capsys, monkeypatch):
    args = ("ergodic", "--builtin", "example1", "--T", "5,50", "--eps", "0.5,0.2")
    monkeypatch.setenv("OCCULIMITS_THREADS", "1")
    _, out1, _ = run(capsys, *args)
    monkeypatch.setenv("OCCULIMITS_THREADS", "4")
    _, out4, _ = run(capsys, *args)
    assert out1 == out4


def test_missing_model_flags(capsys):
    code, _, err = run(capsys, "bounds")
    assert code == 2
    assert "input error" in err
