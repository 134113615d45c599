import csv
import io
import json
import os
import subprocess
import sys

import numpy as np
import pytest
import yaml

from oracles import poisson
from fracheat import acceptance, cli


def _write(tmp_path, cfg, name="run.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg, sort_keys=False))
    return str(p)


BASE = {"space": {"kind": "euclidean", "n": 1}, "operator": {"alpha": 0.5},
        "grid": {"radius": 8.0, "spacing": 0.25}}


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_kernel_matches_poisson(tmp_path):
    cfg = _write(tmp_path, {**BASE, "kernel": {"t": [0.1, 1.0, 10.0], "d": [0.0, 0.5, 3.0, 10.0]}})
    out = tmp_path / "out"
    assert cli.run("kernel", cfg, out=str(out)) == 0
    rows = _rows(out / "kernel.csv")
    assert list(rows[0]) == ["alpha", "t", "d", "K", "envelope", "ratio"]
    assert len(rows) == 12
    for r in rows:
        t, d, K = float(r["t"]), float(r["d"]), float(r["K"])
        assert K == pytest.approx(poisson(1, t, d), rel=1e-10)
        assert float(r["ratio"]) == pytest.approx(K / float(r["envelope"]), rel=1e-14)


def test_missing_alpha_exit_2(tmp_path):
    cfg = _write(tmp_path, {"space": {"kind": "euclidean"}, "kernel": {"t": [1.0], "d": [0.0]}})
    err = io.StringIO()
    assert cli.run("kernel", cfg, out=str(tmp_path / "o"), stderr=err) == 2
    assert "operator.alpha" in err.getvalue()


def test_unknown_key_rejected_with_line(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("space:\n  kind: euclidean\noperator:\n  alpha: 0.5\n  alhpa: 0.4\n"
                 "kernel:\n  t: [1.0]\n  d: [0.0]\n")
    err = io.StringIO()
    assert cli.run("kernel", str(p), out=str(tmp_path / "o"), stderr=err) == 2
    assert "operator.alhpa" in err.getvalue() and "line 5" in err.getvalue()


def test_wrong_type_rejected(tmp_path):
    cfg = _write(tmp_path, {**BASE, "operator": {"alpha": "half"}, "kernel": {"t": [1.0], "d": [0.0]}})
    err = io.StringIO()
    assert cli.run("kernel", cfg, out=str(tmp_path / "o"), stderr=err) == 2
    assert "operator.alpha" in err.getvalue()


def test_bad_measure_file(tmp_path):
    (tmp_path / "m.csv").write_text("t,x1,x2,mass\n1,0,0,1\n")
    cfg = _write(tmp_path, {**BASE, "trace": {"p": 3.0, "q": 2.0, "measure": "m.csv"}})
    err = io.StringIO()
    assert cli.run("trace", cfg, out=str(tmp_path / "o"), stderr=err) == 2
    assert "coordinate" in err.getvalue()


def test_inadmissible_triplet_is_input_error(tmp_path):
    cfg = _write(tmp_path, {**BASE, "solve": {"triplet": {"q": 3, "p": 4, "r": 2},
                                              "times": [1.0], "source": {"kind": "none"}}})
    assert cli.run("solve", cfg, out=str(tmp_path / "o"), stderr=io.StringIO()) == 2


def test_all_subcommands_deterministic(tmp_path):
    res = cli.determinism_check(str(tmp_path), seed=0)
    assert res == {s: True for s in cli.SUBCOMMANDS}


def test_outputs_stay_in_out_dir(tmp_path):
    paths = cli.example_configs(str(tmp_path / "cfg"))
    before = set(os.listdir(tmp_path / "cfg"))
    out = tmp_path / "only_here"
    for sub in ("capacity", "dyadic"):
        assert cli.run(sub, paths[sub], out=str(out)) == 0
    assert set(os.listdir(tmp_path / "cfg")) == before
    assert set(os.listdir(out)) == {"capacity.json", "tree.json", "properties.json", "potentials.csv"}
    tree = json.loads((out / "tree.json").read_text())
    assert tree["scales"][0]["parents"] is None
    rec = json.loads((out / "capacity.json").read_text())["set"]
    assert set(rec) == {"value", "gap", "iterations", "flags"}


def test_seed_and_refine_change_outputs(tmp_path):
    paths = cli.example_configs(str(tmp_path / "cfg"))
    cfg = yaml.safe_load(open(paths["dyadic"]))
    del cfg["dyadic"]["points"]
    cfg["dyadic"]["cloud"] = {"n": 40}
    p = _write(tmp_path / "cfg", cfg, "cloud.yaml")
    a, b = tmp_path / "a", tmp_path / "b"
    cli.run("dyadic", p, out=str(a), seed=1)
    cli.run("dyadic", p, out=str(b), seed=2)
    assert (a / "tree.json").read_bytes() != (b / "tree.json").read_bytes()
    c, d = tmp_path / "c", tmp_path / "d"
    cli.run("solve", paths["solve"], out=str(c))
    cli.run("solve", paths["solve"], out=str(d), refine=True)
    assert len(_rows(d / "slices.csv")) > len(_rows(c / "slices.csv"))


def test_report_exit_status(tmp_path, monkeypatch):
    cfg = _write(tmp_path, {"report": {"criteria": [2]}})
    assert cli.run("report", cfg, out=str(tmp_path / "ok"), stderr=io.StringIO()) == 0
    summary = json.loads((tmp_path / "ok" / "summary.json").read_text())
    assert summary["passed"] and summary["criteria"][0]["number"] == 2
    fail = lambda seed=0, refine=False: acceptance.CriterionResult(2, "forced", False, "no")
    monkeypatch.setitem(acceptance.CRITERIA, 2, fail)
    assert cli.run("report", cfg, out=str(tmp_path / "bad"), stderr=io.StringIO()) == 1


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, {**BASE, "kernel": {"t": [1.0], "d": [0.0]}})
    env = {**os.environ, "PYTHONPATH": os.pathsep.join(
        [os.path.join(os.path.dirname(__file__), "..", "src"), os.environ.get("PYTHONPATH", "")])}
    r = subprocess.run([sys.executable, "-m", "fracheat", "kernel", "--config", cfg,
                        "--out", str(tmp_path / "o")], env=env, capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    K = float(_rows(tmp_path / "o" / "kernel.csv")[0]["K"])
    assert K == pytest.approx(1 / np.pi, rel=1e-12)
