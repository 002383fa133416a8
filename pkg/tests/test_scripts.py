import importlib.util
import sys
from pathlib import Path

import pytest

SCRIPTS = Path(__file__).resolve().parents[1] / "scripts"


def _load(name):
    spec = importlib.util.spec_from_file_location(name, SCRIPTS / f"{name}.py")
    mod = importlib.util.module_from_spec(spec)
    sys.modules[name] = mod
    spec.loader.exec_module(mod)
    return mod


def test_convergence_table_second_order(capsys):
    mod = _load("convergence_table")
    rows = mod.run(mod.ConvergenceConfig(h0=0.1, levels=2))
    assert rows[1]["order"] == pytest.approx(2.0, abs=0.2)


def test_monotonicity_sweep_glue(tmp_path, capsys):
    mod = _load("monotonicity_sweep")
    res = mod.run(mod.SweepConfig(points=6, out=str(tmp_path / "s.csv")))
    assert res["rn_nonincreasing"] and res["nr_nondecreasing"]
    assert res["lambda_common"] == pytest.approx(res["lambda_rr"], abs=1e-9)
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 7


def test_cut_demo_runs(tmp_path, capsys):
    mod = _load("cut_demo")
    rows = mod.run(mod.CutConfig(h=0.1, levels=1, out=str(tmp_path / "i.csv")))
    assert rows[0]["unresolved"] <= 0.01
    assert (tmp_path / "i.csv").read_text().startswith("polyline")
