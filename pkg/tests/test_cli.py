import csv
import io
import json

import numpy as np
import pytest

from support import fem_data
from volfrac.cauchy import cauchy_to_csv
from volfrac.cli import (EXIT_ERROR, EXIT_INADMISSIBLE, EXIT_OK, REFERENCE, RunConfig, main,
                         reproduce_tables, run)
from volfrac.scene import builtin_scene, scene_to_dict


def read_row(path):
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    assert len(rows) == 1
    return rows[0]


def test_run_table1_row1(tmp_path):
    res = run(RunConfig(scene="table1_row1", source="analytic", out=tmp_path))
    assert res.status == EXIT_OK
    row = read_row(tmp_path / "table1_row1_summary.csv")
    assert float(row["lower"]) == pytest.approx(0.1599, abs=2e-3)
    assert float(row["upper"]) == pytest.approx(0.1600, abs=2e-3)
    assert float(row["lower"]) <= 0.16 <= float(row["upper"])
    doc = json.loads((tmp_path / "table1_row1_report.json").read_text())
    assert doc["config"]["scene"] == "table1_row1"
    assert doc["metadata"]["source"] == "analytic"
    assert set(doc["metadata"]["timings"]) >= {"moments_seconds", "sweep_seconds", "data_seconds"}


def test_run_table5(tmp_path):
    res = run(RunConfig(scene="table5", source="analytic", out=tmp_path))
    assert res.status == EXIT_OK
    assert res.report.lower == pytest.approx(0.799485, abs=1e-3)
    assert res.report.upper == pytest.approx(0.800064, abs=1e-3)


def test_zero_noise_ignores_seed(tmp_path):
    a = run(RunConfig(scene="table2", grid_n=40, mesh_h=0.05, out=tmp_path / "a"))
    b = run(RunConfig(scene="table2", grid_n=40, mesh_h=0.05, noise=0.0, seed=987,
                      out=tmp_path / "b"))
    assert (tmp_path / "a/table2_summary.csv").read_bytes() == \
        (tmp_path / "b/table2_summary.csv").read_bytes()
    assert np.array_equal(a.report.L1, b.report.L1)


def test_deterministic_with_noise(tmp_path):
    for d in ("a", "b"):
        assert run(RunConfig(scene="table3", grid_n=40, mesh_h=0.05, noise=0.1, seed=5,
                             out=tmp_path / d)).status == EXIT_OK
    a = (tmp_path / "a/table3_summary.csv").read_bytes()
    assert a == (tmp_path / "b/table3_summary.csv").read_bytes()
    assert read_row(tmp_path / "a/table3_summary.csv")["seed"] == "5"
    c = run(RunConfig(scene="table3", grid_n=40, mesh_h=0.05, noise=0.1, seed=6, write=False))
    assert c.row != read_row(tmp_path / "a/table3_summary.csv")


def test_inadmissible_scene_exit_code(tmp_path, capsys):
    d = scene_to_dict(builtin_scene("table1_row1"))
    d["sigma1"], d["sigma2"] = [2, 0], [1, 0]
    f = tmp_path / "bad.json"
    f.write_text(json.dumps(d))
    assert main(["--scene", str(f), "--out", str(tmp_path)]) == EXIT_INADMISSIBLE
    assert "sigma1/sigma2 is real" in capsys.readouterr().err
    assert run(RunConfig(scene=str(f), out=tmp_path)).status == EXIT_INADMISSIBLE


def test_error_exit_codes(tmp_path, capsys):
    assert main(["--scene", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == EXIT_ERROR
    assert main(["--scene", "table2", "--source", "analytic", "--out", str(tmp_path)]) == EXIT_ERROR
    assert main(["--scene", "table2", "--grid-n", "1"]) == EXIT_ERROR
    assert main(["--scene", "table2", "--excitations", "1", "0", "2", "0"]) == EXIT_ERROR
    err = capsys.readouterr().err
    assert "error:" in err


def test_cli_stdout(tmp_path, capsys):
    assert main(["--scene", "table1_row2", "--grid-n", "50", "--out", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("scene,f1_true,lower,upper")
    assert out[1].startswith("table1_row2,0.160000,")


def test_file_source_round_trip(tmp_path):
    c1, c2 = fem_data("table4", 0.05)
    (tmp_path / "x.csv").write_text(cauchy_to_csv(c1))
    (tmp_path / "y.csv").write_text(cauchy_to_csv(c2))
    a = run(RunConfig(scene="table4", source="file", grid_n=50, write=False,
                      cauchy_files=(str(tmp_path / "x.csv"), str(tmp_path / "y.csv"))))
    b = run(RunConfig(scene="table4", source="fem", mesh_h=0.05, grid_n=50, write=False))
    assert a.status == b.status == EXIT_OK
    # the CSV grid drops the exact edge-normal rule, which moves <e''> slightly
    assert a.report.lower == pytest.approx(b.report.lower, abs=1e-4)
    assert a.report.upper == pytest.approx(b.report.upper, abs=1e-4)


def test_excitation_override(tmp_path):
    base = run(RunConfig(scene="table1_row3", write=False, grid_n=100))
    rot = run(RunConfig(scene="table1_row3", write=False, grid_n=100,
                        excitations=((1.0, 1.0), (-1.0, 2.0))))
    assert rot.report.lower <= 0.16 <= rot.report.upper
    assert rot.report.lower == pytest.approx(base.report.lower, abs=2e-3)
    with pytest.raises(ValueError):
        RunConfig(excitations=((1.0, 2.0), (2.0, 4.0)))


@pytest.mark.parametrize("name", ["table1_row1", "table1_row2", "table1_row3", "table1_row4",
                                  "table5"])
def test_analytic_and_fem_agree(name):
    a = run(RunConfig(scene=name, source="analytic", write=False))
    f = run(RunConfig(scene=name, source="fem", write=False))
    assert abs(a.report.lower - f.report.lower) <= 5e-3
    assert abs(a.report.upper - f.report.upper) <= 5e-3


def test_reproduce_tables_layout(tmp_path):
    cfg = RunConfig(out=tmp_path, grid_n=24, mesh_h=0.08)
    tables = reproduce_tables(cfg, n_seeds=2, noise_levels=(0.05,))
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["summary.csv", "table1.csv", "table2.csv", "table3.csv", "table4.csv",
                     "table5.csv"]
    assert len(tables["table1"]) == 4
    assert [r["noise"] for r in tables["table3"]] == ["0", "0.05"]
    assert tables["table3"][1]["seeds"] == "2"
    summary = list(csv.DictReader(io.StringIO((tmp_path / "summary.csv").read_text())))
    assert len(summary) == 4 + 1 + 2 + 1 + 1
    row4 = tables["table1"][3]
    assert row4["sigma1"] == "4+100j"
    assert float(row4["lower"]) <= 0.16 <= float(row4["upper"])
    assert float(row4["ref_lower"]) == REFERENCE["table1_row4"][0]
