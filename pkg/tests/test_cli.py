import json

import pytest

from hyperfilter import cli, io
from hyperfilter.filtering import DegenerateFilterError

TINY = """\
map:
  kind: cat
grid:
  shape: [32, 32]
  subsamples: [8, 8]
channel:
  kappa: [2.0, 2.0]
experiment:
  horizon: 40
  seeds: [0, 1]
  fit_window: [10, 40]
  pullback_depth: 10
cone:
  n_pairs: 10
  absorption_starts: 10
acceptance:
  birkhoff_shape: [32, 32]
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "tiny.yaml"
    p.write_text(TINY)
    return p


def run(cfg_path, out, *args):
    return cli.main([args[0], "--config", str(cfg_path), "--out-dir", str(out), *args[1:]])


def read_bytes(out, names):
    return {n: (out / n).read_bytes() for n in names}


def test_simulate_writes_two_files_and_manifest(cfg_path, tmp_path):
    out = tmp_path / "o"
    assert run(cfg_path, out, "simulate") == 0
    assert {p.name for p in out.iterdir()} == {"orbit.csv", "observations.csv", "manifest_simulate.json"}
    obs = io.read_observations(out / "observations.csv")
    assert len(obs) == 40 and obs.rng_seed == 0
    man = json.loads((out / "manifest_simulate.json").read_text())
    assert man["artifacts"]["observations.csv"] == io.sha256_file(out / "observations.csv")


def test_rerun_is_byte_identical(cfg_path, tmp_path):
    names = ["orbit.csv", "observations.csv", "filter_trajectory.csv", "posterior.bin"]
    snaps = []
    for d in ("a", "b"):
        out = tmp_path / d
        assert run(cfg_path, out, "simulate") == 0
        assert run(cfg_path, out, "filter") == 0
        snaps.append(read_bytes(out, names))
    assert snaps[0] == snaps[1]


def test_seed_override(cfg_path, tmp_path):
    out = tmp_path / "o"
    assert run(cfg_path, out, "simulate", "--seed-override", "7") == 0
    assert io.read_observations(out / "observations.csv").rng_seed == 7


def test_missing_map_field_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("grid:\n  shape: [8, 8]\n")
    assert run(p, tmp_path / "o", "simulate") == 2
    assert "map" in capsys.readouterr().err


def test_bad_field_message(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("map:\n  kind: cat\nexperiment:\n  horizon: -3\n")
    assert run(p, tmp_path / "o", "simulate") == 2
    assert "experiment.horizon" in capsys.readouterr().err


def test_missing_upstream_exit_3(cfg_path, tmp_path):
    assert run(cfg_path, tmp_path / "o", "filter") == 3
    assert run(cfg_path, tmp_path / "o", "pullback") == 3
    assert run(cfg_path, tmp_path / "o", "report") == 3


def test_degeneracy_exit_4(cfg_path, tmp_path, monkeypatch, capsys):
    out = tmp_path / "o"
    assert run(cfg_path, out, "simulate") == 0

    def boom(*a, **k):
        raise DegenerateFilterError(7, 0.0)
    monkeypatch.setattr(cli, "filter_run", boom)
    assert run(cfg_path, out, "filter") == 4
    assert "step 7" in capsys.readouterr().err


def test_twin_emits_report(cfg_path, tmp_path):
    out = tmp_path / "o"
    assert run(cfg_path, out, "twin") == 0
    rep = json.loads((out / "twin_report.json").read_text())
    assert rep["summary"]["n_reports"] == 2
    assert {"tv", "theta_plus", "panel_gap", "fit"} <= set(rep["reports"][0])
    _, cols, data = io.read_csv(out / "twin_decay.csv")
    assert cols[:3] == ["seed", "prior", "step"] and len(data) == 2 * 41


def test_twin_jobs_do_not_change_output(cfg_path, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(cfg_path, a, "twin") == 0
    assert run(cfg_path, b, "twin", "--jobs", "2") == 0
    names = ["twin_report.json", "twin_decay.csv"]
    assert read_bytes(a, names) == read_bytes(b, names)


def test_cone_check_ratios(cfg_path, tmp_path):
    out = tmp_path / "o"
    assert run(cfg_path, out, "cone-check") == 0
    rep = json.loads((out / "cone_report.json").read_text())
    assert all(r <= 1.0 for r in rep["contraction"]["ratios"])
    assert all(r["within"] for r in rep["absorption"])


def test_pullback_and_report_with_plots(cfg_path, tmp_path):
    out = tmp_path / "o"
    for cmd in ("simulate", "filter", "pullback"):
        assert run(cfg_path, out, cmd) == 0
    assert run(cfg_path, out, "report", "--plots") == 0
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["inputs"]) == {"pullback_report.json", "filter_trajectory.csv"}
    assert (out / "plot_pullback.gp").is_file() and (out / "plot_filter_trajectory.gp").is_file()


def test_density_binary_round_trip(tmp_path, grid32, rng):
    from hyperfilter.density import DensityGrid
    p = DensityGrid(grid32, rng.random(grid32.size))
    io.write_density_binary(tmp_path / "p.bin", p)
    q = io.read_density_binary(tmp_path / "p.bin")
    assert q.grid == p.grid and (q.values == p.values).all()


def test_csv_round_trip_exact(tmp_path, rng):
    x = rng.random((5, 3))
    io.write_csv(tmp_path / "x.csv", ["a", "b", "c"], x, ["note=1"])
    comments, cols, data = io.read_csv(tmp_path / "x.csv")
    assert comments == ["note=1"] and cols == ["a", "b", "c"] and (data == x).all()


def test_schema_covers_outputs():
    schema = io.load_schema()
    assert {"orbit.csv", "observations.csv", "filter_trajectory.csv", "pullback.csv",
            "twin_decay.csv"} <= set(schema)
