import csv
import hashlib

import numpy as np
import pytest

from wcsph import cli, validate
from wcsph.cli import (DEFAULT_MAX_PARTICLES, EXIT_DIVERGED, EXIT_OK, EXIT_USAGE, bench, main,
                       packaged_config, parse_spacings)
from wcsph.integrator import SimulationDiverged
from wcsph.kernels import CubicSplineKernel
from wcsph.parallel import SERIAL
from wcsph.scenario_io import ConfigError, load_config, read_vtk_points

SMALL = """
[fluid]
rest_density = 1000
viscosity = 1e-6
speed_of_sound = 15
gamma = 7
gravity = 0, 0, -9.81
[numerics]
cfl = 0.25
end_time = 0.02
output_interval = 0.01
density_mode = continuity
target_neighbor_count = 10
[geometry]
tank = 0.4, 0.1, 0.2
water_column = 0.15, 0.1, 0.1
obstacle_min = 0.3, 0.025, 0
obstacle_max = 0.35, 0.075, 0.05
particle_spacing = 0.025
[run]
output_dir = out
"""


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


def digest(directory):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(directory.glob("*.vtk"))}


def test_run_writes_snapshots_and_timings(small_cfg, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["run", "--config", str(small_cfg), "--output-dir", str(out)]) == EXIT_OK
    names = sorted(p.name for p in out.iterdir())
    assert names[0] == "snapshot_000000.vtk" and "timings.csv" in names
    assert len([n for n in names if n.endswith(".vtk")]) == 3
    text = capsys.readouterr().out
    for word in ("particles", "steps", "wall clock", "neighbor phase", "interactions",
                 "update phase"):
        assert word in text
    data = read_vtk_points(out / "snapshot_000002.vtk")
    assert data["points"].shape[1] == 3 and np.isfinite(data["velocity"]).all()


def test_phase_sum_not_above_wall_clock(small_cfg, tmp_path, capsys):
    out = tmp_path / "o"
    main(["run", "--config", str(small_cfg), "--output-dir", str(out)])
    wall = float(next(ln.split()[2] for ln in capsys.readouterr().out.splitlines()
                      if ln.startswith("wall clock")))
    with open(out / "timings.csv") as fh:
        rows = list(csv.DictReader(fh))
    total = sum(float(r[k]) for r in rows for k in ("neighbor_s", "interact_s", "update_s"))
    assert total <= wall


def test_zero_end_time_gives_one_snapshot(small_cfg, tmp_path):
    out = tmp_path / "o"
    rc = main(["run", "--config", str(small_cfg), "--output-dir", str(out),
               "--set", "numerics.end_time=0", "--quiet"])
    assert rc == EXIT_OK
    assert [p.name for p in out.glob("*.vtk")] == ["snapshot_000000.vtk"]
    assert (out / "timings.csv").read_text().count("\n") == 1


@pytest.mark.parametrize("workers", ["1", "8"])
def test_repeated_runs_byte_identical(small_cfg, tmp_path, workers):
    for name in ("a", "b"):
        main(["run", "--config", str(small_cfg), "--output-dir", str(tmp_path / name),
              "--workers", workers, "--quiet"])
    assert digest(tmp_path / "a") == digest(tmp_path / "b")
    assert len(digest(tmp_path / "a")) == 3


def test_serial_and_parallel_outputs_identical(small_cfg, tmp_path):
    main(["run", "--config", str(small_cfg), "--output-dir", str(tmp_path / "s"), "--quiet"])
    main(["run", "--config", str(small_cfg), "--output-dir", str(tmp_path / "p"),
          "--workers", "8", "--quiet"])
    assert digest(tmp_path / "s") == digest(tmp_path / "p")


def test_workers_env_fallback(small_cfg, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SPH_WORKERS", "3")
    main(["run", "--config", str(small_cfg), "--output-dir", str(tmp_path / "e"),
          "--set", "numerics.end_time=0"])
    assert "Parallel(3)" in capsys.readouterr().out


def test_config_error_exit_code_and_stderr(small_cfg, tmp_path, capsys):
    rc = main(["run", "--config", str(small_cfg), "--set", "numerics.cfl=abc",
               "--output-dir", str(tmp_path / "x")])
    err = capsys.readouterr()
    assert rc == EXIT_USAGE
    assert "numerics.cfl" in err.err and err.out == ""


def test_missing_config_file(tmp_path, capsys):
    rc = main(["run", "--config", str(tmp_path / "nope.cfg")])
    assert rc != EXIT_OK and "nope.cfg" in capsys.readouterr().err


def test_symmetric_with_workers_refused(small_cfg, tmp_path, capsys):
    rc = main(["run", "--config", str(small_cfg), "--workers", "4", "--output-dir",
               str(tmp_path / "x"), "--set", "numerics.pair_mode=symmetric"])
    assert rc == EXIT_USAGE and "symmetric" in capsys.readouterr().err


def test_divergence_exit_code(small_cfg, tmp_path, monkeypatch, capsys):
    def diverge(*args, **kwargs):
        raise SimulationDiverged(17, "velocity")

    monkeypatch.setattr(cli, "run", diverge)
    rc = main(["run", "--config", str(small_cfg), "--output-dir", str(tmp_path / "x")])
    assert rc == EXIT_DIVERGED and "step 17" in capsys.readouterr().err


def test_packaged_scenarios_load():
    for name in ("dam_break.cfg", "settling_tank.cfg"):
        cfg, spec = load_config(packaged_config(name))
        assert cfg.end_time > 0
    cfg, spec = load_config(packaged_config("dam_break.cfg"))
    assert cfg.end_time == 1.5 and spec.has_obstacle


@pytest.mark.parametrize("text,ok", [("0.02,0.01", [0.02, 0.01]), ("0.05", [0.05])])
def test_parse_spacings(text, ok):
    assert parse_spacings(text) == ok


@pytest.mark.parametrize("text", ["", "a,b", "0.1,-0.2", "0"])
def test_parse_spacings_rejects(text):
    with pytest.raises(ConfigError):
        parse_spacings(text)


def test_bench_cap_refused_with_cap_stated(small_cfg, tmp_path, capsys):
    rc = main(["bench", "--config", str(small_cfg), "--spacing", "0.025,0.0125",
               "--max-particles", "1000", "--output-dir", str(tmp_path / "b")])
    assert rc == EXIT_USAGE
    assert "1000" in capsys.readouterr().err
    assert DEFAULT_MAX_PARTICLES == 2_000_000


def test_bench_rows_sorted_and_scaling(small_cfg, tmp_path, capsys):
    out = tmp_path / "b"
    rc = main(["bench", "--config", str(small_cfg), "--spacing", "0.0125,0.025",
               "--steps", "3", "--output-dir", str(out)])
    assert rc == EXIT_OK
    with open(out / "bench.csv") as fh:
        rows = list(csv.DictReader(fh))
    counts = [int(r["particle_count"]) for r in rows]
    assert counts == sorted(counts) and len(counts) == 2
    assert 5 < counts[1] / counts[0] < 9
    for r in rows:
        assert int(r["steps"]) == 3
        assert all(float(r[k]) >= 0 for k in ("total_s", "neighbor_s", "interact_s", "update_s"))
    assert "ratio" in capsys.readouterr().out


def test_bench_fluid_count_scales_by_eight(small_cfg):
    config, spec = load_config(small_cfg)
    rows = bench(config, spec, [0.025, 0.0125], 1, SERIAL, warmup=False)
    f = [spec.with_spacing(r.spacing).fluid_count for r in rows]
    assert f[1] == 8 * f[0]


def test_one_row_bench_matches_plain_run(tmp_path):
    # default scenario at a fixed step count; the fastest of five repeats
    # on each side keeps scheduler noise out of the comparison
    steps = 40
    config, spec = load_config(packaged_config("dam_break.cfg"))
    bench_totals, run_totals = [], []
    for i in range(5):
        row = bench(config, spec, [spec.particle_spacing], steps, SERIAL)[0]
        assert row.steps == steps
        bench_totals.append(row.neighbor_s + row.interact_s + row.update_s)
        out = tmp_path / f"r{i}"
        assert main(["run", "--steps", str(steps), "--output-dir", str(out), "--quiet"]) == EXIT_OK
        with open(out / "timings.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == steps
        run_totals.append(sum(float(r[k]) for r in rows
                              for k in ("neighbor_s", "interact_s", "update_s")))
    assert abs(min(bench_totals) - min(run_totals)) <= 0.05 * min(run_totals)


def test_validate_passes(capsys):
    assert main(["validate"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == len(validate.FAST_CHECKS) and "FAIL" not in out


def test_gradient_sign_mutation_detected():
    kernel = CubicSplineKernel(1.0)

    def broken(r):
        g = kernel.gradient(r)
        # sign error on one side of the x = 0 plane
        return np.where(np.asarray(r)[..., :1] > 0, -g, g)

    assert validate.check_gradient_antisymmetry().passed
    res = validate.check_gradient_antisymmetry(broken)
    assert not res.passed and res.line().startswith("FAIL")


def test_validate_exit_code_on_failure(monkeypatch, capsys):
    failing = validate.CheckResult("forced", False, "injected", 0.0)
    monkeypatch.setattr(validate, "FAST_CHECKS", (lambda: failing,))
    monkeypatch.setattr(validate.run_checks, "__defaults__", ((lambda: failing,), print))
    assert main(["validate"]) != EXIT_OK
    assert "forced" in capsys.readouterr().err
