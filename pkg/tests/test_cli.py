import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from sbenpy.cli import RunConfig, main, parse_config, serialize_config
from sbenpy.cli.config import OUTPUT_ROOT_ENV
from sbenpy.cli.main import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER
from sbenpy.errors import ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

PULSE = {
    "scenario": {"type": "elastoplastic-oscillator", "load": [{"kind": "half_sine", "amplitude": 2.0, "duration": 3.0}]},
    "time": {"dt": 0.05, "t_end": 5.0},
    "output": {"directory": "pulse"},
}


def write(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data, indent=2))
    return path


def read_csv_header(path):
    return path.read_text().splitlines()[0].split(",")


# --- configuration -------------------------------------------------------------------


def test_minimal_config_gets_defaults():
    cfg = parse_config(json.dumps({"scenario": {"type": "coulomb-slider"}, "time": {"dt": 0.1, "t_end": 1.0}}))
    assert cfg.solver.name == "sben-incremental"
    assert cfg.scenario.friction == 0.5
    assert cfg.output.formats == ("csv", "json")
    assert cfg.seed == 0


def test_numbers_are_constant_programs():
    cfg = parse_config(json.dumps({"scenario": {"type": "coulomb-slider", "normal_force": 2.5},
                                   "time": {"dt": 0.1, "t_end": 1.0}}))
    assert cfg.scenario.normal_force.kind == "constant"
    assert cfg.build_scenario().params.normal_force(3.0) == 2.5


@pytest.mark.parametrize("patch, needle", [
    ({"time": {"dt": -0.1, "t_end": 1.0}}, "time.dt"),
    ({"solver": {"name": "newton"}}, "'oracle', 'sben-incremental' or 'sben-global'"),
    ({"solver": {"name": "oracle", "tolerance": 1}}, "solver.tolerance"),
    ({"time": {"dt": 1.0, "t_end": 0.5}}, "t_end must be at least dt"),
    ({"scenario": {"type": "pendulum"}}, "scenario"),
])
def test_invalid_configs_name_the_field(patch, needle):
    data = {**PULSE, **patch}
    with pytest.raises(ConfigError) as info:
        parse_config(json.dumps(data, indent=2))
    assert needle in str(info.value)


def test_errors_carry_line_numbers():
    text = json.dumps({**PULSE, "solver": {"name": "newton"}}, indent=2)
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    line = next(i for i, s in enumerate(text.splitlines(), 1) if '"newton"' in s or '"name"' in s)
    assert f"(line {line})" in str(info.value)


def test_malformed_json_reports_position():
    with pytest.raises(ConfigError, match=r"line 2, column"):
        parse_config('{"time":\n  {dt: 1}}')


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_round_trip(path):
    cfg = parse_config(path.read_text())
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    assert serialize_config(again) == serialize_config(cfg)


def test_output_root_resolution(tmp_path, monkeypatch):
    cfg = RunConfig.model_validate(PULSE)
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "env"))
    assert cfg.output_dir() == tmp_path / "env" / "pulse"
    assert cfg.output_dir(tmp_path / "flag") == tmp_path / "flag" / "pulse"
    absolute = RunConfig.model_validate({**PULSE, "output": {"directory": str(tmp_path / "abs")}})
    assert absolute.output_dir(tmp_path / "flag") == tmp_path / "abs"


# --- run ---------------------------------------------------------------------------------


def test_run_writes_outputs(tmp_path, capsys):
    cfg = write(tmp_path, PULSE)
    assert main(["--output-root", str(tmp_path), "run", str(cfg)]) == EXIT_OK
    out = tmp_path / "pulse"
    assert read_csv_header(out / "timeseries.csv") == ["t", "u", "sigma", "eps_p", "gap", "dissipation"]
    assert read_csv_header(out / "residuals.csv") == ["step", "t0", "t1", "dissipation_term", "pairing_term", "gap"]
    rows = (out / "timeseries.csv").read_text().splitlines()
    assert len(rows) == 1 + 101
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "ok" and summary["pi_within_budget"]
    assert summary["n_steps"] == 100 and summary["total_dissipation"] > 0
    assert "ok" in capsys.readouterr().out


def test_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, PULSE)
    main(["--output-root", str(tmp_path / "a"), "run", str(cfg)])
    main(["--output-root", str(tmp_path / "b"), "run", str(cfg)])
    for name in ("timeseries.csv", "residuals.csv"):
        assert (tmp_path / "a/pulse" / name).read_bytes() == (tmp_path / "b/pulse" / name).read_bytes()


def test_env_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "env"))
    cfg = write(tmp_path, PULSE)
    assert main(["run", str(cfg)]) == EXIT_OK
    assert (tmp_path / "env/pulse/timeseries.csv").exists()


def test_csv_only_output(tmp_path):
    cfg = write(tmp_path, {**PULSE, "output": {"directory": "csvonly", "formats": ["csv"]}})
    assert main(["--output-root", str(tmp_path), "run", str(cfg)]) == EXIT_OK
    assert sorted(p.name for p in (tmp_path / "csvonly").iterdir()) == ["residuals.csv", "timeseries.csv"]


def test_parallel_runs(tmp_path):
    paths = [shutil.copy(CONFIGS / n, tmp_path / n) for n in ("slider_ramp.json", "reversible.json")]
    assert main(["--output-root", str(tmp_path / "out"), "run", *map(str, paths), "--jobs", "2"]) == EXIT_OK
    for p in paths:
        cfg = parse_config(Path(p).read_text())
        assert (tmp_path / "out" / cfg.output.directory / Path(p).stem / "timeseries.csv").exists()


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, {**PULSE, "time": {"dt": 0, "t_end": 1}})
    assert main(["--output-root", str(tmp_path), "run", str(cfg)]) == EXIT_CONFIG
    assert "time.dt" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_negative_normal_force_is_a_config_error(tmp_path):
    cfg = write(tmp_path, {"scenario": {"type": "coulomb-slider", "normal_force": -1.0},
                           "time": {"dt": 0.1, "t_end": 1.0}})
    assert main(["--output-root", str(tmp_path), "run", str(cfg)]) == EXIT_CONFIG


def test_solver_failure_writes_flagged_partial_outputs(tmp_path, capsys):
    cfg = write(tmp_path, {
        "scenario": {"type": "crack-toy", "driving_force": {"length_exponent": 1.0},
                     "load": {"kind": "piecewise_linear", "times": [0, 2], "values": [0, 2]}},
        "time": {"dt": 0.02, "t_end": 2.0},
        "output": {"directory": "unstable"},
    })
    assert main(["--output-root", str(tmp_path), "run", str(cfg)]) == EXIT_SOLVER
    out = tmp_path / "unstable"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "failed" and summary["partial"] is True
    assert summary["failed_step"] == 50 and summary["steps_completed"] == 50
    assert len((out / "timeseries.csv").read_text().splitlines()) == 1 + 51
    assert "partial outputs written" in capsys.readouterr().err


def test_global_unsupported_scenario_is_a_solver_failure(tmp_path):
    cfg = write(tmp_path, {"scenario": {"type": "coulomb-slider"}, "solver": {"name": "sben-global"},
                           "time": {"dt": 0.1, "t_end": 1.0}})
    assert main(["--output-root", str(tmp_path), "run", str(cfg)]) == EXIT_SOLVER


# --- other subcommands -------------------------------------------------------------------


def test_compare(tmp_path):
    cfg = write(tmp_path, PULSE)
    assert main(["--output-root", str(tmp_path), "compare", str(cfg)]) == EXIT_OK
    out = tmp_path / "pulse"
    assert (out / "timeseries_oracle.csv").exists()
    report = json.loads((out / "comparison.json").read_text())
    assert report["against"] == "oracle"
    assert report["max_rel_deviation"] <= 1e-6


def test_sweep(tmp_path):
    cfg = write(tmp_path, PULSE)
    assert main(["--output-root", str(tmp_path), "sweep", str(cfg), "--dt-list", "0.1", "0.05"]) == EXIT_OK
    report = json.loads((tmp_path / "pulse/sweep.json").read_text())
    assert [r["dt"] for r in report["runs"]] == [0.1, 0.05]
    assert all(r["status"] == "ok" for r in report["runs"])
    assert (tmp_path / "pulse/dt_0.10000000000000001/timeseries.csv").exists()
    assert main(["--output-root", str(tmp_path), "sweep", str(cfg), "--dt-list", "-1"]) == EXIT_CONFIG


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_audit(tmp_path, path, capsys):
    assert main(["--output-root", str(tmp_path), "audit", str(path), "--samples", "300"]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] is True
    cfg = parse_config(path.read_text())
    assert json.loads((tmp_path / cfg.output.directory / "audit.json").read_text()) == report


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, PULSE)
    res = subprocess.run([sys.executable, "-m", "sbenpy.cli.main", "--output-root", str(tmp_path), "run", str(cfg)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
