"""
End-to-end runs of every command through cli.main and the flows.
"""

import csv
import json
import os

import pytest

from cli import EXIT_OK, EXIT_USAGE, main, run_command
from utils.config import parse_config

SHORT_RUN = """
[plant]
a = 10.0
b = -2.0

[controller]
variant = "proposed"
omega = 400.0

[time]
t0 = 0.0
tf = {tf}

[initial]
states = {states}

[check]
grid = 11
time_samples = 2
nussbaum_grid = 1000
"""


def _write_config(tmp_path, tf=0.05, states="[[1.0, 0.0]]", extra=""):
    path = tmp_path / "config.toml"
    path.write_text(SHORT_RUN.format(tf=tf, states=states) + extra, encoding="utf-8")
    return str(path)


def _rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def test_simulate_writes_orbit_lbs_and_report(tmp_path):
    out = tmp_path / "out"
    code = main(["simulate", "--config", _write_config(tmp_path), "--out", str(out), "--with-lbs"])
    assert code == EXIT_OK
    for name in ("trajectory.csv", "trajectory.json", "lbs.csv", "lbs.json", "report.md", "report.html"):
        assert (out / name).exists(), f"missing {name}"
    rows = _rows(out / "trajectory.csv")
    assert rows[0] == ["t", "y", "k", "u"]
    assert float(rows[-1][0]) == pytest.approx(0.05)
    with open(out / "trajectory.json", encoding="utf-8") as f:
        meta = json.load(f)
    assert meta["variant"] == "proposed" and meta["omega"] == 400.0


def test_zero_horizon_writes_single_sample(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--config", _write_config(tmp_path, tf=0.0), "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "trajectory.csv")
    assert len(rows) == 2
    assert [float(v) for v in rows[1][:3]] == [0.0, 1.0, 0.0]


def test_several_orbits_get_their_own_directories(tmp_path):
    out = tmp_path / "out"
    config = _write_config(tmp_path, states="[[1.0, 0.0], [-1.0, 0.0]]")
    assert main(["simulate", "--config", config, "--out", str(out)]) == EXIT_OK
    assert (out / "orbit_000" / "trajectory.csv").exists()
    assert (out / "orbit_001" / "trajectory.csv").exists()


def test_random_batch_is_reproducible(tmp_path):
    text = SHORT_RUN.format(tf=0.01, states="[]").replace("states = []", "states = []\nrandom_count = 2")
    config = parse_config(text)
    first = run_command("simulate", config, {"out_dir": str(tmp_path / "a"), "seed": 5})
    second = run_command("simulate", config, {"out_dir": str(tmp_path / "b"), "seed": 5})
    assert first["runs"]["initial_states"] == second["runs"]["initial_states"]
    assert len(first["runs"]["orbits"]) == 2


def test_missing_gain_is_a_usage_error(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text("[plant]\na = 1.0\n\n[time]\ntf = 1.0\n", encoding="utf-8")
    assert main(["simulate", "--config", str(path), "--out", str(tmp_path / "out")]) == EXIT_USAGE
    assert "plant.b" in capsys.readouterr().err


def test_bad_arguments_are_usage_errors(tmp_path):
    assert main([]) == EXIT_USAGE
    assert main(["simulate"]) == EXIT_USAGE
    assert main(["launch", "--preset", "fig1"]) == EXIT_USAGE
    assert main(["simulate", "--preset", "fig9", "--out", str(tmp_path)]) == EXIT_USAGE


def test_compare_requires_its_section(tmp_path):
    code = main(["compare", "--config", _write_config(tmp_path), "--out", str(tmp_path / "out")])
    assert code == EXIT_USAGE


def test_compare_writes_aligned_columns(tmp_path):
    extra = """
[[compare]]
variant = "proposed"
omega = 400.0

[[compare]]
variant = "willems-byrnes"
sign_b = -1
"""
    out = tmp_path / "out"
    code = main(["compare", "--config", _write_config(tmp_path, extra=extra), "--out", str(out), "--with-lbs"])
    assert code == EXIT_OK
    rows = _rows(out / "compare.csv")
    assert rows[0] == ["t", "y_proposed", "y_willems-byrnes"]
    assert len(rows) == len(_rows(out / "proposed" / "trajectory.csv"))
    assert (out / "willems-byrnes" / "trajectory.json").exists()
    assert (out / "lbs.csv").exists()


def test_compare_rejects_duplicate_labels(tmp_path):
    extra = """
[[compare]]
variant = "proposed"

[[compare]]
variant = "swapped"
label = "proposed"
"""
    code = main(["compare", "--config", _write_config(tmp_path, extra=extra), "--out", str(tmp_path / "out")])
    assert code == EXIT_USAGE


def test_compare_with_diverging_controller_keeps_other_columns(tmp_path):
    extra = """
[[compare]]
variant = "proposed"
omega = 400.0

[[compare]]
variant = "willems-byrnes"
sign_b = 1
"""
    out = tmp_path / "out"
    code = main(["compare", "--config", _write_config(tmp_path, tf=0.5, extra=extra), "--out", str(out)])
    assert code == EXIT_OK
    rows = _rows(out / "compare.csv")
    assert len(rows) == len(_rows(out / "proposed" / "trajectory.csv"))
    assert float(rows[-1][0]) == pytest.approx(0.5)
    assert rows[-1][2] == ""
    with open(out / "willems-byrnes" / "trajectory.json", encoding="utf-8") as f:
        assert json.load(f)["status"] == "diverged"


def test_sweep_writes_one_row_per_omega(tmp_path):
    extra = "\n[sweep]\nomegas = [400.0, 100.0]\n"
    out = tmp_path / "out"
    assert main(["sweep", "--config", _write_config(tmp_path, tf=0.1, extra=extra), "--out", str(out)]) == EXIT_OK
    rows = _rows(out / "sweep.csv")
    assert rows[0] == ["omega", "error"]
    assert [float(r[0]) for r in rows[1:]] == [100.0, 400.0]
    assert all(float(r[1]) >= 0.0 for r in rows[1:])


def test_check_reports_assumptions_and_nussbaum(tmp_path):
    out = tmp_path / "out"
    assert main(["check", "--config", _write_config(tmp_path), "--out", str(out)]) == EXIT_OK
    with open(out / "check.json", encoding="utf-8") as f:
        payload = json.load(f)
    assert payload["assumptions"]["passed"] is True
    assert payload["assumptions"]["system"] == "proposed"
    assert payload["nussbaum"]["function"] == "s_cos_s"
    assert payload["nussbaum"]["is_nussbaum"] is True


def test_chenfliess_writes_each_order(tmp_path):
    extra = "\n[chenfliess]\norders = [0, 1]\n"
    out = tmp_path / "out"
    code = main(["chenfliess", "--config", _write_config(tmp_path, extra=extra), "--out", str(out)])
    assert code == EXIT_OK
    for name in ("chenfliess_d0.csv", "chenfliess_d1.csv", "reference.csv", "lbs.csv"):
        assert (out / name).exists(), f"missing {name}"
    # 0.05 s holds three whole dither periods at omega = 400
    assert len(_rows(out / "chenfliess_d1.csv")) == 1 + 4


@pytest.mark.slow
@pytest.mark.parametrize("command, preset", [("simulate", "fig1"), ("chenfliess", "fig4")])
def test_presets_run_and_store_their_config(tmp_path, command, preset):
    out = tmp_path / preset
    assert main([command, "--preset", preset, "--out", str(out)]) == EXIT_OK
    assert (out / "config.toml").exists()
    assert os.path.getsize(out / "report.md") > 0


def test_repeated_runs_are_byte_identical(tmp_path):
    config = _write_config(tmp_path)
    assert main(["simulate", "--config", config, "--out", str(tmp_path / "a"), "--with-lbs"]) == EXIT_OK
    assert main(["simulate", "--config", config, "--out", str(tmp_path / "b"), "--with-lbs"]) == EXIT_OK
    for name in ("trajectory.csv", "trajectory.json", "lbs.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_empty_omega_list_is_a_usage_error(tmp_path):
    config = _write_config(tmp_path, extra="\n[sweep]\nomegas = []\n")
    assert main(["sweep", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_USAGE


@pytest.mark.slow
def test_compared_controllers_settle(tmp_path):
    extra = """
[[compare]]
variant = "proposed"
omega = 400.0

[[compare]]
variant = "nussbaum"
nussbaum_fn = "s_cos_s"
step = 1e-4

[[compare]]
variant = "willems-byrnes"
sign_b = -1
"""
    shared = run_command("compare", parse_config(SHORT_RUN.format(tf=3.0, states="[[1.0, 0.0]]") + extra),
                         {"out_dir": str(tmp_path / "out")})
    for name, traj in shared["runs"]["compare"].items():
        assert not traj.failed, f"{name} diverged"
        assert abs(traj.final_state.y) < 0.1, f"{name} ended at y={traj.final_state.y}"
