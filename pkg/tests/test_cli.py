"""Command-line surface: exit codes, overrides, and artifact layout."""

import subprocess
import sys

import pytest

from tdqmc.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main

TINY = """
[run]
solver = tdqmc
seed = 2

[grid]
extent = 40
n_points = 192

[engine]
m_walkers = 10
n_relax_steps = 8
conditional_block = 2
walker_substeps = 2

[regime]
bandwidth_mode = global
bandwidth_sigma = 5.0
relax_bandwidth_mode = same

[pulse]
omega = 1.22
e0 = 0.30
n_cycles = 1
"""


@pytest.fixture
def tiny_cfg(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(TINY)
    return path


def test_relax_exits_zero_and_writes(tiny_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["relax", "--config", str(tiny_cfg), "--out", str(out)])
    assert rc == EXIT_OK
    assert (out / "summary.json").exists()
    assert "ground-state energy" in capsys.readouterr().out


def test_malformed_config_exits_nonzero_without_outputs(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[engine]\nm_walkers = lots\n")
    out = tmp_path / "out"
    rc = main(["relax", "--config", str(bad), "--out", str(out)])
    assert rc == EXIT_CONFIG
    assert not out.exists()
    err = capsys.readouterr().err
    assert "bad.cfg:2" in err


def test_unknown_key_line_reported(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("# comment\n[run]\nwalkers = 5\n")
    rc = main(["relax", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert rc == EXIT_CONFIG
    assert "bad.cfg:3" in capsys.readouterr().err


def test_missing_config_file_is_config_error(tmp_path, capsys):
    rc = main(["relax", "--config", str(tmp_path / "nope.cfg"),
               "--out", str(tmp_path / "o")])
    assert rc == EXIT_CONFIG


def test_seed_and_solver_overrides_land_in_summary(tiny_cfg, tmp_path):
    import json

    out = tmp_path / "out"
    rc = main(["relax", "--config", str(tiny_cfg), "--out", str(out),
               "--solver", "tdhf", "--seed", "9"])
    assert rc == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["solver"] == "tdhf"
    assert summary["seed"] == 9


def test_bad_override_rejected(tiny_cfg, tmp_path, capsys):
    rc = main(["relax", "--config", str(tiny_cfg),
               "--out", str(tmp_path / "o"), "--solver", "magic"])
    assert rc == EXIT_CONFIG


def test_propagate_writes_timeseries(tiny_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["propagate", "--config", str(tiny_cfg), "--out", str(out)])
    assert rc == EXIT_OK
    assert (out / "timeseries.csv").exists()
    assert "final ionization" in capsys.readouterr().out


def test_compare_over_two_runs(tiny_cfg, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["propagate", "--config", str(tiny_cfg), "--out", str(a)]) == EXIT_OK
    assert main(["propagate", "--config", str(tiny_cfg), "--seed", "3",
                 "--out", str(b)]) == EXIT_OK
    out = tmp_path / "cmp"
    rc = main(["compare", str(a), str(b), "--out", str(out)])
    assert rc == EXIT_OK
    assert (out / "merged_compare.csv").exists()
    assert "final ion_proj" in capsys.readouterr().out


def test_compare_on_incomplete_dir_fails(tmp_path, capsys):
    (tmp_path / "x").mkdir()
    (tmp_path / "y").mkdir()
    rc = main(["compare", str(tmp_path / "x"), str(tmp_path / "y"),
               "--out", str(tmp_path / "cmp")])
    assert rc == EXIT_CONFIG


def test_sweep_sigma_selects_candidate(tiny_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["sweep-sigma", "--config", str(tiny_cfg), "--out", str(out),
               "--sigmas", "2.0"])
    assert rc == EXIT_OK
    assert (out / "sweep_sigma.csv").exists()
    assert "selected sigma: 2" in capsys.readouterr().out


def test_sweep_sigma_bad_list(tiny_cfg, tmp_path):
    rc = main(["sweep-sigma", "--config", str(tiny_cfg),
               "--out", str(tmp_path / "o"), "--sigmas", "a,b"])
    assert rc == EXIT_CONFIG


def test_defaults_used_without_config_flag(tmp_path):
    # tdhf is the one solver fast enough to run on full defaults
    out = tmp_path / "out"
    rc = main(["relax", "--solver", "tdhf", "--out", str(out)])
    assert rc == EXIT_OK
    assert (out / "summary.json").exists()


@pytest.mark.slow
def test_console_entry_point_installed(tiny_cfg, tmp_path):
    out = tmp_path / "out"
    proc = subprocess.run(
        [sys.executable, "-m", "tdqmc.cli", "relax", "--config", str(tiny_cfg),
         "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == EXIT_OK, proc.stderr
    assert (out / "summary.json").exists()
