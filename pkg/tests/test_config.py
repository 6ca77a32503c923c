"""Run-configuration parsing: defaults, overrides, and diagnostics."""

import math

import pytest

from tdqmc.config import RunConfig, load_config, parse_config
from tdqmc.errors import ConfigurationError


def test_empty_text_gives_full_defaults():
    cfg = parse_config("")
    assert cfg.solver == "tdqmc"
    assert cfg.seed == 0
    assert cfg.record_every == 5
    assert cfg.energy_every == 50
    assert cfg["grid"]["extent"] == 50.0
    assert cfg["regime"]["kind"] == "effective"
    assert cfg["pulse"]["omega"] == 0.136


def test_comments_and_blank_lines_ignored():
    cfg = parse_config("# top comment\n\n; alt comment\n[run]\nseed = 7\n")
    assert cfg.seed == 7


def test_values_parsed_with_types():
    text = """
[run]
solver = exact
seed = 3
record_every = 2

[grid]
extent = 30
n_points = 256

[pulse]
omega = 1.22
e0 = 0.30
n_cycles = 2
"""
    cfg = parse_config(text)
    assert cfg.solver == "exact"
    assert cfg.seed == 3
    assert cfg["grid"]["n_points"] == 256
    pulse = cfg.pulse()
    assert pulse.omega == 1.22
    assert pulse.e0 == 0.30
    assert pulse.n_cycles == 2


def test_unknown_section_reports_line():
    with pytest.raises(ConfigurationError, match=r"<config>:3.*\[lasers\]"):
        parse_config("\n[run]\n[lasers]\n")


def test_unknown_key_reports_line_and_candidates():
    with pytest.raises(ConfigurationError, match=r"cfg.txt:2.*'walkers'"):
        parse_config("[engine]\nwalkers = 10\n", source="cfg.txt")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigurationError, match=r":3.*duplicate"):
        parse_config("[run]\nseed = 1\nseed = 2\n")


def test_key_outside_section_rejected():
    with pytest.raises(ConfigurationError, match=r":1.*section"):
        parse_config("seed = 1\n")


def test_bad_number_reports_line():
    with pytest.raises(ConfigurationError, match=r":2.*dt"):
        parse_config("[engine]\ndt = fast\n")


def test_bad_choice_lists_options():
    with pytest.raises(ConfigurationError, match="tdhf"):
        parse_config("[run]\nsolver = hartree\n")


def test_unterminated_section_header():
    with pytest.raises(ConfigurationError, match=r":1"):
        parse_config("[run\n")


def test_missing_equals_rejected():
    with pytest.raises(ConfigurationError, match=r":2"):
        parse_config("[run]\njust words\n")


def test_nan_value_rejected():
    with pytest.raises(ConfigurationError, match="nan"):
        parse_config("[engine]\ndt = nan\n")


def test_domain_validation_runs_at_parse_time():
    # dt=0 parses as a float but violates the engine contract
    with pytest.raises(ConfigurationError, match="dt"):
        parse_config("[engine]\ndt = 0.0\n")


def test_record_every_must_be_positive():
    with pytest.raises(ConfigurationError, match="record_every"):
        parse_config("[run]\nrecord_every = 0\n")


def test_noise_decay_accepts_none_and_int():
    assert parse_config("[engine]\nnoise_decay_steps = none\n") \
        .engine_config().noise_decay_steps is None
    assert parse_config("[engine]\nnoise_decay_steps = 30\n") \
        .engine_config().noise_decay_steps == 30


def test_builders_wire_seed_and_grid():
    cfg = parse_config("[run]\nseed = 9\n\n[grid]\nextent = 20\nn_points = 64\n")
    engine = cfg.engine_config()
    assert engine.seed == 9
    grid = cfg.grid()
    assert grid.n_points == 64
    assert grid.x_min == -10.0 and grid.x_max == 10.0
    assert cfg.exact_grid().n_points == 512


def test_regime_builder_modes():
    eff = parse_config("[regime]\nbandwidth_mode = global\nbandwidth_sigma = 5\n")
    regime = eff.regime()
    assert regime.tag == "effective"
    assert regime.bandwidth.mode == "global"
    assert regime.bandwidth.sigma == 5.0

    ultra = parse_config("[regime]\nkind = ultra_correlated\n").regime()
    assert ultra.tag == "ultra_correlated"
    assert ultra.bandwidth is None


def test_relax_regime_defaults_to_adaptive_kernel():
    cfg = parse_config("")
    dynamics = cfg.regime()
    relax = cfg.relax_regime()
    assert dynamics.bandwidth.mode == "global"
    assert dynamics.bandwidth.sigma == 5.0
    assert relax.bandwidth.mode == "adaptive"
    assert relax.bandwidth.sigma == 0.6


def test_relax_regime_same_falls_back_to_dynamics():
    cfg = parse_config(
        "[regime]\nbandwidth_mode = global\nbandwidth_sigma = 2\n"
        "relax_bandwidth_mode = same\nrelax_bandwidth_sigma = none\n"
    )
    relax = cfg.relax_regime()
    assert relax.bandwidth.mode == "global"
    assert relax.bandwidth.sigma == 2.0


def test_relax_regime_sentinels_have_no_bandwidth():
    cfg = parse_config("[regime]\nkind = mean_field\n")
    assert cfg.relax_regime().tag == "mean_field"
    assert cfg.relax_regime().bandwidth is None


def test_overrides_apply_and_validate():
    cfg = parse_config("")
    over = cfg.with_overrides(seed=4, solver="tdhf", regime="mean_field",
                              out="elsewhere")
    assert over.seed == 4
    assert over.solver == "tdhf"
    assert over["regime"]["kind"] == "mean_field"
    assert over.out == "elsewhere"
    # original untouched
    assert cfg.seed == 0 and cfg.solver == "tdqmc"
    with pytest.raises(ConfigurationError):
        cfg.with_overrides(solver="magic")


def test_rotation_angle_default_is_quarter_turn():
    cfg = parse_config("")
    assert cfg.engine_config().rotation_angle == pytest.approx(math.pi / 4)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="cannot read"):
        load_config(tmp_path / "absent.cfg")


def test_load_config_roundtrip(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("[run]\nsolver = tdhf\nseed = 5\n")
    cfg = load_config(path)
    assert cfg.solver == "tdhf"
    assert cfg.seed == 5


def test_values_are_plain_data():
    cfg = parse_config("")
    assert isinstance(cfg, RunConfig)
    import json

    json.dumps(cfg.values)
