import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from blinstab.config import RunConfig, apply_override, config_from_dict, load_config
from blinstab.errors import ConfigError


def test_defaults_load_without_file():
    cfg = load_config(None)
    assert cfg == RunConfig()
    assert cfg.profile.name == "erf" and cfg.grid.N == 150 and cfg.nu == 1e-8


def test_nested_values(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"nu": 1e-6, "grid": {"N": 200}, "scan": {"nus": [1e-7, 1e-6]}}))
    cfg = load_config(p)
    assert cfg.nu == 1e-6 and cfg.grid.N == 200 and cfg.scan.nus == [1e-7, 1e-6]
    assert cfg.expansion.M == 3


def test_integer_accepted_for_float():
    assert config_from_dict({"nu": 1}).nu == 1.0


@pytest.mark.parametrize("data, field", [
    ({"grid": {"Nx": 3}}, "grid.Nx"),
    ({"bogus": 1}, "bogus"),
    ({"grid": {"N": "many"}}, "grid.N"),
    ({"grid": {"N": 1.5}}, "grid.N"),
    ({"nu": True}, "nu"),
    ({"grid": 5}, "grid"),
    ({"scan": {"nus": [1e-8, "x"]}}, "scan.nus[1]"),
    ({"scan": {"alphas": []}}, "scan.alphas"),
    ({"nu": -1.0}, "nu"),
    ({"grid": {"backend": "fem"}}, "grid.backend"),
    ({"expansion": {"tau": 0.2}}, "expansion.tau"),
    ({"profile": {"table_path": "/nonexistent.csv"}}, "profile.table_path"),
])
def test_errors_name_the_field(data, field):
    with pytest.raises(ConfigError) as exc:
        config_from_dict(data)
    assert exc.value.field == field


def test_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    p = tmp_path / "bad.json"
    p.write_text("{nu: 1")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(p)
    p.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(p)


def test_override():
    cfg = apply_override(RunConfig(), "expansion.M", "2")
    assert cfg.expansion.M == 2
    cfg = apply_override(cfg, "profile.name", "exponential")
    assert cfg.profile.name == "exponential"
    cfg = apply_override(cfg, "alpha", "null")
    assert cfg.alpha is None
    with pytest.raises(ConfigError):
        apply_override(cfg, "expansion.K", "2")
    with pytest.raises(ConfigError):
        apply_override(cfg, "nu.x", "2")
    with pytest.raises(ConfigError):
        apply_override(cfg, "grid.N", "4")


@given(N=st.integers(16, 2000), nu=st.floats(1e-12, 1.0))
def test_round_trip_through_dict(N, nu):
    cfg = config_from_dict({"grid": {"N": N}, "nu": nu})
    assert config_from_dict(json.loads(json.dumps(cfg.as_dict()))) == cfg
