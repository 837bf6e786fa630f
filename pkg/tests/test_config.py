import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from twinsense.config import (
    ConfigError,
    RunConfig,
    config_from_dict,
    dump_config,
    format_quantity,
    load_config,
    parse_quantity,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@pytest.mark.parametrize("text,unit,value", [
    ("130 uW", "W", 130e-6),
    ("130 µW", "W", 130e-6),
    ("795nm", "m", 795e-9),
    ("0.2 N/m", "N/m", 0.2),
    ("40 fm/mV", "m/V", 40e-12),
    ("10 kHz", "Hz", 1e4),
    ("2.5 MHz", "Hz", 2.5e6),
    ("4 dB", "dB", 4.0),
    ("1e-3 W", "W", 1e-3),
    ("0.96", "", 0.96),
    (0.96, "", 0.96),
])
def test_parse_quantity(text, unit, value):
    assert parse_quantity(text, unit) == pytest.approx(value, rel=1e-15)


def test_prefixed_values_parse_exactly():
    assert parse_quantity("10 uW", "W") == 1e-5
    assert parse_quantity("150 mV", "V") == 0.15


@pytest.mark.parametrize("text,unit", [
    ("130", "W"), (130e-6, "W"), ("130 uV", "W"), ("4 mdB", "dB"), ("4", "dB"),
    ("0.2 N", "N/m"), ("fast", "Hz"), ("1 W", ""), (True, ""), ("3 xW", "W"),
])
def test_parse_quantity_rejects(text, unit):
    with pytest.raises(ConfigError):
        parse_quantity(text, unit)


finite = st.floats(allow_nan=False, allow_infinity=False, min_value=-1e12, max_value=1e12)


@given(finite, st.sampled_from(["W", "m", "Hz", "V", "m/V", "dB", "K", "N/m", ""]))
def test_format_parse_round_trip(value, unit):
    assert parse_quantity(format_quantity(value, unit), unit) == value


def test_defaults():
    cfg = load_config(None)
    m, c = cfg.measurement, cfg.cantilever
    assert (m.optical_power, m.wavelength, m.detector_efficiency) == (130e-6, 795e-9, 0.96)
    assert (c.spring_constant, c.quality_factor, c.mode_frequency) == (0.2, 124.0, 745e3)
    assert (m.rbw, m.vbw, m.averages) == (10e3, 100.0, 20)
    assert cfg.source["crossing_angle"] == "0.3 deg"
    assert cfg.source["pump_power"] == "150 mW"
    assert cfg.mode_layout().total_power == m.optical_power


def test_dump_round_trips():
    cfg = load_config(None)
    assert config_from_dict(tomllib.loads(dump_config(cfg))) == cfg


def test_layout_round_trips_and_checks_power():
    data = {"layout": {"total_power": "130 uW", "isolated_power": "100 uW",
                       "split_modes": [{"power": "30 uW", "overlap": 0.7}]}}
    cfg = config_from_dict(data)
    assert cfg.mode_layout().split_power == pytest.approx(30e-6)
    assert config_from_dict(tomllib.loads(dump_config(cfg))) == cfg
    data["layout"]["isolated_power"] = "90 uW"
    with pytest.raises(ConfigError, match="total_power"):
        config_from_dict(data)
    with pytest.raises(ConfigError, match="optical_power"):
        config_from_dict({"layout": {"total_power": "1 mW"}})


@pytest.mark.parametrize("data,match", [
    ({"bogus": 1}, "unknown top-level"),
    ({"measurement": {"optical_pwr": "1 mW"}}, "optical_pwr"),
    ({"measurement": {"optical_power": "1 mV"}}, "measurement.optical_power"),
    ({"measurement": {"averages": 2.5}}, "integer"),
    ({"cantilever": {"quality_factor": 0.1}}, "quality_factor"),
    ({"scenarios": {"fig3b_drives": "30 mV"}}, "list"),
    ({"source": {"pump_power": "150 mV"}}, "source.pump_power"),
    ({"seed": -1}, "seed"),
    ({"emit_plot_scripts": "yes"}, "emit_plot_scripts"),
])
def test_config_errors(data, match):
    with pytest.raises(ConfigError, match=match):
        config_from_dict(data)


def test_load_config_reports_file_and_line(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = 1\n[measurement\noptical_power = '1 mW'\n")
    with pytest.raises(ConfigError, match=r"bad\.toml.*line 2"):
        load_config(bad)
    ok = tmp_path / "ok.toml"
    ok.write_text('seed = 3\n[measurement]\noptical_power = "60 uW"\n')
    cfg = load_config(ok)
    assert cfg.seed == 3 and cfg.measurement.optical_power == 60e-6
    assert isinstance(cfg, RunConfig)
