"""Run configuration: TOML files with explicit units on every physical quantity.

Example::

    seed = 7
    [measurement]
    optical_power = "130 uW"
    wavelength = "795 nm"
    detector_efficiency = 0.96

Unknown keys are rejected. Dimensionless values are bare numbers.
"""
from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, field, fields
from decimal import Decimal
from pathlib import Path

from .mechanics import CantileverParams
from .spatial import ModeLayout, SplitMode

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


# decimal exponents, so "10 uW" parses to exactly 1e-05
_PREFIX = {
    "a": -18, "f": -15, "p": -12, "n": -9, "u": -6, "µ": -6, "μ": -6,
    "m": -3, "c": -2, "k": 3, "M": 6, "G": 9, "": 0,
}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")


def _unit_scale(token: str, base: str) -> int:
    if token == base:
        return 0
    if token.endswith(base) and token[: -len(base)] in _PREFIX:
        return _PREFIX[token[: -len(base)]]
    raise ConfigError(f"unit {token!r} is not compatible with {base!r}")


def parse_quantity(value, unit: str, where: str = "value") -> float:
    """Parse ``"130 uW"`` style strings into SI floats.

    ``unit`` is the expected SI unit, possibly compound (``"m/V"``). An empty
    ``unit`` means dimensionless; such values may be bare numbers. ``"dB"``
    takes no prefix.
    """
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a quantity, got a boolean")
    if isinstance(value, (int, float)):
        if unit:
            raise ConfigError(f"{where}: {value!r} needs an explicit unit ({unit})")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string like '1.0 {unit}', got {value!r}")
    m = _QUANTITY.match(value)
    if not m:
        raise ConfigError(f"{where}: cannot parse quantity {value!r}")
    literal, token = m.group(1), m.group(2)
    number = float(literal)
    if not unit:
        if token:
            raise ConfigError(f"{where}: {value!r} should be dimensionless")
        return number
    if unit == "dB":
        if token != "dB":
            raise ConfigError(f"{where}: expected dB, got {token!r}")
        return number
    if not token:
        raise ConfigError(f"{where}: {value!r} needs an explicit unit ({unit})")
    num_base, _, den_base = unit.partition("/")
    num_tok, _, den_tok = token.partition("/")
    if bool(den_base) != bool(den_tok):
        raise ConfigError(f"{where}: unit {token!r} is not compatible with {unit!r}")
    try:
        exponent = _unit_scale(num_tok, num_base)
        if den_base:
            exponent -= _unit_scale(den_tok, den_base)
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    return float(f"{literal}e{exponent}") if "e" not in literal.lower() else number * 10.0 ** exponent


_ENG = (("G", 9), ("M", 6), ("k", 3), ("", 0), ("m", -3), ("u", -6),
        ("n", -9), ("p", -12), ("f", -15), ("a", -18))


def _shifted(value: float, exponent: int) -> str:
    # shortest repr shifted by a power of ten, exact in decimal
    d = Decimal(repr(float(value))).scaleb(-exponent).normalize()
    return f"{d:f}"


def format_quantity(value: float, unit: str) -> str:
    """Inverse of :func:`parse_quantity` with an engineering prefix."""
    if not unit:
        return repr(float(value)) if isinstance(value, float) else str(value)
    if unit == "m/V":
        return f"{_shifted(value, -12)} fm/mV"
    if unit in ("dB", "K", "N/m", "deg", "degC") or value == 0:
        return f"{_shifted(value, 0)} {unit}"
    for prefix, exponent in _ENG:
        if abs(value) >= 10.0 ** exponent * (1 - 1e-12):
            break
    text = f"{_shifted(value, exponent)} {prefix}{unit}"
    if parse_quantity(text, unit) != value:
        text = f"{_shifted(value, 0)} {unit}"
    return text


@dataclass(frozen=True)
class MeasurementConfig:
    """Optical and instrument settings of the readout.

    ``optical_power`` is the total twin-beam power reaching the split
    detector. ``drive_calibration`` maps piezo drive to peak cantilever
    displacement (m per V). ``electronic_noise`` is the electronics floor
    relative to shot noise at ``optical_power``.
    """

    optical_power: float = 130e-6
    wavelength: float = 795e-9
    detector_efficiency: float = 0.96
    squeezing_db: float = 4.0
    rbw: float = 10e3
    vbw: float = 100.0
    averages: int = 20
    sample_rate: float = 2.5e6
    span: float = 500e3
    drive_calibration: float = 40e-15 / 1e-3
    electronic_noise: float = 0.05
    window: str = "flattop"

    def __post_init__(self):
        if self.optical_power <= 0 or self.wavelength <= 0:
            raise ConfigError("optical_power and wavelength must be positive")
        if not 0 < self.detector_efficiency <= 1:
            raise ConfigError("detector_efficiency must lie in (0, 1]")
        if self.rbw <= 0 or self.vbw <= 0 or self.sample_rate <= 0:
            raise ConfigError("rbw, vbw and sample_rate must be positive")
        if int(self.averages) != self.averages or self.averages < 1:
            raise ConfigError("averages must be a positive integer")


@dataclass(frozen=True)
class ScenarioConfig:
    """Squeezing calibrations and sweep grids for the reproduction scenarios."""

    fig3a_squeezing_db: float = 2.8
    fig3a_probe_transmission: float = 0.5
    fig3a_points: int = 21
    fig3b_squeezing_db: float = 4.0
    fig3b_drives: tuple = (0.0, 30e-3, 60e-3, 90e-3, 120e-3)
    fig3c_squeezing_db: float = 3.0
    fig3c_drives: tuple = tuple(round(v * 1e-3, 6) for v in range(20, 171, 10))
    fig4_squeezing_db: float = 2.8
    fig4_drive: float = 150e-3
    fig4_powers: tuple = (10e-6, 20e-6, 40e-6, 60e-6, 80e-6, 100e-6, 130e-6)
    fig4_repeats: int = 8
    fig4c_squeezing_db: tuple = (4.0, 13.0, 26.0)
    fig4c_power_range: tuple = (10e-6, 100e-3)
    fig4c_points: int = 61


@dataclass(frozen=True)
class RunConfig:
    measurement: MeasurementConfig = field(default_factory=MeasurementConfig)
    cantilever: CantileverParams = field(default_factory=CantileverParams)
    scenarios: ScenarioConfig = field(default_factory=ScenarioConfig)
    layout: ModeLayout | None = None
    seed: int = 20150401
    output_dir: str = "results"
    emit_plot_scripts: bool = False
    workers: int = 1
    source: dict = field(default_factory=dict)

    def mode_layout(self) -> ModeLayout:
        if self.layout is not None:
            return self.layout
        m = self.measurement
        return ModeLayout.isolated(m.optical_power, m.detector_efficiency)


# key -> expected unit; "" is dimensionless, int/str are passed through, [unit] is a list
_MEASUREMENT_SCHEMA = {
    "optical_power": "W", "wavelength": "m", "detector_efficiency": "", "squeezing_db": "dB",
    "rbw": "Hz", "vbw": "Hz", "averages": int, "sample_rate": "Hz", "span": "Hz",
    "drive_calibration": "m/V", "electronic_noise": "", "window": str,
}
_CANTILEVER_SCHEMA = {
    "spring_constant": "N/m", "quality_factor": "", "mode_frequency": "Hz",
    "fundamental_frequency": "Hz", "temperature": "K", "thermal_quality_factor": "",
}
_SCENARIO_SCHEMA = {
    "fig3a_squeezing_db": "dB", "fig3a_probe_transmission": "", "fig3a_points": int,
    "fig3b_squeezing_db": "dB", "fig3b_drives": ["V"], "fig3c_squeezing_db": "dB",
    "fig3c_drives": ["V"], "fig4_squeezing_db": "dB", "fig4_drive": "V", "fig4_powers": ["W"], "fig4_repeats": int,
    "fig4c_squeezing_db": ["dB"], "fig4c_power_range": ["W"], "fig4c_points": int,
}
# stored verbatim as metadata; units checked but values unused by the models
_SOURCE_SCHEMA = {
    "pump_power": "W", "probe_seed_power": "W", "crossing_angle": "deg", "cell_length": "m",
    "cell_temperature": "degC", "pump_waist": "m", "probe_waist": "m", "nonlinear_gain": "",
}
_TOP_LEVEL = {"seed", "output_dir", "emit_plot_scripts", "workers",
              "measurement", "cantilever", "scenarios", "layout", "source"}

DEFAULT_SOURCE = {
    "pump_power": "150 mW", "probe_seed_power": "10 uW", "crossing_angle": "0.3 deg",
    "cell_length": "12.7 mm", "cell_temperature": "130 degC", "pump_waist": "800 um",
    "probe_waist": "400 um", "nonlinear_gain": "5",
}


def _convert(value, spec, where):
    if spec is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if spec is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(spec, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        return tuple(parse_quantity(v, spec[0], f"{where}[{i}]") for i, v in enumerate(value))
    return parse_quantity(value, spec, where)


def _section(table, schema, section):
    if not isinstance(table, dict):
        raise ConfigError(f"[{section}] must be a table")
    unknown = sorted(set(table) - set(schema))
    if unknown:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(unknown)}; "
                          f"allowed: {', '.join(sorted(schema))}")
    return {k: _convert(v, schema[k], f"{section}.{k}") for k, v in table.items()}


def _layout_from_table(table, measurement: MeasurementConfig) -> ModeLayout:
    allowed = {"total_power", "isolated_power", "detector_efficiency", "split_modes"}
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"[layout] unknown key(s): {', '.join(unknown)}")
    total = parse_quantity(table.get("total_power", format_quantity(measurement.optical_power, "W")),
                           "W", "layout.total_power")
    if not math.isclose(total, measurement.optical_power, rel_tol=1e-9):
        raise ConfigError("layout.total_power must equal measurement.optical_power")
    modes = []
    for i, m in enumerate(table.get("split_modes", [])):
        where = f"layout.split_modes[{i}]"
        if not isinstance(m, dict) or set(m) - {"power", "overlap"}:
            raise ConfigError(f"{where}: expected {{power, overlap}}")
        modes.append(SplitMode(parse_quantity(m["power"], "W", where + ".power"),
                               parse_quantity(m["overlap"], "", where + ".overlap")))
    isolated = parse_quantity(table.get("isolated_power", format_quantity(total, "W")), "W",
                              "layout.isolated_power")
    eta = parse_quantity(table.get("detector_efficiency", measurement.detector_efficiency), "",
                         "layout.detector_efficiency")
    try:
        return ModeLayout(total, isolated, tuple(modes), eta)
    except ValueError as exc:
        raise ConfigError(f"[layout] {exc}") from None


def layout_to_table(layout: ModeLayout) -> dict:
    """Inverse of the ``[layout]`` parser, with units."""
    return {
        "total_power": format_quantity(layout.total_power, "W"),
        "isolated_power": format_quantity(layout.isolated_power, "W"),
        "detector_efficiency": layout.detector_efficiency,
        "split_modes": [{"power": format_quantity(m.power, "W"), "overlap": m.overlap}
                        for m in layout.split_modes],
    }


def config_from_dict(data: dict) -> RunConfig:
    unknown = sorted(set(data) - _TOP_LEVEL)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    try:
        measurement = MeasurementConfig(**_section(data.get("measurement", {}), _MEASUREMENT_SCHEMA,
                                                   "measurement"))
        cantilever = CantileverParams(**_section(data.get("cantilever", {}), _CANTILEVER_SCHEMA,
                                                 "cantilever"))
        scenarios = ScenarioConfig(**_section(data.get("scenarios", {}), _SCENARIO_SCHEMA, "scenarios"))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    source_raw = data.get("source", {})
    _section(source_raw, {k: str for k in _SOURCE_SCHEMA}, "source")
    for k, v in source_raw.items():
        parse_quantity(v, _SOURCE_SCHEMA[k], f"source.{k}")
    layout = _layout_from_table(data["layout"], measurement) if "layout" in data else None
    seed = data.get("seed", RunConfig.seed)
    workers = data.get("workers", 1)
    for name, val in (("seed", seed), ("workers", workers)):
        if isinstance(val, bool) or not isinstance(val, int) or val < 0:
            raise ConfigError(f"{name} must be a non-negative integer")
    emit = data.get("emit_plot_scripts", False)
    if not isinstance(emit, bool):
        raise ConfigError("emit_plot_scripts must be true or false")
    return RunConfig(measurement, cantilever, scenarios, layout, seed,
                     str(data.get("output_dir", "results")), emit, max(1, workers),
                     {**DEFAULT_SOURCE, **source_raw})


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig(source=dict(DEFAULT_SOURCE))
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return config_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{ " + ", ".join(f"{k} = {_toml_value(x)}" for k, x in v.items()) + " }"
    return repr(v) if isinstance(v, float) else str(v)


def _dump_section(obj, schema):
    lines = []
    for f in fields(obj):
        if f.name not in schema:
            continue
        val = getattr(obj, f.name)
        spec = schema[f.name]
        if val is None:
            continue
        if spec in (int, str):
            lines.append(f"{f.name} = {_toml_value(val)}")
        elif isinstance(spec, list):
            lines.append(f"{f.name} = {_toml_value([format_quantity(v, spec[0]) for v in val])}")
        elif spec:
            lines.append(f"{f.name} = {_toml_value(format_quantity(val, spec))}")
        else:
            lines.append(f"{f.name} = {_toml_value(float(val))}")
    return lines


def dump_config(cfg: RunConfig) -> str:
    """Serialize a config to TOML that :func:`load_config` reads back."""
    out = [f"seed = {cfg.seed}", f"output_dir = {_toml_value(cfg.output_dir)}",
           f"emit_plot_scripts = {_toml_value(cfg.emit_plot_scripts)}", f"workers = {cfg.workers}", ""]
    for name, obj, schema in (("measurement", cfg.measurement, _MEASUREMENT_SCHEMA),
                              ("cantilever", cfg.cantilever, _CANTILEVER_SCHEMA),
                              ("scenarios", cfg.scenarios, _SCENARIO_SCHEMA)):
        out.append(f"[{name}]")
        out.extend(_dump_section(obj, schema))
        out.append("")
    if cfg.layout is not None:
        out.append("[layout]")
        out.extend(f"{k} = {_toml_value(v)}" for k, v in layout_to_table(cfg.layout).items())
        out.append("")
    if cfg.source:
        out.append("[source]")
        out.extend(f"{k} = {_toml_value(v)}" for k, v in cfg.source.items())
        out.append("")
    return "\n".join(out)
