"""Command-line entry point.

Exit codes: 0 success, 1 a gating anchor failed, 2 bad configuration or arguments.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, dump_config, format_quantity, load_config, parse_quantity
from .experiments import SCENARIOS, Table, drive_run, measure_trace, operating_point, run_scenario
from .mechanics import BUDGET_COLUMNS, noise_budget
from .quanta import amplify, ideal_twin_noise, ratio_to_db, symmetric_loss_noise
from .spatial import aperture_sweep, gain_for_squeezing, split_detector_noise
from .timeseries import coherent_reference

EXIT_OK, EXIT_ANCHOR, EXIT_CONFIG = 0, 1, 2

# axis -> (unit for parsing start/stop, allowed interval)
SWEEP_AXES = {
    "power": ("W", (0.0, math.inf)),
    "squeezing_db": ("dB", (0.0, math.inf)),
    "gain": ("", (1.0, math.inf)),
    "transmission": ("", (0.0, 1.0)),
}


class UsageError(Exception):
    """Bad command-line values; reported with exit code 2."""


# --- config handling -------------------------------------------------------------

def effective_config(args) -> RunConfig:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.output_dir is not None:
        changes["output_dir"] = args.output_dir
    if args.workers is not None:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        changes["workers"] = args.workers
    if args.emit_plot_scripts:
        changes["emit_plot_scripts"] = True
    meas = {}
    if args.power is not None:
        meas["optical_power"] = parse_quantity(args.power, "W", "--power")
        if cfg.layout is not None:
            raise UsageError("--power cannot override a config with an explicit [layout]")
    if args.squeezing_db is not None:
        meas["squeezing_db"] = parse_quantity(_with_db(args.squeezing_db), "dB", "--squeezing-db")
    if meas:
        changes["measurement"] = replace(cfg.measurement, **meas)
    return replace(cfg, **changes)


def _with_db(text: str) -> str:
    text = text.strip()
    return text if text.endswith("dB") else f"{text} dB"


# --- budget and sweep -----------------------------------------------------------

def budget_rows(cfg: RunConfig, powers, squeezing_levels) -> Table:
    m = cfg.measurement
    rows = []
    for p, db in zip(powers, squeezing_levels):
        b = noise_budget(float(p), m.wavelength, cfg.cantilever.mode_frequency, cfg.cantilever,
                         float(db), m.rbw).as_dict()
        rows.append(tuple(b[name] for name, _ in BUDGET_COLUMNS))
    return Table(BUDGET_COLUMNS, rows)


def budget_report(cfg: RunConfig) -> str:
    m = cfg.measurement
    b = noise_budget(m.optical_power, m.wavelength, cfg.cantilever.mode_frequency, cfg.cantilever,
                     m.squeezing_db, m.rbw)
    asd = lambda psd, scale: math.sqrt(psd) / scale  # noqa: E731
    lines = [
        f"power              {format_quantity(m.optical_power, 'W')} at {format_quantity(m.wavelength, 'm')}",
        f"frequency          {b.frequency / 1e3:.6g} kHz",
        f"squeezing          {b.squeezing_db:.6g} dB",
        f"shot noise         {asd(b.shot_noise, 1e-15):.4g} fm/rtHz",
        f"back action        {asd(b.back_action, 1e-18):.4g} am/rtHz",
        f"thermal            {asd(b.thermal, 1e-15):.4g} fm/rtHz",
        f"SQL total          {asd(b.sql, 1e-15):.4g} fm/rtHz",
        f"squeezed floor     {asd(b.squeezed_floor, 1e-15):.4g} fm/rtHz",
        f"crossing power     {b.crossing_power * 1e3:.4g} mW",
        f"shot-noise limited {'yes' if b.shot_noise_dominant else 'no'}",
        f"x_min (amplitude)  {b.min_displacement_amplitude * 1e15:.4g} fm in {b.rbw / 1e3:g} kHz",
        f"x_min (dB/10)      {b.min_displacement_paper * 1e15:.4g} fm in {b.rbw / 1e3:g} kHz",
    ]
    return "\n".join(lines) + "\n"


def sweep_grid(start: float, stop: float, num: int, log: bool) -> np.ndarray:
    if num < 1:
        raise UsageError("--num must be >= 1")
    if stop < start:
        raise UsageError(f"inverted range: stop ({stop:g}) < start ({start:g})")
    if stop == start and num > 1:
        raise UsageError("empty range: start == stop needs --num 1")
    if num == 1:
        if stop != start:
            raise UsageError("a single-point sweep needs start == stop")
        return np.array([start])
    if log:
        if start <= 0:
            raise UsageError("log sweeps need a positive start")
        return np.logspace(math.log10(start), math.log10(stop), num)
    return np.linspace(start, stop, num)


def sweep_table(cfg: RunConfig, axis: str, grid: np.ndarray) -> Table:
    m = cfg.measurement
    unit, (lo, hi) = SWEEP_AXES[axis]
    if grid.min() < lo or grid.max() > hi or (axis == "power" and grid.min() <= 0):
        raise UsageError(f"{axis} values must lie in [{lo:g}, {hi:g}]"
                         + (" and be positive" if axis == "power" else ""))
    if axis == "power":
        return budget_rows(cfg, grid, [m.squeezing_db] * grid.size)
    if axis == "squeezing_db":
        return budget_rows(cfg, [m.optical_power] * grid.size, grid)
    layout = cfg.mode_layout()
    eta_d = layout.detector_efficiency
    if axis == "gain":
        rows = []
        for g in grid:
            ideal = ideal_twin_noise(g)
            lossy = symmetric_loss_noise(g, eta_d)
            split = split_detector_noise(layout, g)
            rows.append((g, ideal, ratio_to_db(ideal), lossy, ratio_to_db(lossy), split, ratio_to_db(split)))
        return Table((("gain", ""), ("ideal_noise", ""), ("ideal_noise_db", "dB"), ("lossy_noise", ""),
                      ("lossy_noise_db", "dB"), ("split_detector_noise", ""), ("split_detector_noise_db", "dB")),
                     rows)
    gain = gain_for_squeezing(m.squeezing_db, eta_d)
    sweep = aperture_sweep(amplify(1.0, gain, m.wavelength), grid,
                           cfg.scenarios.fig3a_probe_transmission, eta_d)
    return Table((("conj_transmission", ""), ("noise", "dB"), ("snr", "dB"), ("snr_coherent", "dB")),
                 list(zip(grid, sweep.noise_db, sweep.snr_db, sweep.snr_coherent_db)))


# --- psd ---------------------------------------------------------------------------

def psd_table(cfg: RunConfig, drive: float, state: str) -> Table:
    """One simulated analyzer trace at the configured operating point."""
    m = cfg.measurement
    op = operating_point(cfg, m.squeezing_db)
    run = drive_run(op, (cfg.seed, 0, 0), drive * m.drive_calibration, cfg.cantilever.mode_frequency)
    if state == "coherent":
        run = coherent_reference(run)
    raw, sub = measure_trace(cfg, run, cfg.workers)
    return Table((("frequency", "Hz"), ("power_raw", "counts^2"), ("power", "counts^2"), ("power_db", "dB")),
                 list(zip(sub.frequencies, raw.power, sub.power, sub.power_db)))


# --- argument parsing ----------------------------------------------------------------

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("common options")
    g.add_argument("--config", type=Path, help="TOML run configuration (defaults if omitted)")
    g.add_argument("--seed", type=int, help="override the random seed")
    g.add_argument("--output-dir", help="directory for CSV and JSON outputs")
    g.add_argument("--workers", type=int, help="threads for stream generation")
    g.add_argument("--emit-plot-scripts", action="store_true",
                   help="write a matplotlib script next to every CSV")
    g.add_argument("--power", help='total detected optical power, e.g. "130 uW"')
    g.add_argument("--squeezing-db", help='intensity-difference squeezing, e.g. "4" or "4 dB"')
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="twinsense",
                                     description="Twin-beam displacement readout models and scenarios.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("budget", parents=[common], help="noise budget at the configured operating point")
    b.add_argument("--csv", type=Path, help="also write the budget row as CSV")

    s = sub.add_parser("sweep", parents=[common], help="evaluate the budget or detector noise on a grid")
    s.add_argument("axis", choices=sorted(SWEEP_AXES))
    s.add_argument("--start", required=True, help="first grid value (with unit for power)")
    s.add_argument("--stop", required=True, help="last grid value")
    s.add_argument("--num", type=int, default=21)
    s.add_argument("--log", action="store_true", help="logarithmic spacing")
    s.add_argument("--out", type=Path, help="CSV path (stdout if omitted)")

    r = sub.add_parser("reproduce", parents=[common], help="run figure scenarios and check anchors")
    r.add_argument("figures", nargs="+", metavar="FIGURE",
                   help=f"one or more of: {', '.join(SCENARIOS)}, all")

    p = sub.add_parser("psd", parents=[common], help="simulate one spectrum-analyzer trace")
    p.add_argument("--drive", default="120 mV", help='piezo drive amplitude, e.g. "120 mV"')
    p.add_argument("--state", choices=("squeezed", "coherent"), default="squeezed")
    p.add_argument("--out", type=Path, help="CSV path (stdout if omitted)")

    sub.add_parser("config", parents=[common], help="print the effective configuration as TOML")
    return parser


def _emit(table: Table, out: Path | None) -> None:
    text = table.to_csv()
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")


def _cmd_budget(cfg, args) -> int:
    sys.stdout.write(budget_report(cfg))
    if args.csv:
        m = cfg.measurement
        _emit(budget_rows(cfg, [m.optical_power], [m.squeezing_db]), args.csv)
    return EXIT_OK


def _cmd_sweep(cfg, args) -> int:
    unit, _ = SWEEP_AXES[args.axis]
    conv = (lambda v, w: parse_quantity(_with_db(v), "dB", w)) if unit == "dB" else \
        (lambda v, w: parse_quantity(v, unit, w))
    start, stop = conv(args.start, "--start"), conv(args.stop, "--stop")
    _emit(sweep_table(cfg, args.axis, sweep_grid(start, stop, args.num, args.log)), args.out)
    return EXIT_OK


def _cmd_reproduce(cfg, args) -> int:
    names = []
    for fig in args.figures:
        if fig == "all":
            names.extend(SCENARIOS)
        elif fig in SCENARIOS:
            names.append(fig)
        else:
            raise UsageError(f"unknown figure {fig!r}; available: {', '.join(SCENARIOS)}, all")
    status = EXIT_OK
    for name in dict.fromkeys(names):
        result = run_scenario(name, cfg)
        result.write(cfg.output_dir, cfg.emit_plot_scripts)
        print(f"== {name}: {'ok' if result.ok else 'FAILED'}")
        for anchor in result.anchors:
            print("   " + anchor.line())
        if not result.ok:
            status = EXIT_ANCHOR
    print(f"outputs written under {cfg.output_dir}")
    return status


def _cmd_psd(cfg, args) -> int:
    drive = parse_quantity(args.drive, "V", "--drive")
    _emit(psd_table(cfg, drive, args.state), args.out)
    return EXIT_OK


def _cmd_config(cfg, args) -> int:
    sys.stdout.write(dump_config(cfg))
    return EXIT_OK


COMMANDS = {
    "budget": _cmd_budget,
    "sweep": _cmd_sweep,
    "reproduce": _cmd_reproduce,
    "psd": _cmd_psd,
    "config": _cmd_config,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = effective_config(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, UsageError, ValueError) as exc:
        print(f"twinsense: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
