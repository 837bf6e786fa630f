"""Acceptance criteria at their stated tolerances, one test each.

Each test records a PASS/FAIL line; the lines are printed together at the end
of the pytest run under "acceptance criteria".
"""
import math

import numpy as np
import pytest

from twinsense.config import load_config
from twinsense.experiments import SCENARIOS, monte_carlo_grid, run_scenario
from twinsense.mechanics import (
    CantileverParams,
    back_action_psd,
    crossing_power,
    crossing_power_bisect,
    min_displacement,
    snl_psd,
)
from twinsense.spatial import ModeLayout, SplitMode, split_detector_noise

LAM = 795e-9
P0 = 130e-6
LEVER = CantileverParams(spring_constant=0.2, quality_factor=124.0)


@pytest.fixture(scope="module")
def cfg():
    return load_config(None)


@pytest.fixture(scope="module")
def runs(cfg):
    return {name: run_scenario(name, cfg, workers=1) for name in SCENARIOS}


def _got(result, prefix):
    return next(a for a in result.anchors if a.quantity.startswith(prefix))


def test_criterion_01_shot_noise_limit(acceptance_log):
    asd = math.sqrt(snl_psd(P0, LAM))
    ok = abs(asd / 3.9e-15 - 1) <= 0.02
    assert acceptance_log(1, "shot-noise limit", ok, f"{asd * 1e15:.4f} fm/rtHz vs 3.9 +/- 2%")


def test_criterion_02_back_action(acceptance_log):
    asd = math.sqrt(back_action_psd(P0, LAM, LEVER))
    ok = abs(asd / 33e-18 - 1) <= 0.03
    assert acceptance_log(2, "back action", ok, f"{asd * 1e18:.3f} am/rtHz vs 33 +/- 3%")


def test_criterion_03_crossing_powers(acceptance_log):
    p0, p4 = crossing_power(LEVER, LAM, 0.0), crossing_power(LEVER, LAM, 4.0)
    agree = max(abs(crossing_power_bisect(LEVER, LAM, db) / crossing_power(LEVER, LAM, db) - 1)
                for db in (0.0, 4.0))
    ok = abs(p0 / 15e-3 - 1) <= 0.05 and abs(p4 / 10e-3 - 1) <= 0.05 and agree <= 1e-9
    detail = f"{p0 * 1e3:.3f} mW (0 dB), {p4 * 1e3:.3f} mW (4 dB), bisection rel diff {agree:.1e}"
    assert acceptance_log(3, "crossing powers", ok, detail)


def test_criterion_04_minimum_displacement(acceptance_log):
    coh = min_displacement(P0, LAM, 10e3)
    sq = min_displacement(P0, LAM, 10e3, 4.0, convention="paper")
    ok = (abs(coh - 392e-15) <= 1.2e-15 + 0.02 * 392e-15
          and abs(sq - 156e-15) <= 1.2e-15 + 0.02 * 156e-15)
    assert acceptance_log(4, "minimum displacement", ok, f"{coh * 1e15:.1f} fm coherent, {sq * 1e15:.1f} fm squeezed")


def test_criterion_05_split_detector_identity_and_multimode(acceptance_log):
    gains = np.linspace(1.0, 20.0, 20)
    worst = max(abs(split_detector_noise(ModeLayout.isolated(P0, 1.0), g) - 1 / (2 * g - 1)) for g in gains)

    rng = np.random.default_rng(20150401)
    violations = 0
    for _ in range(1000):
        g = rng.uniform(3.0, 10.0)
        eta = rng.uniform(0.85, 1.0)
        n = int(rng.integers(1, 7))
        weights = rng.dirichlet(np.ones(n))
        overlaps = eta * rng.uniform(0.5, 1.0, n)
        iso_few = rng.uniform(0.0, 1.0)
        iso_many = rng.uniform(iso_few, 1.0)

        def noise(iso):
            modes = tuple(SplitMode((1 - iso) * w * P0, o) for w, o in zip(weights, overlaps))
            return split_detector_noise(ModeLayout(P0, iso * P0, modes, eta), g)

        single = split_detector_noise(ModeLayout.isolated(P0, eta), g)
        if not single <= noise(iso_many) + 1e-12 <= noise(iso_few) + 2e-12:
            violations += 1
    ok = worst <= 1e-12 and violations == 0
    assert acceptance_log(5, "split-detector identity and multimode ordering", ok,
                          f"max identity error {worst:.1e} over 20 gains, {violations}/1000 ordering violations")


def test_criterion_06_monte_carlo_matches_analytic(acceptance_log, cfg):
    table = monte_carlo_grid(cfg.seed)
    z = np.array([r[6] for r in table.rows])
    ok = len(z) == 27 and bool(np.all(np.abs(z) <= 3.0))
    assert acceptance_log(6, "Monte Carlo vs analytic floors", ok,
                          f"{len(z)} grid points, max |z| = {np.abs(z).max():.2f} SE")


def test_criterion_07_fig3b_floor_and_peaks(acceptance_log, runs, cfg):
    res = runs["fig3b"]
    floor = _got(res, "squeezed floor below coherent").got
    rbw = _got(res, "resolution bandwidth")
    settings = _got(res, "VBW 100 Hz and 20 averages")
    mono = _got(res, "peak power monotone")
    m = cfg.measurement
    ok = (abs(floor - 4.0) <= 0.2 and rbw.passed and settings.passed and mono.passed
          and (m.rbw, m.vbw, m.averages) == (10e3, 100.0, 20))
    assert acceptance_log(7, "fig3b squeezed floor and peaks", ok,
                          f"floor {floor:.3f} dB below coherent, RBW {rbw.got:.0f} Hz, peaks monotone {mono.passed}")


def test_criterion_08_fig3c_separation(acceptance_log, runs):
    res = runs["fig3c"]
    sep = _got(res, "SNR separation at the largest drive").got
    dom = _got(res, "squeezed SNR >= coherent")
    ok = abs(sep - 3.0) <= 0.2 and dom.passed
    assert acceptance_log(8, "fig3c SNR separation", ok, f"{sep:.3f} dB at the largest drive, dominance {dom.passed}")


def test_criterion_09_fig3a_aperture(acceptance_log, runs):
    res = runs["fig3a"]
    coincide = _got(res, "argmax SNR == argmin noise")
    gain = _got(res, "peak SNR gain over classical").got
    ok = coincide.passed and abs(gain - 0.7) <= 0.2
    assert acceptance_log(9, "fig3a SNR peak at noise minimum", ok,
                          f"indices {coincide.got}, peak gain {gain:.3f} dB vs 0.7 +/- 0.2")


def test_criterion_10_determinism(acceptance_log, runs, cfg):
    differing = []
    for name in SCENARIOS:
        again = run_scenario(name, cfg, workers=3)
        for key, table in runs[name].tables.items():
            if table.to_csv().encode() != again.tables[key].to_csv().encode():
                differing.append(f"{name}/{key}")
    ok = not differing
    detail = "all CSVs byte-identical (workers 1 vs 3)" if ok else f"differs: {', '.join(differing)}"
    assert acceptance_log(10, "determinism", ok, detail)
