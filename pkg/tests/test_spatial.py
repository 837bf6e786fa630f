import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from twinsense.mechanics import H, C, snl_psd
from twinsense.quanta import amplify, symmetric_loss_noise
from twinsense.spatial import (
    KNIFE_EDGE_SLOPE,
    LinearRangeWarning,
    ModeLayout,
    SplitDetectorGeometry,
    SplitMode,
    aperture_sweep,
    displacement_signal,
    gain_for_squeezing,
    gap_factor,
    half_plane_overlap,
    isolated_mode_noise,
    knife_edge_classical_snr,
    layout_from_offsets,
    optimal_knife_edge_transmission,
    single_mode_split_ratio,
    snl_calibrated_waist,
    split_detector_noise,
)

G_GRID = np.linspace(1.0, 20.0, 20)


@pytest.mark.parametrize("gain", G_GRID)
def test_isolated_lossless_layout_is_ideal(gain):
    layout = ModeLayout.isolated(1e-4, 1.0)
    assert abs(split_detector_noise(layout, gain) - 1 / (2 * gain - 1)) <= 1e-12


@given(st.floats(1.0, 30.0), st.floats(0.05, 1.0))
def test_isolated_layout_equals_symmetric_loss(gain, eta):
    layout = ModeLayout.isolated(2.0, eta)
    assert split_detector_noise(layout, gain) == pytest.approx(symmetric_loss_noise(gain, eta), rel=1e-12)


@given(st.floats(1.0, 30.0), st.floats(0.05, 1.0), st.floats(0.0, 1.0))
def test_split_mode_at_full_overlap_is_isolated(gain, eta, frac):
    split = ModeLayout(1.0, 1.0 - frac, (SplitMode(frac, eta),), eta)
    assert split_detector_noise(split, gain) == pytest.approx(
        split_detector_noise(ModeLayout.isolated(1.0, eta), gain), rel=1e-12)


def test_isolated_mode_noise_is_absolute_pair_variance():
    g, eta = 4.0, 0.7
    st_ = amplify(1.0, g)
    from twinsense.quanta import apply_loss
    lossy = apply_loss(st_, eta, eta)
    assert isolated_mode_noise(g, eta) == pytest.approx(lossy.difference_variance, rel=1e-12)


# Coherence areas that straddle the split are seen with reduced efficiency, so a
# beam with more (hence smaller) areas keeps more of its power isolated. On the
# operating domain below, every such layout is noisier than the all-isolated one
# and the noise falls as the isolated share grows.
layouts = st.builds(
    lambda g, eta, fracs, overlaps, iso: (g, eta, fracs, overlaps, iso),
    st.floats(3.0, 10.0),
    st.floats(0.85, 1.0),
    st.lists(st.floats(0.01, 1.0), min_size=1, max_size=6),
    st.lists(st.floats(0.5, 1.0), min_size=6, max_size=6),
    st.floats(0.0, 1.0),
)


@settings(max_examples=1000)
@given(layouts, st.floats(0.0, 1.0))
def test_multimode_beam_never_noisier(spec, more):
    g, eta, fracs, overlaps, iso = spec
    weights = np.asarray(fracs) / sum(fracs)

    def layout(isolated_share):
        modes = tuple(SplitMode((1 - isolated_share) * w, eta * o) for w, o in zip(weights, overlaps))
        return ModeLayout(1.0, isolated_share, modes, eta)

    few = split_detector_noise(layout(iso), g)
    many = split_detector_noise(layout(iso + (1 - iso) * more), g)
    best = split_detector_noise(ModeLayout.isolated(1.0, eta), g)
    assert best <= many + 1e-12
    assert many <= few + 1e-12


def test_layout_bookkeeping():
    with pytest.raises(ValueError):
        ModeLayout(1.0, 0.5, (SplitMode(0.4, 0.9),))
    with pytest.raises(ValueError):
        SplitMode(0.1, 1.5)
    lay = ModeLayout(1.0, 0.5, ((0.25, 0.9), (0.25, 0.6)), 0.96)
    assert lay.split_power == pytest.approx(0.5)
    assert ModeLayout.from_dict(lay.to_dict()) == lay
    with pytest.raises(ValueError):
        split_detector_noise(ModeLayout(1.0, 0.5, (SplitMode(0.5, 0.0),), 0.0), 2.0)


def test_half_plane_overlap_limits():
    assert half_plane_overlap(0.0, 1.0, 0.9) == pytest.approx(0.45)
    assert half_plane_overlap(50.0, 1.0, 0.9) == pytest.approx(0.9)
    assert half_plane_overlap(-1.0, 1.0) == half_plane_overlap(1.0, 1.0)


def test_layout_from_offsets_conserves_power():
    lay = layout_from_offsets(130e-6, 100e-6, [0.0, 0.5, 1.0], 1.0, 0.96)
    assert lay.isolated_power + sum(m.power for m in lay.split_modes) == pytest.approx(130e-6, rel=1e-12)
    assert [m.overlap for m in lay.split_modes] == sorted(m.overlap for m in lay.split_modes)


@given(st.floats(0.0, 30.0), st.floats(0.3, 1.0))
def test_gain_for_squeezing_inverts_loss_formula(db, eta):
    limit = -10 * math.log10(1 - eta) if eta < 1 else math.inf
    if db >= limit - 1e-9:
        with pytest.raises(ValueError):
            gain_for_squeezing(db, eta)
        return
    g = gain_for_squeezing(db, eta)
    assert g >= 1.0
    assert symmetric_loss_noise(g, eta) == pytest.approx(10 ** (-db / 10), rel=1e-9)


def test_knife_edge_slope_from_gaussian_profile():
    w, p, d = 1.0, 1.0, 1e-4

    def intensity(x, shift):
        return math.sqrt(2 / math.pi) / w * math.exp(-2 * (x - shift) ** 2 / w ** 2)

    def diff(shift):
        right = integrate.quad(intensity, 0, np.inf, args=(shift,), epsabs=1e-14)[0]
        left = integrate.quad(intensity, -np.inf, 0, args=(shift,), epsabs=1e-14)[0]
        return p * (right - left)

    slope = (diff(d) - diff(-d)) / (2 * d)
    assert slope == pytest.approx(KNIFE_EDGE_SLOPE * p / w, rel=1e-6)
    assert displacement_signal(d, SplitDetectorGeometry(w), p) == pytest.approx(diff(d), rel=1e-6)


@given(st.floats(-1e-9, 1e-9), st.floats(1e-6, 1e-3), st.floats(1e-6, 1.0))
def test_transduction_is_odd_and_linear(d, w, p):
    geo = SplitDetectorGeometry(w)
    assert displacement_signal(-d, geo, p) == -displacement_signal(d, geo, p)
    assert displacement_signal(2 * d, geo, p) == pytest.approx(2 * displacement_signal(d, geo, p), rel=1e-12)


def test_gap_reduces_slope_and_large_displacement_warns():
    geo = SplitDetectorGeometry(1e-3, gap=1e-3)
    assert gap_factor(geo) == pytest.approx(math.exp(-0.5))
    with pytest.warns(LinearRangeWarning):
        displacement_signal(2e-4, geo, 1e-3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        displacement_signal(5e-5, geo, 1e-3)


@pytest.mark.parametrize("frac,eta", [(1.0, 1.0), (0.6, 0.96), (0.8, 0.5)])
def test_calibrated_waist_reproduces_shot_noise_limit(frac, eta):
    lam, p0 = 795e-9, 130e-6
    geo = SplitDetectorGeometry(snl_calibrated_waist(lam, frac, eta))
    slope = displacement_signal(1e-15, geo, eta * p0 * frac) / 1e-15
    noise_w2 = 2 * (H * C / lam) * eta * p0
    assert noise_w2 / slope ** 2 == pytest.approx(snl_psd(p0, lam), rel=1e-12)


def test_isolated_4p5_db_source_keeps_about_4_db():
    # G set so that the lossless floor 1/(2G - 1) is 4.5 dB below shot noise
    g = (10 ** 0.45 + 1) / 2
    db = -10 * math.log10(split_detector_noise(ModeLayout.isolated(130e-6, 0.96), g))
    assert db == pytest.approx(4.19, abs=0.01)
    assert abs(db - 4.0) <= 0.3


@pytest.mark.parametrize("gain", [1.0, 2.0, 4.0, 9.5])
def test_single_mode_split_penalty(gain):
    # one area over both halves with eta_1 = 1/2: eta_1 (2G - 1 + 2 eta_1 - 2 G eta_1) = G / 2
    ratio = single_mode_split_ratio(gain)
    assert ratio == pytest.approx(gain / 2, rel=1e-12)
    assert (ratio == pytest.approx(2.0)) == (gain == 4.0)


def test_aperture_sweep_endpoints():
    g = gain_for_squeezing(2.8, 0.96)
    sweep = aperture_sweep(amplify(1e6, g), np.linspace(0, 1, 11), 0.5, 0.96)
    ep = 0.48
    assert sweep.noise[0] == pytest.approx(1 + 2 * ep * (g - 1), rel=1e-12)
    assert sweep.snr_coherent[0] == pytest.approx(1.0)
    assert int(np.argmax(sweep.snr)) == int(np.argmin(sweep.noise))
    assert np.all(np.diff(sweep.snr_coherent) < 0)
    with pytest.raises(ValueError):
        aperture_sweep(amplify(1.0, 2.0), [1.2])


def test_classical_knife_edge_optimum():
    assert knife_edge_classical_snr(0.5) == pytest.approx(1.0)
    t0 = optimal_knife_edge_transmission(0.0)
    t1 = optimal_knife_edge_transmission(1.0)
    assert 0.2 < t0 < t1 < 0.5
    assert optimal_knife_edge_transmission(1e6) == pytest.approx(0.5, abs=1e-4)
