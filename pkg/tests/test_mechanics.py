import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from twinsense.mechanics import (
    K_B,
    CantileverParams,
    back_action_psd,
    crossing_power,
    crossing_power_bisect,
    min_displacement,
    noise_budget,
    snl_psd,
    squeeze_factor,
    thermal_psd,
)

LAM = 795e-9
LEVER = CantileverParams()

levers = st.builds(CantileverParams, spring_constant=st.floats(1e-3, 50.0),
                   quality_factor=st.floats(1.0, 1e5))


def test_shot_noise_at_one_milliwatt_matches_mpmath():
    mpmath.mp.dps = 40
    h = mpmath.mpf("6.62607015e-34")
    c = mpmath.mpf(299792458)
    exact = h * c * mpmath.mpf("795e-9") / (8 * mpmath.pi ** 2 * mpmath.mpf("1e-3"))
    assert snl_psd(1e-3, LAM) == pytest.approx(float(exact), rel=1e-14)


def test_reported_noise_levels_at_130_uW():
    assert math.sqrt(snl_psd(130e-6, LAM)) == pytest.approx(3.9e-15, rel=0.02)
    assert math.sqrt(back_action_psd(130e-6, LAM, LEVER)) == pytest.approx(33e-18, rel=0.03)


def test_snl_scales_inversely_with_power():
    assert snl_psd(4e-3, LAM) == pytest.approx(snl_psd(1e-3, LAM) / 4, rel=1e-14)
    np.testing.assert_allclose(snl_psd(np.array([1e-3, 2e-3]), LAM), [snl_psd(1e-3, LAM), snl_psd(2e-3, LAM)])


@given(st.floats(-6.0, 0.0), levers)
def test_shot_noise_back_action_product_is_power_independent(log_p, lever):
    p = 10 ** log_p
    ref = snl_psd(1e-6, LAM) * back_action_psd(1e-6, LAM, lever)
    assert snl_psd(p, LAM) * back_action_psd(p, LAM, lever) == pytest.approx(ref, rel=1e-12)


@given(levers, st.floats(0.0, 30.0), st.floats(400e-9, 1600e-9))
def test_crossing_closed_form_matches_bisection(lever, db, lam):
    closed = crossing_power(lever, lam, db)
    assert crossing_power_bisect(lever, lam, db) == pytest.approx(closed, rel=1e-9)
    squeezed_snl = snl_psd(closed, lam) * 10 ** (-db / 10)
    assert back_action_psd(closed, lam, lever) == pytest.approx(squeezed_snl, rel=1e-12)


def test_reported_crossing_powers():
    assert crossing_power(LEVER, LAM) == pytest.approx(15e-3, rel=0.05)
    assert crossing_power(LEVER, LAM, 4.0) == pytest.approx(10e-3, rel=0.05)
    with pytest.raises(ValueError):
        crossing_power(LEVER, LAM, -1.0)


def test_caves_scaling_raises_back_action():
    plain = back_action_psd(1e-3, LAM, LEVER, 6.0)
    assert plain == back_action_psd(1e-3, LAM, LEVER)
    assert back_action_psd(1e-3, LAM, LEVER, 6.0, caves_scaling=True) == pytest.approx(plain * 10 ** 0.6)


def test_thermal_psd_integrates_to_equipartition():
    lever = CantileverParams(temperature=300.0)
    f0 = lever.fundamental_frequency
    bw = f0 / lever.thermal_q
    edges = [1e-3, f0 - 50 * bw, f0 - bw, f0, f0 + bw, f0 + 50 * bw, 1e3 * f0]
    total = sum(integrate.quad(thermal_psd, a, b, args=(lever,), limit=500, epsrel=1e-10)[0]
                for a, b in zip(edges, edges[1:]))
    total += integrate.quad(thermal_psd, 1e3 * f0, np.inf, args=(lever,))[0]
    assert total == pytest.approx(K_B * 300.0 / lever.spring_constant, rel=1e-3)


def test_thermal_q_and_mass():
    lever = CantileverParams(thermal_quality_factor=10.0)
    assert lever.thermal_q == 10.0
    assert CantileverParams().thermal_q == 124.0
    assert CantileverParams().effective_mass == pytest.approx(0.2 / (2 * math.pi * 13e3) ** 2)
    assert thermal_psd(13e3, CantileverParams()) > thermal_psd(13e3, lever)
    with pytest.raises(ValueError):
        thermal_psd(0.0, lever)


def test_minimum_displacement_conventions():
    coh = min_displacement(130e-6, LAM, 10e3)
    assert coh == pytest.approx(392e-15, abs=1.2e-15 + 0.02 * 392e-15)
    assert min_displacement(130e-6, LAM, 10e3, 4.0, "paper") == pytest.approx(156e-15, abs=1.2e-15 + 0.02 * 156e-15)
    assert min_displacement(130e-6, LAM, 10e3, 4.0) == pytest.approx(coh / 10 ** 0.2)
    assert squeeze_factor(0.0, "paper") == squeeze_factor(0.0) == 1.0
    with pytest.raises(ValueError):
        squeeze_factor(1.0, "other")
    with pytest.raises(ValueError):
        min_displacement(130e-6, LAM, 0.0)


def test_budget_consistency():
    b = noise_budget(130e-6, LAM, 745e3, LEVER, 4.0)
    assert b.sql == pytest.approx(b.shot_noise + b.back_action)
    assert b.squeezed_floor < b.sql
    assert b.shot_noise_dominant
    assert noise_budget(130e-6, LAM, 745e3, LEVER, 0.0).squeezed_floor == pytest.approx(b.sql, rel=1e-15)
    assert not noise_budget(1.0, LAM, 745e3, LEVER).shot_noise_dominant
    assert set(b.as_dict()) >= {"thermal", "crossing_power", "min_displacement_paper"}


def test_parameter_validation():
    with pytest.raises(ValueError):
        CantileverParams(spring_constant=0.0)
    with pytest.raises(ValueError):
        CantileverParams(quality_factor=0.5)
    with pytest.raises(ValueError):
        snl_psd(0.0, LAM)
    with pytest.raises(ValueError):
        back_action_psd(-1.0, LAM, LEVER)
