"""Coherence-area bookkeeping for split-photodiode readout of twin beams.

A layout describes one beam; its partner is its mirror image about the
propagation axis, so each coherence area has a correlated twin landing on the
matching half of the detector. Areas that straddle the split line are counted
with an effective detection efficiency ``eta_i``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import ndtr, ndtri
from scipy.stats import norm

from .quanta import (
    TwinBeamState,
    apply_loss,
    db_to_ratio,
    intensity_difference_noise,
)

_POWER_RTOL = 1e-9


class LinearRangeWarning(UserWarning):
    """Displacement is too large for the linearized knife-edge response."""


@dataclass(frozen=True)
class SplitMode:
    power: float
    overlap: float

    def __post_init__(self):
        if self.power < 0:
            raise ValueError("split-mode power must be non-negative")
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError(f"overlap must lie in [0, 1], got {self.overlap}")


@dataclass(frozen=True)
class ModeLayout:
    """Partition of the twin-beam power into isolated and split coherence areas."""

    total_power: float
    isolated_power: float
    split_modes: tuple[SplitMode, ...] = ()
    detector_efficiency: float = 1.0

    def __post_init__(self):
        modes = tuple(m if isinstance(m, SplitMode) else SplitMode(*m) for m in self.split_modes)
        object.__setattr__(self, "split_modes", modes)
        if self.total_power < 0 or self.isolated_power < 0:
            raise ValueError("powers must be non-negative")
        if not 0.0 <= self.detector_efficiency <= 1.0:
            raise ValueError("detector_efficiency must lie in [0, 1]")
        accounted = self.isolated_power + sum(m.power for m in modes)
        if abs(accounted - self.total_power) > _POWER_RTOL * max(abs(self.total_power), 1e-300):
            raise ValueError(
                f"isolated + split powers ({accounted!r}) must equal total_power "
                f"({self.total_power!r})")

    @property
    def split_power(self) -> float:
        return self.total_power - self.isolated_power

    @classmethod
    def isolated(cls, total_power: float, detector_efficiency: float = 1.0) -> "ModeLayout":
        return cls(total_power, total_power, (), detector_efficiency)

    def to_dict(self) -> dict:
        return {
            "total_power": self.total_power,
            "isolated_power": self.isolated_power,
            "detector_efficiency": self.detector_efficiency,
            "split_modes": [{"power": m.power, "overlap": m.overlap} for m in self.split_modes],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModeLayout":
        modes = tuple(SplitMode(float(m["power"]), float(m["overlap"]))
                      for m in data.get("split_modes", ()))
        return cls(float(data["total_power"]), float(data["isolated_power"]), modes,
                   float(data.get("detector_efficiency", 1.0)))


@dataclass(frozen=True)
class SplitDetectorGeometry:
    """Split photodiode seen by a Gaussian spot.

    ``beam_waist`` is the 1/e^2 intensity radius referred to cantilever
    displacement (lever gain folded in). ``electronic_noise`` is the
    electronics floor relative to shot noise at ``reference_power``.
    """

    beam_waist: float
    responsivity: float = 0.6
    electronic_noise: float = 0.0
    reference_power: float = 130e-6
    gap: float = 0.0

    def __post_init__(self):
        if self.beam_waist <= 0:
            raise ValueError("beam_waist must be positive")
        if self.responsivity <= 0:
            raise ValueError("responsivity must be positive")
        if self.gap < 0:
            raise ValueError("gap must be non-negative")
        if self.electronic_noise < 0:
            raise ValueError("electronic_noise must be non-negative")


def _check_gain(gain):
    if not gain >= 1.0:
        raise ValueError(f"gain must be >= 1, got {gain}")


def isolated_mode_noise(gain: float, efficiency: float) -> float:
    """Absolute pair noise ``eta * (2G - 1 + 2 eta - 2 G eta)`` per unit seed."""
    return efficiency * (2 * gain - 1 + 2 * efficiency - 2 * gain * efficiency)


def split_detector_noise(layout: ModeLayout, gain: float) -> float:
    """Differential noise of a mode layout relative to shot noise.

    Isolated areas contribute ``n_s / (2G - 1)`` per unit power with
    ``n_s = 2G - 1 + 2 eta_d - 2 G eta_d``; each split area contributes
    ``eta_i (2G - 1 + 2 eta_i - 2 G eta_i) / (eta_d (2G - 1))``.
    """
    _check_gain(gain)
    if layout.total_power <= 0:
        raise ValueError("total_power must be positive")
    eta_d = layout.detector_efficiency
    norm = 2.0 * gain - 1.0
    n_s = norm + 2 * eta_d - 2 * gain * eta_d
    acc = layout.isolated_power * n_s / norm
    if layout.split_modes:
        if eta_d == 0:
            raise ValueError("detector_efficiency must be non-zero when split modes are present")
        for mode in layout.split_modes:
            acc += mode.power * isolated_mode_noise(gain, mode.overlap) / (eta_d * norm)
    return acc / layout.total_power


def single_mode_split_ratio(gain: float) -> float:
    """Noise of one coherence area split evenly across both halves over the multimode ideal.

    Evaluates ``split_detector_noise`` for ``P_s = 0`` and a single mode with
    ``eta_1 = 0.5`` at unit detector efficiency. The closed form is ``G / 2``,
    so the penalty is a factor of two only at ``G = 4``.
    """
    layout = ModeLayout(1.0, 0.0, (SplitMode(1.0, 0.5),), 1.0)
    return split_detector_noise(layout, gain) * (2.0 * gain - 1.0)


def gain_for_squeezing(squeezing_db: float, detector_efficiency: float = 1.0) -> float:
    """Gain whose isolated-mode noise at ``detector_efficiency`` is ``squeezing_db`` below SNL.

    Inverts ``1 - eta + eta / (2G - 1) = 10**(-dB/10)``.
    """
    eta = detector_efficiency
    if not 0.0 < eta <= 1.0:
        raise ValueError("detector_efficiency must lie in (0, 1]")
    if squeezing_db < 0:
        raise ValueError("squeezing_db must be non-negative")
    target = db_to_ratio(squeezing_db)
    excess = target - (1.0 - eta)
    if excess <= 0:
        raise ValueError(
            f"{squeezing_db} dB is unreachable with efficiency {eta}; "
            f"limit is {-10 * math.log10(1 - eta) if eta < 1 else math.inf:.3f} dB")
    # 0 dB may land a rounding error below 1
    return max(1.0, 0.5 * (eta / excess + 1.0))


def half_plane_overlap(offset, coherence_radius: float, detector_efficiency: float = 1.0):
    """Effective efficiency of a Gaussian coherence area centred ``offset`` from the split.

    The fraction of the area on its majority half is ``Phi(|x| / sigma)``, scaled
    by the detector efficiency so that a fully enclosed area reduces to the
    isolated case.
    """
    if coherence_radius <= 0:
        raise ValueError("coherence_radius must be positive")
    frac = ndtr(np.abs(np.asarray(offset, dtype=float)) / coherence_radius)
    out = detector_efficiency * frac
    return out if np.ndim(offset) else float(out)


def layout_from_offsets(total_power: float, isolated_power: float,
                        offsets: Sequence[float], coherence_radius: float,
                        detector_efficiency: float = 1.0,
                        weights: Sequence[float] | None = None) -> ModeLayout:
    """Build a layout whose split areas sit at the given offsets from the split line."""
    offsets = np.asarray(offsets, dtype=float)
    if weights is None:
        weights = np.ones_like(offsets)
    weights = np.asarray(weights, dtype=float)
    split_total = total_power - isolated_power
    if offsets.size == 0:
        return ModeLayout(total_power, total_power, (), detector_efficiency)
    powers = split_total * weights / weights.sum()
    etas = half_plane_overlap(offsets, coherence_radius, detector_efficiency)
    modes = tuple(SplitMode(float(p), float(e)) for p, e in zip(powers, np.atleast_1d(etas)))
    # absorb rounding so the bookkeeping invariant holds exactly
    isolated = total_power - sum(m.power for m in modes)
    return ModeLayout(total_power, isolated, modes, detector_efficiency)


# --- displacement transduction ------------------------------------------

KNIFE_EDGE_SLOPE = math.sqrt(8.0 / math.pi)


def gap_factor(geometry: SplitDetectorGeometry) -> float:
    """Slope reduction from the dead zone between the halves, exp(-g^2 / 2w^2)."""
    return math.exp(-geometry.gap ** 2 / (2.0 * geometry.beam_waist ** 2))


def displacement_signal(displacement, geometry: SplitDetectorGeometry, power: float):
    """Linearized differential power (W) of the two detector halves.

    ``power * sqrt(8/pi) * d / w``, reduced by the dead-zone factor.
    """
    d = np.asarray(displacement, dtype=float)
    if np.any(np.abs(d) > 0.1 * geometry.beam_waist):
        warnings.warn("displacement exceeds 10% of the beam waist; linear response "
                      "is no longer accurate", LinearRangeWarning, stacklevel=2)
    out = power * KNIFE_EDGE_SLOPE * d / geometry.beam_waist * gap_factor(geometry)
    return out if np.ndim(displacement) else float(out)


def snl_calibrated_waist(wavelength: float, signal_fraction: float = 1.0,
                         efficiency: float = 1.0) -> float:
    """Lever-referred waist for which the split-detector shot noise equals ``hc lambda / (8 pi^2 P)``.

    ``signal_fraction`` is the share of the detected power that carries the
    displacement (the probe); the rest only adds noise.
    """
    if not 0 < signal_fraction <= 1 or not 0 < efficiency <= 1:
        raise ValueError("signal_fraction and efficiency must lie in (0, 1]")
    return wavelength * signal_fraction * math.sqrt(efficiency) / (math.pi * math.sqrt(2 * math.pi))


# --- razor-blade aperture sweep -------------------------------------------

# split detector on the full probe vs a blade at the beam centre: twice the
# slope, twice the shot noise
UNAPERTURED_SNR_RATIO = 2.0


@dataclass(frozen=True)
class ApertureSweep:
    """Per-transmission noise and SNR of an apertured twin-beam readout.

    ``noise`` is relative to coherent light of equal total detected power;
    ``snr`` and ``snr_coherent`` are in units of the classical apertured readout
    (coherent probe alone), so ``snr_coherent`` peaks at 1 for ``t = 0``.
    """

    conj_transmission: np.ndarray
    probe_transmission: float
    noise: np.ndarray
    snr: np.ndarray
    snr_coherent: np.ndarray
    variance: np.ndarray = field(repr=False)

    @property
    def noise_db(self):
        return 10 * np.log10(self.noise)

    @property
    def snr_db(self):
        return 10 * np.log10(self.snr)

    @property
    def snr_coherent_db(self):
        return 10 * np.log10(self.snr_coherent)

    @property
    def snr_unapertured_db(self):
        """``snr`` against an unapertured coherent split-detector readout instead."""
        return self.snr_db - 10 * np.log10(UNAPERTURED_SNR_RATIO)

    @property
    def peak_snr_gain_db(self) -> float:
        """Best squeezed SNR over best coherent SNR on the sweep grid."""
        return float(10 * np.log10(self.snr.max() / self.snr_coherent.max()))


def aperture_sweep(state: TwinBeamState, conj_transmissions: Sequence[float],
                   probe_transmission: float = 0.5,
                   detector_efficiency: float = 1.0) -> ApertureSweep:
    """Sweep the conjugate aperture at fixed probe aperture.

    Apertures act as losses (binomial thinning) on top of the detector
    efficiency. The displacement signal rides on the probe only, so its size
    does not depend on the conjugate transmission.
    """
    ts = np.asarray(conj_transmissions, dtype=float)
    if np.any((ts < 0) | (ts > 1)):
        raise ValueError("transmissions must lie in [0, 1]")
    ep = probe_transmission * detector_efficiency
    noise = np.empty_like(ts)
    var = np.empty_like(ts)
    coh_var = np.empty_like(ts)
    for k, t in enumerate(ts):
        lossy = apply_loss(state, ep, t * detector_efficiency)
        noise[k] = intensity_difference_noise(lossy)
        var[k] = lossy.difference_variance
        coh_var[k] = lossy.total_mean
    classical = ep * state.mean_probe
    return ApertureSweep(ts, probe_transmission, noise, classical / var, classical / coh_var, var)


def knife_edge_classical_snr(transmission, electronic_noise: float = 0.0):
    """Relative SNR of a coherent beam read out behind a single razor blade.

    The blade passes a fraction ``T`` of a Gaussian spot; the slope is the
    profile density at the edge and the noise is shot noise of the passed power
    plus an electronics floor (relative to shot noise of the full beam).
    Normalized so a blade at the beam centre with no electronics gives 1.
    """
    t = np.asarray(transmission, dtype=float)
    z = ndtri(np.clip(t, 1e-300, 1 - 1e-16))
    snr = norm.pdf(z) ** 2 / (t + electronic_noise)
    ref = norm.pdf(0.0) ** 2 / 0.5
    out = snr / ref
    return out if np.ndim(transmission) else float(out)


def optimal_knife_edge_transmission(electronic_noise: float = 0.0) -> float:
    """Blade transmission maximizing :func:`knife_edge_classical_snr`."""
    res = minimize_scalar(lambda t: -knife_edge_classical_snr(t, electronic_noise),
                          bounds=(1e-6, 1 - 1e-6), method="bounded",
                          options={"xatol": 1e-10})
    return float(res.x)
