"""Time-domain photocurrent simulation and spectrum-analyzer emulation.

Streams are photon counts per sample on four channels ordered
``(probe_left, probe_right, conj_left, conj_right)``; the conjugate halves are
labelled by the probe half they are correlated with. Shot noise is replaced by
Gaussian noise of equal variance.

Random numbers come from counter-based Philox substreams keyed by block index,
so output does not depend on how blocks are scheduled across workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal

from .mechanics import C, H
from .quanta import TwinBeamState, amplify, apply_loss
from .spatial import ModeLayout, SplitDetectorGeometry, displacement_signal

CHANNELS = ("probe_left", "probe_right", "conj_left", "conj_right")

# half-width of the window main lobe, in bins
_LOBE_BINS = {"flattop": 5, "hann": 2, "hamming": 2, "blackmanharris": 4, "boxcar": 1}


class InsufficientSamplesError(ValueError):
    def __init__(self, required: int, available: int):
        super().__init__(f"need at least {required} samples for the requested "
                         f"rbw/vbw/averages, got {available}")
        self.required = required
        self.available = available


def photon_energy(wavelength: float) -> float:
    return H * C / wavelength


def _rng(seed, index: int) -> np.random.Generator:
    entropy = seed if isinstance(seed, int) else tuple(int(s) for s in seed)
    ss = np.random.SeedSequence(entropy, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(cov)
    scale = max(float(np.abs(w).max()), 1.0)
    if w.min() < -1e-9 * scale:
        raise ValueError("channel covariance is not positive semidefinite")
    return v * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True)
class Modulation:
    """Sinusoidal cantilever motion.

    ``amplitude`` is the peak displacement (m); ``counts_amplitude`` the peak
    differential count shift between the probe halves per sample.
    """

    frequency: float
    amplitude: float
    counts_amplitude: float

    @classmethod
    def from_geometry(cls, frequency: float, amplitude: float, geometry: SplitDetectorGeometry,
                      probe_power: float, wavelength: float, sample_rate: float) -> "Modulation":
        watts = displacement_signal(amplitude, geometry, probe_power)
        return cls(frequency, amplitude, watts / photon_energy(wavelength) / sample_rate)


@dataclass(frozen=True)
class SimulationRun:
    sample_rate: float
    duration: float
    seed: int | tuple
    mean: np.ndarray
    covariance: np.ndarray = field(repr=False)
    reference_variance: float = 0.0
    modulation: Modulation | None = None
    electronic_noise: float = 0.0
    block_size: int = 1 << 16

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(4)
        cov = np.array(self.covariance, dtype=float)
        if cov.shape != (4, 4):
            raise ValueError("covariance must be 4x4")
        if not np.allclose(cov, cov.T, rtol=1e-12, atol=0):
            raise ValueError("covariance must be symmetric")
        _psd_factor(cov)
        if self.sample_rate <= 0 or self.duration <= 0:
            raise ValueError("sample_rate and duration must be positive")
        if self.modulation is not None and self.sample_rate <= 2 * self.modulation.frequency:
            raise ValueError("sample_rate must exceed twice the modulation frequency")
        if self.electronic_noise < 0:
            raise ValueError("electronic_noise must be non-negative")
        for a in (mean, cov):
            a.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    def with_(self, **changes) -> "SimulationRun":
        return replace(self, **changes)


def _halves(state: TwinBeamState):
    """Split a pair evenly between the detector halves (independent areas)."""
    m = np.array([state.mean_probe, state.mean_probe, state.mean_conj, state.mean_conj]) / 2
    c = state.number_cov / 2
    cov = np.zeros((4, 4))
    for p, q in ((0, 2), (1, 3)):
        cov[p, p], cov[q, q] = c[0, 0], c[1, 1]
        cov[p, q] = cov[q, p] = c[0, 1]
    return m, cov


def run_from_state(state: TwinBeamState, sample_rate: float, duration: float, seed,
                   modulation: Modulation | None = None, electronic_noise: float = 0.0,
                   **kw) -> SimulationRun:
    """Run whose counts per sample follow ``state`` split across both halves."""
    m, cov = _halves(state)
    return SimulationRun(sample_rate, duration, seed, m, cov, reference_variance=state.total_mean,
                         modulation=modulation, electronic_noise=electronic_noise, **kw)


def run_from_layout(layout: ModeLayout, gain: float, wavelength: float, sample_rate: float,
                    duration: float, seed, modulation: Modulation | None = None,
                    electronic_noise: float = 0.0, **kw) -> SimulationRun:
    """Run for a coherence-area layout at total optical power ``layout.total_power``.

    Each area is an independent pair seen with its own efficiency; the shot
    noise reference is all power detected at the detector efficiency.
    """
    photons = layout.total_power / photon_energy(wavelength) / sample_rate
    seed_total = photons / (2 * gain - 1)
    eta_d = layout.detector_efficiency
    parts = [(layout.isolated_power, eta_d)] + [(m.power, m.overlap) for m in layout.split_modes]
    mean = np.zeros(4)
    cov = np.zeros((4, 4))
    for power, eta in parts:
        if power <= 0:
            continue
        st = apply_loss(amplify(seed_total * power / layout.total_power, gain, wavelength), eta, eta)
        m, c = _halves(st)
        mean += m
        cov += c
    return SimulationRun(sample_rate, duration, seed, mean, cov, reference_variance=eta_d * photons,
                         modulation=modulation, electronic_noise=electronic_noise, **kw)


def coherent_reference(run: SimulationRun, seed=None) -> SimulationRun:
    """Same mean photon numbers, uncorrelated shot noise."""
    return run.with_(covariance=np.diag(run.mean), reference_variance=float(run.mean.sum()),
                     seed=run.seed if seed is None else seed)


def simulate_photocurrents(run: SimulationRun, workers: int = 1) -> np.ndarray:
    """Sample the four channel streams, shape ``(n_samples, 4)``."""
    n = run.n_samples
    bs = run.block_size
    factor = _psd_factor(run.covariance)
    out = np.empty((n, 4))
    sigma_e = math.sqrt(run.electronic_noise)
    mod = run.modulation

    def fill(i):
        start, stop = i * bs, min(n, (i + 1) * bs)
        rng = _rng(run.seed, i)
        block = np.einsum("ij,kj->ik", rng.standard_normal((stop - start, 4)), factor)
        block += run.mean
        if sigma_e:
            block += sigma_e * rng.standard_normal((stop - start, 4))
        if mod is not None and mod.counts_amplitude:
            t = np.arange(start, stop) / run.sample_rate
            shift = 0.5 * mod.counts_amplitude * np.sin(2 * np.pi * mod.frequency * t)
            block[:, 0] += shift
            block[:, 1] -= shift
        out[start:stop] = block

    blocks = range(-(-n // bs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, blocks))
    else:
        for i in blocks:
            fill(i)
    return out


def differential(streams: np.ndarray) -> np.ndarray:
    """Probe position minus conjugate position, ``(pL - pR) - (cL - cR)``."""
    s = np.asarray(streams)
    return (s[:, 0] - s[:, 1]) - (s[:, 2] - s[:, 3])


def quadrature_twin_beams(seed_photons: float, gain: float, eta_probe: float, eta_conj: float,
                          n_samples: int, seed) -> np.ndarray:
    """Independent oracle: linearized field-level simulation of the amplifier.

    Propagates vacuum/coherent quadrature noise through the Bogoliubov
    transformation and beam-splitter losses, then forms photon numbers
    ``|A|^2 + 2 A Re(da)``. Shares no code with the number-covariance algebra.
    Returns counts of shape ``(n_samples, 2)`` for (probe, conjugate).
    """
    rng = _rng(seed, 0)
    z = rng.standard_normal((n_samples, 8)) / 2
    da1 = z[:, 0] + 1j * z[:, 1]
    da2 = z[:, 2] + 1j * z[:, 3]
    dv1 = z[:, 4] + 1j * z[:, 5]
    dv2 = z[:, 6] + 1j * z[:, 7]
    g, gm = math.sqrt(gain), math.sqrt(gain - 1)
    alpha = math.sqrt(seed_photons)
    out1 = g * da1 - gm * np.conj(da2)
    out2 = g * da2 - gm * np.conj(da1)
    a1 = g * alpha
    a2 = -gm * alpha
    out1 = math.sqrt(eta_probe) * out1 + math.sqrt(1 - eta_probe) * dv1
    out2 = math.sqrt(eta_conj) * out2 + math.sqrt(1 - eta_conj) * dv2
    a1 *= math.sqrt(eta_probe)
    a2 *= math.sqrt(eta_conj)
    n1 = a1 ** 2 + 2 * a1 * out1.real
    n2 = a2 ** 2 + 2 * a2 * out2.real
    return np.column_stack([n1, n2])


# --- spectrum analyzer ------------------------------------------------------

def enbw_bins(window: str, n: int) -> float:
    w = signal.get_window(window, n)
    return n * float(np.sum(w ** 2)) / float(np.sum(w)) ** 2


def segment_length(sample_rate: float, rbw: float, window: str = "flattop") -> int:
    """FFT length whose equivalent noise bandwidth matches ``rbw``."""
    n = max(8, int(round(enbw_bins(window, 4096) * sample_rate / rbw)))
    return max(8, int(round(enbw_bins(window, n) * sample_rate / rbw)))


def video_segments(sample_rate: float, nperseg: int, rbw: float, vbw: float | None) -> int:
    """Number of consecutive periodograms a video filter of bandwidth ``vbw`` averages.

    A boxcar of duration T has noise bandwidth 1/(2T); matching it to ``vbw``
    gives T = 1/(2 vbw).
    """
    if vbw is None or vbw >= rbw:
        return 1
    return max(1, int(round(sample_rate / (2.0 * vbw * nperseg))))


def required_samples(sample_rate: float, rbw: float, vbw: float | None = None, averages: int = 1,
                     window: str = "flattop") -> int:
    n = segment_length(sample_rate, rbw, window)
    return n * video_segments(sample_rate, n, rbw, vbw) * averages


@dataclass(frozen=True)
class SpectrumTrace:
    """Averaged spectrum, power per resolution bandwidth (counts^2)."""

    frequencies: np.ndarray
    power: np.ndarray
    rbw: float
    vbw: float | None
    averages: int
    sample_rate: float
    window: str
    segment_length: int
    video_segments: int
    sweeps: np.ndarray = field(repr=False)

    @property
    def power_db(self) -> np.ndarray:
        return 10 * np.log10(self.power)

    @property
    def bin_spacing(self) -> float:
        return self.sample_rate / self.segment_length

    @property
    def density(self) -> np.ndarray:
        """One-sided PSD, counts^2/Hz."""
        return self.power / self.rbw

    @property
    def lobe_bins(self) -> int:
        return _LOBE_BINS.get(self.window, 3)

    def white_level(self, variance: float) -> float:
        """Expected per-bin power of white noise with per-sample ``variance``."""
        return 2.0 * variance * self.rbw / self.sample_rate

    def minus(self, level: float) -> "SpectrumTrace":
        """Subtract a flat floor (e.g. measured electronics noise)."""
        tiny = np.finfo(float).tiny
        return replace(self, power=np.maximum(self.power - level, tiny),
                       sweeps=np.maximum(self.sweeps - level, tiny))


def spectrum_analyze(stream: np.ndarray, sample_rate: float, rbw: float, vbw: float | None = None,
                     averages: int = 1, window: str = "flattop", span: tuple[float, float] | None = None,
                     detrend: str | bool = "constant") -> SpectrumTrace:
    """Emulate a spectrum analyzer on a single real stream.

    Non-overlapping segments are windowed so their noise bandwidth equals
    ``rbw``; ``vbw`` sets how many consecutive periodograms are boxcar averaged
    per sweep, and ``averages`` sweeps are averaged arithmetically.
    """
    x = np.asarray(stream, dtype=float)
    if x.ndim != 1:
        raise ValueError("spectrum_analyze expects a single 1-D stream")
    if averages < 1:
        raise ValueError("averages must be >= 1")
    nperseg = segment_length(sample_rate, rbw, window)
    nvid = video_segments(sample_rate, nperseg, rbw, vbw)
    need = nperseg * nvid * averages
    if x.size < need:
        raise InsufficientSamplesError(need, x.size)
    f, _, sxx = signal.spectrogram(x[:need], fs=sample_rate, window=window, nperseg=nperseg,
                                   noverlap=0, detrend=detrend, scaling="spectrum", mode="psd")
    sweeps = sxx.T.reshape(averages, nvid, -1).mean(axis=1)
    if span is not None:
        lo, hi = span
        keep = (f >= lo) & (f <= hi)
        f, sweeps = f[keep], sweeps[:, keep]
    actual_rbw = enbw_bins(window, nperseg) * sample_rate / nperseg
    return SpectrumTrace(f, sweeps.mean(axis=0), actual_rbw, vbw, averages, sample_rate, window,
                         nperseg, nvid, sweeps)


def _off_peak_mask(trace: SpectrumTrace, exclude=()) -> np.ndarray:
    df = trace.bin_spacing
    guard = 2 * trace.lobe_bins * df
    mask = trace.frequencies > guard
    for f0 in exclude:
        mask &= np.abs(trace.frequencies - f0) > guard
    return mask


def noise_floor(trace: SpectrumTrace, exclude=()) -> float:
    """Median per-bin power away from DC and the excluded tones."""
    mask = _off_peak_mask(trace, exclude)
    if not mask.any():
        raise ValueError("no off-peak bins left to estimate the floor")
    return float(np.median(trace.power[mask]))


def floor_with_error(trace: SpectrumTrace, exclude=()) -> tuple[float, float]:
    """Mean off-peak power and its standard error from sweep-to-sweep scatter."""
    mask = _off_peak_mask(trace, exclude)
    per_sweep = trace.sweeps[:, mask].mean(axis=1)
    if per_sweep.size < 2:
        raise ValueError("need at least two sweeps for a standard error")
    return float(per_sweep.mean()), float(per_sweep.std(ddof=1) / math.sqrt(per_sweep.size))


def peak_power(trace: SpectrumTrace, signal_freq: float) -> tuple[float, int]:
    f = trace.frequencies
    if not f[0] <= signal_freq <= f[-1]:
        raise ValueError(f"{signal_freq} Hz lies outside the trace span [{f[0]}, {f[-1]}]")
    centre = int(np.argmin(np.abs(f - signal_freq)))
    lo, hi = centre - trace.lobe_bins, centre + trace.lobe_bins + 1
    if lo < 0 or hi > f.size:
        raise ValueError("peak sits at the trace edge; widen the span")
    idx = lo + int(np.argmax(trace.power[lo:hi]))
    return float(trace.power[idx]), idx


def extract_snr(trace: SpectrumTrace, signal_freq: float) -> float:
    """Peak-bin power over the median off-peak floor, in dB."""
    peak, _ = peak_power(trace, signal_freq)
    return 10 * math.log10(peak / noise_floor(trace, exclude=(signal_freq,)))


def trace_rows(trace: SpectrumTrace):
    """(frequency, power, power_dB) rows for CSV output."""
    return zip(trace.frequencies, trace.power, trace.power_db)
