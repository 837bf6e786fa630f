"""Photon-number statistics of the phase-insensitive twin-beam amplifier.

All beams are bright, so number fluctuations are Gaussian and fully described
by the means and the 2x2 number covariance of the (probe, conjugate) pair.
Counts are per unit counting window; a coherent beam has variance == mean.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_WAVELENGTH = 795e-9

_PSD_TOL = 1e-9


@dataclass(frozen=True)
class LossChannel:
    transmission: float

    def __post_init__(self):
        if not 0.0 <= self.transmission <= 1.0:
            raise ValueError(f"transmission must lie in [0, 1], got {self.transmission}")


@dataclass(frozen=True)
class TwinBeamState:
    """Means and number covariance of a probe/conjugate pair.

    ``number_cov`` is ordered (probe, conjugate) and is stored read-only.
    """

    gain: float
    mean_probe: float
    mean_conj: float
    number_cov: np.ndarray = field(repr=False)
    wavelength: float = DEFAULT_WAVELENGTH

    def __post_init__(self):
        if self.gain < 1.0:
            raise ValueError(f"gain must be >= 1, got {self.gain}")
        if self.mean_probe < 0 or self.mean_conj < 0:
            raise ValueError("mean photon numbers must be non-negative")
        cov = np.array(self.number_cov, dtype=float)
        if cov.shape != (2, 2):
            raise ValueError(f"number_cov must be 2x2, got shape {cov.shape}")
        if not np.allclose(cov, cov.T, rtol=1e-12, atol=0.0):
            raise ValueError("number_cov must be symmetric")
        if np.any(np.diag(cov) < 0):
            raise ValueError("number_cov must have a non-negative diagonal")
        scale = max(float(np.max(np.abs(cov))), 1.0)
        if np.linalg.eigvalsh(cov).min() < -_PSD_TOL * scale:
            raise ValueError("number_cov is not positive semidefinite")
        cov.setflags(write=False)
        object.__setattr__(self, "number_cov", cov)

    @property
    def total_mean(self) -> float:
        return self.mean_probe + self.mean_conj

    @property
    def difference_variance(self) -> float:
        c = self.number_cov
        return float(c[0, 0] + c[1, 1] - 2.0 * c[0, 1])


def _check_gain(gain):
    if not gain >= 1.0:
        raise ValueError(f"gain must be >= 1, got {gain}")


def gain_from_interaction(kappa: float, t: float) -> float:
    """Amplifier gain ``G = cosh(kappa * t)**2`` for lumped coupling ``kappa``."""
    if kappa < 0 or t < 0:
        raise ValueError("kappa and t must be non-negative")
    return math.cosh(kappa * t) ** 2


def amplify(seed_rate: float, gain: float, wavelength: float = DEFAULT_WAVELENGTH) -> TwinBeamState:
    """Twin beams produced by seeding the amplifier with a coherent probe.

    Large-seed limit: the spontaneous (seed independent) contributions are
    dropped, so every moment is linear in ``seed_rate``.
    """
    if seed_rate < 0:
        raise ValueError("seed_rate must be non-negative")
    _check_gain(gain)
    g = float(gain)
    s = float(seed_rate)
    var_p = g * (2 * g - 1) * s
    var_c = (g - 1) * (2 * g - 1) * s
    cross = 2 * g * (g - 1) * s
    cov = np.array([[var_p, cross], [cross, var_c]])
    return TwinBeamState(g, g * s, (g - 1) * s, cov, wavelength)


def coherent_state(mean_probe: float, mean_conj: float = 0.0,
                   wavelength: float = DEFAULT_WAVELENGTH) -> TwinBeamState:
    """Two uncorrelated coherent beams (shot-noise reference)."""
    cov = np.diag([float(mean_probe), float(mean_conj)])
    return TwinBeamState(1.0, float(mean_probe), float(mean_conj), cov, wavelength)


def ideal_twin_noise(gain: float) -> float:
    """Lossless intensity-difference noise relative to shot noise, 1/(2G-1)."""
    _check_gain(gain)
    return 1.0 / (2.0 * gain - 1.0)


def _as_transmission(channel) -> float:
    if isinstance(channel, LossChannel):
        return channel.transmission
    return LossChannel(float(channel)).transmission


def apply_loss(state: TwinBeamState, probe_loss, conj_loss) -> TwinBeamState:
    """Send each beam through an independent beam-splitter loss.

    Binomial thinning: ``<n'> = eta <n>``, ``Var' = eta^2 Var + eta (1 - eta) <n>``
    and the cross covariance scales by ``eta_p * eta_c``. Channels may be given
    as :class:`LossChannel` or bare transmissions.
    """
    ep = _as_transmission(probe_loss)
    ec = _as_transmission(conj_loss)
    c = state.number_cov
    mp, mc = state.mean_probe, state.mean_conj
    cov = np.array([
        [ep * ep * c[0, 0] + ep * (1 - ep) * mp, ep * ec * c[0, 1]],
        [ep * ec * c[1, 0], ec * ec * c[1, 1] + ec * (1 - ec) * mc],
    ])
    return TwinBeamState(state.gain, ep * mp, ec * mc, cov, state.wavelength)


def intensity_difference_noise(state: TwinBeamState) -> float:
    """Var(N_probe - N_conj) relative to a coherent beam of equal total power."""
    total = state.total_mean
    if total <= 0:
        raise ValueError("intensity-difference noise undefined for zero total power")
    return state.difference_variance / total


def symmetric_loss_noise(gain: float, efficiency: float) -> float:
    """Closed form of the normalized difference noise after equal losses.

    Equals ``(2G - 1 + 2 eta - 2 G eta) / (2G - 1)``.
    """
    _check_gain(gain)
    eta = LossChannel(efficiency).transmission
    return (2 * gain - 1 + 2 * eta - 2 * gain * eta) / (2 * gain - 1)


# --- squeezing unit conversions ------------------------------------------

# R = exp(-2 r) is the variance convention; the "paper" convention reads the
# noise factor as exp(-r).
_R_EXPONENT = {"variance": 2.0, "paper": 1.0}


def db_to_ratio(db):
    """Noise reduction in dB (positive = below shot noise) to power ratio."""
    out = 10.0 ** (-np.asarray(db, dtype=float) / 10.0)
    return out if np.ndim(db) else float(out)


def ratio_to_db(ratio):
    r = np.asarray(ratio, dtype=float)
    if np.any(r <= 0):
        raise ValueError("noise ratio must be positive")
    out = -10.0 * np.log10(r)
    return out if np.ndim(ratio) else float(out)


def ratio_to_squeezing_parameter(ratio, convention: str = "variance"):
    k = _exponent(convention)
    r = np.asarray(ratio, dtype=float)
    if np.any(r <= 0):
        raise ValueError("noise ratio must be positive")
    out = -np.log(r) / k
    return out if np.ndim(ratio) else float(out)


def squeezing_parameter_to_ratio(r, convention: str = "variance"):
    k = _exponent(convention)
    out = np.exp(-k * np.asarray(r, dtype=float))
    return out if np.ndim(r) else float(out)


def _exponent(convention):
    try:
        return _R_EXPONENT[convention]
    except KeyError:
        raise ValueError(f"unknown squeezing convention {convention!r}; "
                         f"expected one of {sorted(_R_EXPONENT)}") from None


_TO_RATIO = {
    "ratio": lambda v, conv: _valid_ratio(v),
    "db": lambda v, conv: db_to_ratio(v),
    "r": lambda v, conv: squeezing_parameter_to_ratio(v, conv),
}
_FROM_RATIO = {
    "ratio": lambda R, conv: R,
    "db": lambda R, conv: ratio_to_db(R),
    "r": lambda R, conv: ratio_to_squeezing_parameter(R, conv),
}


def _valid_ratio(v):
    if np.any(np.asarray(v, dtype=float) <= 0):
        raise ValueError("noise ratio must be positive")
    return v


def convert_squeezing(value, from_unit: str, to_unit: str, convention: str = "variance"):
    """Convert between ``"ratio"``, ``"db"`` and squeezing parameter ``"r"``.

    >>> round(convert_squeezing(4.0, "db", "ratio"), 3)
    0.398
    """
    try:
        to_ratio = _TO_RATIO[from_unit]
        from_ratio = _FROM_RATIO[to_unit]
    except KeyError:
        raise ValueError(f"units must be among {sorted(_TO_RATIO)}") from None
    _exponent(convention)
    return from_ratio(to_ratio(value, convention), convention)
