"""Cantilever displacement-noise budget.

PSDs are one-sided, in m^2/Hz; bandwidth enters only through
:func:`min_displacement`.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import constants
from scipy.optimize import brentq

H = constants.h
C = constants.c
K_B = constants.k

CONVENTIONS = ("amplitude", "paper")


@dataclass(frozen=True)
class CantileverParams:
    """Mechanical constants. Defaults describe the measured gold-coated lever.

    ``thermal_quality_factor`` defaults to ``quality_factor`` and sets the
    damping of the fundamental used by :func:`thermal_psd`.
    """

    spring_constant: float = 0.2
    quality_factor: float = 124.0
    mode_frequency: float = 745e3
    fundamental_frequency: float = 13e3
    temperature: float = 300.0
    thermal_quality_factor: float | None = None

    def __post_init__(self):
        for name in ("spring_constant", "mode_frequency", "fundamental_frequency"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.quality_factor < 1:
            raise ValueError("quality_factor must be >= 1")
        if self.thermal_quality_factor is not None and self.thermal_quality_factor < 1:
            raise ValueError("thermal_quality_factor must be >= 1")

    @property
    def effective_mass(self) -> float:
        return self.spring_constant / (2 * math.pi * self.fundamental_frequency) ** 2

    @property
    def thermal_q(self) -> float:
        return self.quality_factor if self.thermal_quality_factor is None else self.thermal_quality_factor


def snl_psd(power, wavelength: float):
    """Shot-noise displacement PSD ``h c lambda / (8 pi^2 P)``."""
    p = np.asarray(power, dtype=float)
    if np.any(p <= 0):
        raise ValueError("optical power must be positive")
    out = H * C * wavelength / (8 * math.pi ** 2 * p)
    return out if np.ndim(power) else float(out)


def back_action_psd(power, wavelength: float, params: CantileverParams,
                    squeezing_db: float = 0.0, caves_scaling: bool = False):
    """Radiation-pressure displacement PSD ``8 P h Q^2 / (c lambda k^2)``.

    With ``caves_scaling`` the back action grows by the squeezing factor,
    as for squeezed vacuum injected into an interferometer.
    """
    p = np.asarray(power, dtype=float)
    if np.any(p < 0):
        raise ValueError("optical power must be non-negative")
    out = 8 * p * H * params.quality_factor ** 2 / (C * wavelength * params.spring_constant ** 2)
    if caves_scaling:
        out = out * 10 ** (squeezing_db / 10)
    return out if np.ndim(power) else float(out)


def crossing_power(params: CantileverParams, wavelength: float, squeezing_db: float = 0.0) -> float:
    """Power at which back action equals the (squeezed) shot-noise floor."""
    if squeezing_db < 0:
        raise ValueError("squeezing_db must be non-negative")
    return (C * wavelength * params.spring_constant / (8 * math.pi * params.quality_factor)
            * 10 ** (-squeezing_db / 20))


def crossing_power_bisect(params: CantileverParams, wavelength: float,
                          squeezing_db: float = 0.0) -> float:
    """Root of ``log(back / (snl * R))`` found numerically; cross-check for :func:`crossing_power`."""
    ratio = 10 ** (-squeezing_db / 10)

    def f(log_p):
        p = math.exp(log_p)
        return math.log(back_action_psd(p, wavelength, params)) - math.log(snl_psd(p, wavelength) * ratio)

    return math.exp(brentq(f, math.log(1e-15), math.log(1e6), xtol=1e-14, rtol=4 * np.finfo(float).eps,
                           maxiter=500))


def thermal_psd(f, params: CantileverParams):
    """Thermally driven displacement PSD of the fundamental flexural mode.

    Damped harmonic oscillator at ``fundamental_frequency`` with quality
    factor ``thermal_q``; integrates to ``k_B T / k``.
    """
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("frequency must be positive")
    w = 2 * math.pi * f
    w0 = 2 * math.pi * params.fundamental_frequency
    gamma = w0 / params.thermal_q
    m = params.effective_mass
    out = 4 * K_B * params.temperature * gamma / m / ((w0 ** 2 - w ** 2) ** 2 + (gamma * w) ** 2)
    return out if out.ndim else float(out)


def squeeze_factor(squeezing_db: float, convention: str = "amplitude") -> float:
    """Divisor applied to the coherent minimum displacement.

    ``"amplitude"`` uses 10**(dB/20), consistent with PSD algebra; ``"paper"``
    uses 10**(dB/10), which reproduces the reported 392 fm -> 156 fm step.
    """
    if convention == "amplitude":
        return 10 ** (squeezing_db / 20)
    if convention == "paper":
        return 10 ** (squeezing_db / 10)
    raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")


def min_displacement(power, wavelength: float, rbw: float, squeezing_db: float = 0.0,
                     convention: str = "amplitude"):
    """Displacement whose signal equals the shot-noise floor in ``rbw``."""
    if rbw <= 0:
        raise ValueError("rbw must be positive")
    divisor = squeeze_factor(squeezing_db, convention)
    return np.sqrt(snl_psd(power, wavelength) * rbw) / divisor


@dataclass(frozen=True)
class NoiseBudget:
    power: float
    wavelength: float
    frequency: float
    squeezing_db: float
    thermal: float
    back_action: float
    shot_noise: float
    sql: float
    squeezed_floor: float
    crossing_power: float
    shot_noise_dominant: bool
    min_displacement_amplitude: float
    min_displacement_paper: float
    rbw: float
    caves_scaling: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


BUDGET_COLUMNS = (
    ("power", "W"),
    ("frequency", "Hz"),
    ("squeezing_db", "dB"),
    ("thermal", "m^2/Hz"),
    ("back_action", "m^2/Hz"),
    ("shot_noise", "m^2/Hz"),
    ("sql", "m^2/Hz"),
    ("squeezed_floor", "m^2/Hz"),
    ("crossing_power", "W"),
    ("shot_noise_dominant", "bool"),
    ("min_displacement_amplitude", "m"),
    ("min_displacement_paper", "m"),
)


def noise_budget(power: float, wavelength: float, f: float, params: CantileverParams,
                 squeezing_db: float = 0.0, rbw: float = 10e3,
                 caves_scaling: bool = False) -> NoiseBudget:
    """All displacement-noise terms at one operating point.

    ``sql`` is back action plus unsqueezed shot noise; ``squeezed_floor``
    replaces the shot noise by its squeezed value.
    """
    snl = snl_psd(power, wavelength)
    back = back_action_psd(power, wavelength, params, squeezing_db, caves_scaling)
    thermal = thermal_psd(f, params)
    ratio = 10 ** (-squeezing_db / 10)
    cross = crossing_power(params, wavelength, squeezing_db)
    return NoiseBudget(
        power=float(power),
        wavelength=wavelength,
        frequency=float(f),
        squeezing_db=float(squeezing_db),
        thermal=thermal,
        back_action=back,
        shot_noise=snl,
        sql=back + snl,
        squeezed_floor=snl * ratio + back,
        crossing_power=cross,
        shot_noise_dominant=bool(snl * ratio > back),
        min_displacement_amplitude=float(min_displacement(power, wavelength, rbw, squeezing_db, "amplitude")),
        min_displacement_paper=float(min_displacement(power, wavelength, rbw, squeezing_db, "paper")),
        rbw=rbw,
        caves_scaling=caves_scaling,
    )
