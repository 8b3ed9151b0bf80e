"""Turbulence-strength models: Cn^2 profile, eddy-scale profiles, Fried parameters
and the weak-fluctuation downlink scintillation integral."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import ConfigurationError

__all__ = [
    "HvProfile",
    "ScaleProfile",
    "SlantPath",
    "cn2",
    "outer_scale",
    "fried_horizontal",
    "fried_slant",
    "cn2_integral",
    "weighted_cn2_integral",
    "scintillation_theory",
]

QUAD_RTOL = 1e-8
# altitude breakpoints where the profile changes character (boundary layer,
# tropopause bump, exponential tail)
_BREAKS = (300.0, 1_000.0, 3_000.0, 6_000.0, 10_000.0, 15_000.0, 20_000.0, 30_000.0, 50_000.0, 100_000.0)


@dataclass(frozen=True)
class HvProfile:
    """Hufnagel-Valley Cn^2(h) with rms wind ``v`` and ground strength ``A``."""

    wind_rms_mps: float = 21.0
    ground_cn2: float = 1.7e-14

    def __post_init__(self):
        if self.wind_rms_mps <= 0 or self.ground_cn2 < 0:
            raise ConfigurationError("wind speed must be positive and ground Cn2 non-negative")

    def __call__(self, h_m):
        return cn2(self, h_m)


@dataclass(frozen=True)
class ScaleProfile:
    """Coulman-Vernin outer scale with inner scale ``l0 = inner_ratio * L0``."""

    inner_ratio: float = 0.005

    def __post_init__(self):
        if not 0 < self.inner_ratio <= 0.1:
            raise ConfigurationError("inner_ratio must lie in (0, 0.1]")

    def outer(self, h_m):
        return outer_scale(h_m)

    def inner(self, h_m):
        return self.inner_ratio * outer_scale(h_m)


@dataclass(frozen=True)
class SlantPath:
    h_lo: float
    h_hi: float
    zenith_deg: float
    wavelength_m: float

    def __post_init__(self):
        if not 0 <= self.h_lo < self.h_hi:
            raise ValueError(f"need 0 <= h_lo < h_hi, got [{self.h_lo}, {self.h_hi}]")
        if not 0 <= self.zenith_deg < 90:
            raise ValueError("zenith angle must lie in [0, 90) degrees")
        if self.wavelength_m <= 0:
            raise ValueError("wavelength must be positive")

    @property
    def sec(self) -> float:
        return 1.0 / np.cos(np.radians(self.zenith_deg))

    @property
    def length_m(self) -> float:
        return (self.h_hi - self.h_lo) * self.sec


def cn2(profile: HvProfile, h_m):
    """Refractive-index structure constant at altitude ``h_m`` (m^-2/3)."""
    h = np.asarray(h_m, dtype=float)
    if np.any(h < 0):
        raise ValueError("altitude must be non-negative")
    v = profile.wind_rms_mps
    out = (
        0.00594 * (v / 27.0) ** 2 * (1e-5 * h) ** 10 * np.exp(-h / 1000.0)
        + 2.7e-16 * np.exp(-h / 1500.0)
        + profile.ground_cn2 * np.exp(-h / 100.0)
    )
    return out if out.ndim else float(out)


def outer_scale(h_m):
    h = np.asarray(h_m, dtype=float)
    out = 4.0 / (1.0 + ((h - 8500.0) / 2500.0) ** 2)
    return out if out.ndim else float(out)


def fried_horizontal(cn2_0, dz_m, wavelength_m):
    """Plane-wave Fried parameter of a constant-Cn^2 path of length ``dz_m``."""
    if cn2_0 < 0 or dz_m <= 0 or wavelength_m <= 0:
        raise ValueError("cn2 must be non-negative, path and wavelength positive")
    if cn2_0 == 0:
        return np.inf
    k = 2 * np.pi / wavelength_m
    return (0.423 * k**2 * cn2_0 * dz_m) ** (-3 / 5)


def _pieces(a, b):
    cuts = [a] + [x for x in _BREAKS if a < x < b] + [b]
    return zip(cuts[:-1], cuts[1:])


def cn2_integral(profile: HvProfile, h_lo, h_hi):
    """Integral of Cn^2 over an altitude slab (m^1/3)."""
    if h_hi < h_lo:
        raise ValueError("h_hi must not be below h_lo")
    return sum(
        quad(lambda h: cn2(profile, h), a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)[0]
        for a, b in _pieces(h_lo, h_hi)
    )


def weighted_cn2_integral(profile: HvProfile, h_lo, h_hi, h_ref, exponent=5 / 6):
    """Integral of ``Cn^2(h) * (h - h_ref)^exponent`` over ``[h_lo, h_hi]``, ``h_ref <= h_lo``.

    The algebraic endpoint behaviour at ``h = h_ref`` is handled by QUADPACK's
    ``alg`` weight on the first piece.
    """
    if h_ref > h_lo:
        raise ValueError("reference altitude must not exceed the slab's lower edge")
    total = 0.0
    for a, b in _pieces(h_lo, h_hi):
        if a == h_ref:
            val = quad(
                lambda h: cn2(profile, h), a, b, weight="alg", wvar=(exponent, 0.0),
                epsabs=0.0, epsrel=QUAD_RTOL, limit=200,
            )[0]
        else:
            val = quad(
                lambda h: cn2(profile, h) * (h - h_ref) ** exponent, a, b,
                epsabs=0.0, epsrel=QUAD_RTOL, limit=200,
            )[0]
        total += val
    return total


def fried_slant(profile: HvProfile, path: SlantPath):
    """Fried parameter of an altitude slab viewed at zenith angle ``path.zenith_deg``."""
    k = 2 * np.pi / path.wavelength_m
    integ = cn2_integral(profile, path.h_lo, path.h_hi)
    if integ == 0:
        return np.inf
    return (0.423 * k**2 * path.sec * integ) ** (-3 / 5)


def scintillation_theory(profile: HvProfile, h0_m, H_m, zenith_deg, wavelength_m):
    """Weak-fluctuation plane-wave scintillation index for a downlink."""
    if not h0_m < H_m:
        raise ValueError("ground altitude must be below the satellite")
    if not 0 <= zenith_deg < 90:
        raise ValueError("zenith angle must lie in [0, 90) degrees")
    k = 2 * np.pi / wavelength_m
    sec = 1.0 / np.cos(np.radians(zenith_deg))
    return 2.25 * k ** (7 / 6) * sec ** (11 / 6) * weighted_cn2_integral(profile, h0_m, H_m, h0_m)
