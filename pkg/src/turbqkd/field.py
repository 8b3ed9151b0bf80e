"""Complex optical fields on square grids and their vacuum propagation.

Grid convention: pixel ``i`` sits at ``(i - n // 2) * pixel_m``, so the optical
axis passes through the centre pixel ``(n // 2, n // 2)``.  Field amplitudes are
dimensionless and powers are ``sum(|E|^2) * pixel_m**2``, so a source built with
``make_gaussian`` carries unit power and every received power is already the
normalised ratio P' = P / P0.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError

__all__ = [
    "ComplexField",
    "GaussianBeamSpec",
    "make_gaussian",
    "make_plane_wave",
    "propagate_vacuum",
    "apply_phase",
    "edge_taper",
    "near_field_ok",
    "grid_coords",
    "aperture_mask",
]


def _is_pow2(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Immutable N x N sampled optical field."""

    values: np.ndarray
    pixel_m: float
    wavelength_m: float
    z_m: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ConfigurationError(f"field must be square, got shape {v.shape}")
        if not _is_pow2(v.shape[0]):
            raise ConfigurationError(f"grid size {v.shape[0]} is not a power of two")
        if not (self.pixel_m > 0 and self.wavelength_m > 0):
            raise ConfigurationError("pixel_m and wavelength_m must be positive")
        if not np.iscomplexobj(v):
            v = v.astype(np.complex128)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> float:
        return 2 * np.pi / self.wavelength_m

    @property
    def extent_m(self) -> float:
        return self.n * self.pixel_m

    def irradiance(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def power(self, mask=None) -> float:
        """Total power, or power over a boolean / weight mask."""
        irr = self.irradiance()
        if mask is not None:
            irr = irr * mask
        return float(irr.sum() * self.pixel_m**2)

    def phase(self) -> np.ndarray:
        return np.angle(self.values)

    def replace(self, **changes) -> "ComplexField":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class GaussianBeamSpec:
    waist_m: float
    wavelength_m: float
    total_power: float = 1.0

    def __post_init__(self):
        if self.waist_m <= 0 or self.wavelength_m <= 0 or self.total_power <= 0:
            raise ConfigurationError("waist, wavelength and power must be positive")

    @property
    def rayleigh_range_m(self) -> float:
        return np.pi * self.waist_m**2 / self.wavelength_m

    def radius_at(self, z_m):
        """Analytic 1/e^2 intensity radius after propagating ``z_m``."""
        return self.waist_m * np.sqrt(1 + (np.asarray(z_m) / self.rayleigh_range_m) ** 2)


def grid_coords(n, pixel_m):
    x = (np.arange(n) - n // 2) * pixel_m
    return np.meshgrid(x, x, indexing="xy")


def aperture_mask(n, pixel_m, radius_m):
    """Pixels whose centres lie inside a centred disk."""
    x, y = grid_coords(n, pixel_m)
    return x**2 + y**2 <= radius_m**2


def make_gaussian(spec: GaussianBeamSpec, n: int, pixel_m: float) -> ComplexField:
    """Centred, flat-phase Gaussian beam ``exp(-r^2 / w0^2)`` with the requested power."""
    if spec.waist_m >= n * pixel_m / 8:
        raise ConfigurationError(
            f"waist {spec.waist_m} m does not fit a {n} x {pixel_m} m grid "
            f"(need w0 < {n * pixel_m / 8:.4g} m)"
        )
    x, y = grid_coords(n, pixel_m)
    amp = np.exp(-(x**2 + y**2) / spec.waist_m**2)
    amp *= np.sqrt(spec.total_power / (np.sum(amp**2) * pixel_m**2))
    return ComplexField(amp.astype(np.complex128), pixel_m, spec.wavelength_m)


def make_plane_wave(n, pixel_m, wavelength_m, amplitude=1.0) -> ComplexField:
    return ComplexField(np.full((n, n), amplitude, dtype=np.complex128), pixel_m, wavelength_m)


def near_field_ok(n, pixel_m, wavelength_m, dz_m) -> bool:
    """Sampling criterion for the angular-spectrum method: extent^2 / (lambda dz) >= N."""
    if dz_m == 0:
        return True
    return (n * pixel_m) ** 2 / (wavelength_m * dz_m) >= n


@lru_cache(maxsize=64)
def _transfer_function(n, pixel_m, wavelength_m, dz_m):
    k = 2 * np.pi / wavelength_m
    kx = 2 * np.pi * sfft.fftfreq(n, d=pixel_m)
    kz2 = k**2 - kx[None, :] ** 2 - kx[:, None] ** 2
    # carrier exp(ikz) dropped; evanescent components decay
    kz = np.sqrt(kz2.astype(np.complex128))
    h = np.exp(1j * dz_m * (kz - k))
    h.setflags(write=False)
    return h


def _angular_spectrum(field: ComplexField, dz_m):
    h = _transfer_function(field.n, field.pixel_m, field.wavelength_m, float(dz_m))
    out = sfft.ifft2(sfft.fft2(field.values) * h)
    return field.replace(values=out, z_m=field.z_m + dz_m)


def _fresnel_single_fft(field: ComplexField, dz_m):
    n, dx1, lam = field.n, field.pixel_m, field.wavelength_m
    k = field.k
    dx2 = lam * dz_m / (n * dx1)
    x1, y1 = grid_coords(n, dx1)
    x2, y2 = grid_coords(n, dx2)
    u = field.values * np.exp(1j * k / (2 * dz_m) * (x1**2 + y1**2))
    spec = sfft.fftshift(sfft.fft2(sfft.ifftshift(u)))
    out = spec * np.exp(1j * k / (2 * dz_m) * (x2**2 + y2**2)) * dx1**2 / (1j * lam * dz_m)
    return ComplexField(out, dx2, lam, field.z_m + dz_m)


def propagate_vacuum(field: ComplexField, dz_m: float, method: str = "auto") -> ComplexField:
    """Advance a field by ``dz_m`` metres of free space.

    Parameters
    ----------
    field : ComplexField
    dz_m : float
        Non-negative propagation distance.
    method : {"auto", "angular", "fresnel"}
        ``auto`` picks the angular-spectrum transfer function when
        ``near_field_ok`` holds and otherwise the single-FFT Fresnel transform,
        which rescales the output pitch to ``lambda dz / (N dx)``.

    Both branches are unitary, so total power is preserved to rounding error
    unless the angular-spectrum grid carries evanescent content.
    """
    if dz_m < 0:
        raise ValueError("back-propagation (dz < 0) is not supported")
    if dz_m == 0:
        return field
    if method == "auto":
        method = "angular" if near_field_ok(field.n, field.pixel_m, field.wavelength_m, dz_m) else "fresnel"
    if method == "angular":
        return _angular_spectrum(field, dz_m)
    if method == "fresnel":
        return _fresnel_single_fft(field, dz_m)
    raise ValueError(f"unknown propagation method {method!r}")


def apply_phase(field: ComplexField, phase) -> ComplexField:
    phase = np.asarray(phase)
    if phase.shape != field.values.shape:
        raise ValueError(f"phase map {phase.shape} does not match field {field.values.shape}")
    return field.replace(values=field.values * np.exp(1j * phase))


@lru_cache(maxsize=16)
def _taper_window(n, fraction):
    width = max(int(round(n * fraction)), 1)
    w = np.ones(n)
    ramp = 0.5 * (1 - np.cos(np.pi * (np.arange(width) + 0.5) / width))
    w[:width] = ramp
    w[-width:] = ramp[::-1]
    win = np.outer(w, w)
    win.setflags(write=False)
    return win


def edge_taper(field: ComplexField, fraction: float = 0.1) -> ComplexField:
    """Raised-cosine absorbing boundary over the outer ``fraction`` of each edge."""
    if fraction <= 0:
        return field
    return field.replace(values=field.values * _taper_window(field.n, float(fraction)))
