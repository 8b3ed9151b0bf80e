"""Zernike wavefront analysis and correction of the received beacon.

Modes use the unnormalised convention ``Z_n^m = R_n^|m|(r) cos(m phi)`` for
``m >= 0`` and ``R_n^|m|(r) sin(|m| phi)`` otherwise, so that the projection
weight is ``(2n + 2) / (eps_m pi)`` with ``eps_0 = 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial
from typing import NamedTuple

import numpy as np
from skimage.restoration import unwrap_phase

from .errors import UnderResolvedError
from .field import ComplexField, aperture_mask, grid_coords

__all__ = [
    "ZernikeIndex",
    "CorrectionSpec",
    "AoNoiseParams",
    "mode_indices",
    "radial",
    "zernike",
    "zernike_gram",
    "aperture_phase",
    "project",
    "synthesize",
    "correct",
    "coherent_efficiency",
    "detection_noise",
]


class ZernikeIndex(NamedTuple):
    n: int
    m: int


@dataclass(frozen=True)
class CorrectionSpec:
    aperture_radius_m: float
    n_max: int = 14

    def __post_init__(self):
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")
        if self.aperture_radius_m <= 0:
            raise ValueError("aperture radius must be positive")


@dataclass(frozen=True)
class AoNoiseParams:
    """Electronic noise (shot-noise units) and linear detector efficiency."""

    electronic_noise: float = 0.01
    detector_efficiency: float = 10 ** (-0.2)

    def __post_init__(self):
        if self.electronic_noise < 0:
            raise ValueError("electronic noise must be non-negative")
        if not 0 < self.detector_efficiency <= 1:
            raise ValueError("detector efficiency must lie in (0, 1]")


def mode_indices(n_max):
    return [ZernikeIndex(n, m) for n in range(n_max + 1) for m in range(-n, n + 1, 2)]


def radial(n, m, r):
    """Radial polynomial R_n^m by its factorial sum; zero when ``n - m`` is odd."""
    m = abs(m)
    r = np.asarray(r, dtype=float)
    if m > n or (n - m) % 2:
        return np.zeros_like(r)
    out = np.zeros_like(r)
    for k in range((n - m) // 2 + 1):
        c = (-1) ** k * factorial(n - k) / (
            factorial(k) * factorial((n + m) // 2 - k) * factorial((n - m) // 2 - k)
        )
        out = out + c * r ** (n - 2 * k)
    return out


def zernike(n, m, r, phi):
    if m >= 0:
        return radial(n, m, r) * np.cos(m * phi)
    return radial(n, -m, r) * np.sin(-m * phi)


def _weight(idx):
    return (2 * idx.n + 2) / ((2 if idx.m == 0 else 1) * np.pi)


def zernike_gram(n_max, pixels_across, oversample=1):
    """Projection of every mode onto every other on a pixelated unit disk.

    Each pixel is split into ``oversample**2`` sub-samples and the integral is
    the sum over sub-samples inside the disk.  The result is scaled by the
    projection weight, so an exact quadrature returns the identity.
    """
    s = pixels_across * oversample
    c = (np.arange(s) - (s - 1) / 2) / (s / 2)
    idx = mode_indices(n_max)
    gram = np.zeros((len(idx), len(idx)))
    # row blocks keep the basis matrix to a few hundred MB at high oversampling
    for rows in np.array_split(np.arange(s), max(1, s // 128)):
        x, y = np.meshgrid(c, c[rows])
        r = np.hypot(x, y)
        inside = r <= 1
        B = np.array([zernike(i.n, i.m, r[inside], np.arctan2(y, x)[inside]) for i in idx])
        gram += B @ B.T
    w = np.array([_weight(i) for i in idx])
    return gram * (2.0 / s) ** 2 * w[:, None]


@lru_cache(maxsize=32)
def _disk_basis(n, pixel_m, radius_m, n_max):
    if 2 * radius_m / pixel_m < 8:
        raise UnderResolvedError(
            f"aperture of radius {radius_m} m spans {2 * radius_m / pixel_m:.1f} pixels; need at least 8"
        )
    mask = aperture_mask(n, pixel_m, radius_m)
    x, y = grid_coords(n, pixel_m)
    r = np.hypot(x[mask], y[mask]) / radius_m
    p = np.arctan2(y[mask], x[mask])
    idx = mode_indices(n_max)
    B = np.array([zernike(i.n, i.m, r, p) for i in idx])
    # least-squares projector; pinv tolerates modes the disk cannot resolve
    pinv = np.linalg.pinv(B.T)
    for a in (mask, B, pinv):
        a.setflags(write=False)
    return mask, B, pinv


def aperture_phase(field: ComplexField, radius_m) -> np.ndarray:
    """Unwrapped ``arg(E)`` inside the aperture (zero outside).

    Uses reliability-sorted 2-D unwrapping restricted to the disk, then
    shifts by a multiple of 2 pi so the mean phase lies in (-pi, pi].
    """
    n = field.n
    mask = aperture_mask(n, field.pixel_m, radius_m)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    r0, r1 = max(rows[0] - 1, 0), min(rows[-1] + 2, n)
    c0, c1 = max(cols[0] - 1, 0), min(cols[-1] + 2, n)
    box = np.angle(field.values[r0:r1, c0:c1])
    sub = mask[r0:r1, c0:c1]
    unwrapped = unwrap_phase(np.ma.masked_array(box, mask=~sub))
    vals = np.asarray(unwrapped.filled(0.0))
    shift = 2 * np.pi * np.round(vals[sub].mean() / (2 * np.pi))
    out = np.zeros((n, n))
    out[r0:r1, c0:c1][sub] = vals[sub] - shift
    return out


def project(phase, spec: CorrectionSpec, pixel_m, method="lstsq"):
    """Zernike coefficients of ``phase`` over the centred aperture.

    Parameters
    ----------
    phase : (N, N) array
        Unwrapped phase in radians; only pixels inside the disk are used.
    spec : CorrectionSpec
    pixel_m : float
    method : {"lstsq", "integral"}
        ``integral`` applies the weighted inner-product formula directly on
        the pixel grid; ``lstsq`` solves the discrete normal equations, which
        removes the cross-talk the pixelated disk introduces between modes.

    Returns
    -------
    dict mapping :class:`ZernikeIndex` to coefficient.
    """
    phase = np.asarray(phase, dtype=float)
    n = phase.shape[0]
    mask, B, pinv = _disk_basis(n, float(pixel_m), float(spec.aperture_radius_m), spec.n_max)
    v = phase[mask]
    idx = mode_indices(spec.n_max)
    if method == "integral":
        dA = (pixel_m / spec.aperture_radius_m) ** 2
        a = (B @ v) * dA * np.array([_weight(i) for i in idx])
    elif method == "lstsq":
        a = pinv @ v
    else:
        raise ValueError(f"unknown projection method {method!r}")
    return dict(zip(idx, a))


def synthesize(coeffs, spec: CorrectionSpec, n, pixel_m):
    """Phase map ``sum a_nm Z_n^m`` inside the aperture, zero outside."""
    mask, B, _ = _disk_basis(n, float(pixel_m), float(spec.aperture_radius_m), spec.n_max)
    a = np.array([coeffs.get(i, 0.0) for i in mode_indices(spec.n_max)])
    out = np.zeros((n, n))
    out[mask] = a @ B
    return out


def correct(beacon_phase, signal: ComplexField, spec: CorrectionSpec) -> ComplexField:
    """Apply the conjugate of the truncated Zernike fit of ``beacon_phase`` to ``signal``."""
    beacon_phase = np.asarray(beacon_phase)
    if beacon_phase.shape != signal.values.shape:
        raise ValueError("beacon phase and signal grids differ")
    coeffs = project(beacon_phase, spec, signal.pixel_m)
    c = synthesize(coeffs, spec, signal.n, signal.pixel_m)
    return signal.replace(values=signal.values * np.exp(-1j * c))


def coherent_efficiency(beacon: ComplexField, reference: ComplexField, radius_m) -> float:
    """Mode-matching efficiency of ``beacon`` against ``reference`` over the aperture."""
    if beacon.values.shape != reference.values.shape:
        raise ValueError("fields must share a grid")
    mask = aperture_mask(beacon.n, beacon.pixel_m, radius_m)
    eb, er = beacon.values[mask], reference.values[mask]
    pb = np.sum(np.abs(eb) ** 2)
    pr = np.sum(np.abs(er) ** 2)
    if pb == 0 or pr == 0:
        raise ValueError("zero power inside the aperture")
    overlap = np.sum(np.real(np.conj(er) * eb))
    return float(overlap**2 / (pb * pr))


def detection_noise(gamma, params: AoNoiseParams = AoNoiseParams()):
    """Excess noise from imperfect mode matching, in shot-noise units."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0):
        raise ValueError("coherent efficiency must be positive; no coherent component left")
    if np.any(gamma > 1 + 1e-12):
        raise ValueError("coherent efficiency cannot exceed 1")
    out = ((1 - gamma) + params.electronic_noise) * params.detector_efficiency / gamma
    return out if out.ndim else float(out)
