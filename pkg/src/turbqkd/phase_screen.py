"""Random von Karman phase screens by FFT filtering of Gaussian white noise."""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import ConfigurationError, UnderResolvedWarning

__all__ = [
    "ScreenSpec",
    "PhaseScreen",
    "spectral_density",
    "generate_screen",
    "structure_function",
    "dump_screen",
    "load_screen",
]

_MAGIC = b"PHSCRN01"
_HEADER = struct.Struct("<8sQdd")  # magic, N, pixel_m, r0_m -> 32 bytes


@dataclass(frozen=True)
class ScreenSpec:
    """Parameters of one screen.

    ``subharmonics=None`` enables low-frequency compensation automatically when
    the outer scale exceeds a quarter of the grid extent.  ``subharmonic_levels=None``
    uses three 3 x 3 levels, adding levels only when the outer scale is so large
    that three do not reach down to ``2 pi / L0``.
    """

    n: int
    pixel_m: float
    r0_m: float
    l0_m: float
    L0_m: float
    seed: int = 0
    subharmonics: bool | None = None
    subharmonic_levels: int | None = None

    def __post_init__(self):
        if self.n <= 0 or self.n & (self.n - 1):
            raise ConfigurationError(f"grid size {self.n} is not a power of two")
        if not self.r0_m > 0:
            raise ConfigurationError("r0 must be positive")
        if not 0 < self.l0_m < self.L0_m:
            raise ConfigurationError(f"need 0 < l0 < L0, got l0={self.l0_m}, L0={self.L0_m}")
        if self.pixel_m <= 0:
            raise ConfigurationError("pixel_m must be positive")

    @property
    def use_subharmonics(self) -> bool:
        if self.subharmonics is not None:
            return self.subharmonics
        return self.L0_m > self.n * self.pixel_m / 4

    @property
    def levels(self) -> int:
        if self.subharmonic_levels is not None:
            return self.subharmonic_levels
        ratio = self.L0_m / (self.n * self.pixel_m)
        extra = int(np.ceil(np.log(ratio) / np.log(3))) + 1 if ratio > 1 else 0
        return min(max(3, extra), 16)


@dataclass(frozen=True, eq=False)
class PhaseScreen:
    phase: np.ndarray
    spec: ScreenSpec = field(repr=False)


def _psd(kappa, r0, l0, L0):
    km = 5.92 / l0
    k0 = 2 * np.pi / L0
    return 0.49 * r0 ** (-5 / 3) * np.exp(-(kappa**2) / km**2) / (kappa**2 + k0**2) ** (11 / 6)


def spectral_density(kappa, spec: ScreenSpec):
    """Phase power spectral density (rad^2 m^2) at radial wavenumber ``kappa`` (rad/m)."""
    kappa = np.asarray(kappa, dtype=float)
    if np.any(kappa < 0):
        raise ValueError("kappa must be non-negative")
    return _psd(kappa, spec.r0_m, spec.l0_m, spec.L0_m)


@lru_cache(maxsize=64)
def _fft_filter(n, pixel_m, r0, l0, L0):
    # sqrt(PSD) * dk, pre-multiplied by n^2 to undo ifft2's normalisation
    dk = 2 * np.pi / (n * pixel_m)
    kx = 2 * np.pi * sfft.fftfreq(n, d=pixel_m)
    kappa = np.hypot(kx[None, :], kx[:, None])
    amp = np.sqrt(_psd(kappa, r0, l0, L0)) * dk * n * n
    amp[0, 0] = 0.0
    amp.setflags(write=False)
    return amp


def _subharmonic_phase(spec: ScreenSpec, rng):
    n, dx = spec.n, spec.pixel_m
    x = (np.arange(n) - n // 2) * dx
    offsets = np.array([-1.0, 0.0, 1.0])
    low = np.zeros((n, n))
    for p in range(1, spec.levels + 1):
        dk = 2 * np.pi / (3**p * n * dx)
        kk = offsets * dk
        amp = np.sqrt(_psd(np.hypot(kk[:, None], kk[None, :]), spec.r0_m, spec.l0_m, spec.L0_m)) * dk
        amp[1, 1] = 0.0
        coef = (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))) * amp
        e = np.exp(1j * np.outer(kk, x))  # rows: ky or kx offsets
        # sum_ij coef[i, j] exp(i ky_i y) exp(i kx_j x), y along rows
        low += np.real(e.T @ coef @ e)
    return low - low.mean()


def generate_screen(spec: ScreenSpec, rng: np.random.Generator | None = None) -> PhaseScreen:
    """Draw one screen; deterministic in ``spec.seed`` unless ``rng`` is supplied.

    Each frequency cell receives complex Gaussian noise (two independent real
    draws) scaled by ``sqrt(PSD) * dk``; the real part of the inverse FFT is the
    screen, which gives it the covariance ``sum PSD dk^2 cos(k.r)``.
    """
    n = spec.n
    if np.isinf(spec.r0_m):
        return PhaseScreen(np.zeros((n, n)), spec)
    if spec.r0_m < 2 * spec.pixel_m:
        warnings.warn(
            f"r0 = {spec.r0_m:.3g} m is under two pixels ({spec.pixel_m:.3g} m); turbulence under-resolved",
            UnderResolvedWarning,
            stacklevel=2,
        )
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    amp = _fft_filter(n, spec.pixel_m, spec.r0_m, spec.l0_m, spec.L0_m)
    noise = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    phase = sfft.ifft2(noise * amp).real
    if spec.use_subharmonics:
        phase += _subharmonic_phase(spec, rng)
    return PhaseScreen(phase, spec)


def structure_function(phase, lags):
    """Phase structure function along both grid axes for integer pixel ``lags``."""
    phase = np.asarray(phase)
    out = []
    for lag in lags:
        dx = phase[:, lag:] - phase[:, :-lag]
        dy = phase[lag:, :] - phase[:-lag, :]
        out.append(0.5 * (np.mean(dx**2) + np.mean(dy**2)))
    return np.array(out)


def dump_screen(screen: PhaseScreen, path) -> None:
    """Write a screen as a 32-byte header followed by little-endian float64 rows."""
    n = screen.phase.shape[0]
    with open(Path(path), "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, n, screen.spec.pixel_m, screen.spec.r0_m))
        fh.write(np.ascontiguousarray(screen.phase, dtype="<f8").tobytes())


def load_screen(path):
    """Inverse of :func:`dump_screen`; returns ``(phase, pixel_m, r0_m)``."""
    raw = Path(path).read_bytes()
    magic, n, pixel_m, r0_m = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: not a phase-screen dump")
    phase = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size, count=n * n).reshape(n, n)
    return phase.copy(), pixel_m, r0_m
