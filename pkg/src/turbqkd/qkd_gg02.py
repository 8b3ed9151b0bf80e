"""Asymptotic GG02 key rate (coherent states, homodyne, reverse reconciliation).

All quantities are in shot-noise units and entropies in bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigurationError, UnphysicalStateError

__all__ = [
    "Gg02Params",
    "CovMatrix2Mode",
    "KeyRateTerms",
    "build_cov",
    "symplectic_eigs",
    "g_fn",
    "mutual_information",
    "key_rate",
    "key_rate_terms",
    "optimize_vmod",
    "VMOD_GRID",
    "KeyRateRow",
    "rate_vs_zenith",
]

PHYS_TOL = 1e-9
VMOD_GRID = np.round(np.arange(0.5, 50.0 + 1e-9, 0.1), 10)


@dataclass(frozen=True)
class Gg02Params:
    V_mod: float
    T_f: float
    xi_f: float
    beta: float = 0.95

    def __post_init__(self):
        if self.V_mod < 0:
            raise ConfigurationError("V_mod must be non-negative")
        if not 0 < self.beta <= 1:
            raise ConfigurationError("beta must lie in (0, 1]")
        if not 0 <= self.T_f <= 1:
            raise ConfigurationError(f"T_f = {self.T_f} outside [0, 1]")
        if self.xi_f < 0:
            raise ConfigurationError("xi_f must be non-negative")


@dataclass(frozen=True)
class CovMatrix2Mode:
    """``[[a I, c Z], [c Z, b I]]`` with ``Z = diag(1, -1)``."""

    a: float
    b: float
    c: float

    def matrix(self) -> np.ndarray:
        i2, z = np.eye(2), np.diag([1.0, -1.0])
        return np.block([[self.a * i2, self.c * z], [self.c * z, self.b * i2]])

    @property
    def det(self) -> float:
        return (self.a * self.b - self.c**2) ** 2


class KeyRateTerms(NamedTuple):
    I_AB: float
    chi_BE: float
    K: float
    nu: tuple


def build_cov(p: Gg02Params) -> CovMatrix2Mode:
    v, t = p.V_mod, p.T_f
    return CovMatrix2Mode(
        a=v + 1.0,
        b=t * v + 1.0 + t * p.xi_f,
        c=float(np.sqrt(t * (v**2 + 2 * v))),
    )


def _safe_sqrt(x, what):
    if x < 0:
        if x < -PHYS_TOL:
            raise UnphysicalStateError(f"negative {what} ({x:.3e})")
        x = 0.0
    return float(np.sqrt(x))


def symplectic_eigs(m: CovMatrix2Mode):
    """``(nu1, nu2, nu3)``: the two-mode eigenvalues and that of A conditioned on B's homodyne."""
    a, b, c = m.a, m.b, m.c
    z = _safe_sqrt((a + b) ** 2 - 4 * c**2, "radicand (a+b)^2 - 4c^2")
    nu1 = 0.5 * (z + (b - a))
    nu2 = 0.5 * (z - (b - a))
    nu3 = _safe_sqrt(a * (a - c**2 / b), "conditional variance")
    for nu in (nu1, nu2, nu3):
        if nu < 1 - PHYS_TOL:
            raise UnphysicalStateError(f"symplectic eigenvalue {nu:.6g} below 1")
    return nu1, nu2, nu3


def g_fn(x):
    """Von Neumann entropy (bits) of a thermal mode with symplectic eigenvalue ``x``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 1 - PHYS_TOL):
        raise ValueError("g(x) needs x >= 1")
    x = np.maximum(x, 1.0)
    p, q = (x + 1) / 2, (x - 1) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = p * np.log2(p) - np.where(q > 0, q * np.log2(np.where(q > 0, q, 1.0)), 0.0)
    return out if out.ndim else float(out)


def mutual_information(p: Gg02Params) -> float:
    """Alice-Bob information from the homodyne signal-to-noise ratio."""
    return 0.5 * float(np.log2(1 + p.T_f * p.V_mod / (1 + p.T_f * p.xi_f)))


def key_rate_terms(p: Gg02Params) -> KeyRateTerms:
    nu = symplectic_eigs(build_cov(p))
    iab = mutual_information(p)
    chi = g_fn(nu[0]) + g_fn(nu[1]) - g_fn(nu[2])
    return KeyRateTerms(iab, chi, p.beta * iab - chi, nu)


def key_rate(p: Gg02Params) -> float:
    """Bits per channel use; negative values are returned unclamped."""
    return key_rate_terms(p).K


def optimize_vmod(xi_of_v, T_f, beta=0.95, grid=VMOD_GRID):
    """Grid search for the modulation variance maximising the key rate.

    Parameters
    ----------
    xi_of_v : callable or float
        Effective excess noise, either fixed or as a function of ``V_mod``
        (fading channels make it grow with the modulation).
    T_f : float or callable
    grid : array of candidate ``V_mod`` values.

    Returns
    -------
    (V_mod, KeyRateTerms) at the best grid point; ties go to the smaller V_mod.
    """
    xi = xi_of_v if callable(xi_of_v) else (lambda v: xi_of_v)
    tf = T_f if callable(T_f) else (lambda v: T_f)
    best = None
    for v in grid:
        terms = key_rate_terms(Gg02Params(float(v), tf(v), xi(v), beta))
        if best is None or terms.K > best[1].K:
            best = (float(v), terms)
    return best


class KeyRateRow(NamedTuple):
    zenith_deg: float
    aperture_m: float
    V_mod: float
    T_f: float
    xi_f: float
    I_AB: float
    chi_BE: float
    K: float  # signed; clamp with max(K, 0) for display


def rate_vs_zenith(
    ensembles, V_mod="optimize", beta=0.95, xi_ch=0.02, noise=None, n_max=None, tf_convention="squared"
):
    """Key rate per (zenith angle, aperture) from downlink ensembles.

    Parameters
    ----------
    ensembles : iterable of statistics.Ensemble
        One per zenith angle, with coherent efficiencies recorded.
    V_mod : float or "optimize"
        Fixed modulation variance or a per-point grid search over ``VMOD_GRID``.
    n_max : int, optional
        Correction order whose efficiencies enter the detection noise; the
        ensemble's first order by default.
    tf_convention : {"squared", "literal"}
        See :func:`turbqkd.statistics.effective_params`.
    """
    from .adaptive_optics import AoNoiseParams
    from .statistics import effective_params

    noise = AoNoiseParams() if noise is None else noise
    rows = []
    for ens in ensembles:
        T = ens.T
        gamma = ens.gamma_corrected(n_max) if ens.has_gamma else None
        for j, r in enumerate(ens.cfg.aperture_radii_m):
            # xi_f is affine in V_mod, so one reduction serves the whole grid
            ec = effective_params(
                T[:, j], None if gamma is None else gamma[:, j], 1.0, xi_ch, noise, tf_convention
            )

            def xi(v, ec=ec):
                return (ec.var_sqrt_T * v + ec.mean_T_xi) / ec.T_f

            if V_mod == "optimize":
                v, terms = optimize_vmod(xi, ec.T_f, beta)
            else:
                v = float(V_mod)
                terms = key_rate_terms(Gg02Params(v, ec.T_f, xi(v), beta))
            rows.append(KeyRateRow(ens.cfg.zenith_deg, r, v, ec.T_f, xi(v), terms.I_AB, terms.chi_BE, terms.K))
    return rows
