"""Monte-Carlo ensembles of channel shots and their reduction to effective
channel parameters for the key-rate analysis."""

from __future__ import annotations

import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adaptive_optics import AoNoiseParams, CorrectionSpec, aperture_phase, coherent_efficiency, correct, detection_noise
from .channel_sim import ScenarioConfig, build_stack, derive_seed, run_shot, scintillation_estimate, validate_stack
from .errors import DegenerateChannelError, NumericalIntegrityError
from .field import make_plane_wave

__all__ = [
    "ChannelSample",
    "Ensemble",
    "EffectiveChannel",
    "run_ensemble",
    "histogram",
    "effective_params",
    "TF_CONVENTIONS",
    "fmt",
    "write_shots_csv",
    "write_histograms_csv",
    "provenance",
]


@dataclass(frozen=True, eq=False)
class ChannelSample:
    index: int
    seed: int
    P_prime: np.ndarray  # (apertures,)
    T: np.ndarray
    centroid_irradiance: float
    gamma_raw: np.ndarray | None = None  # (apertures,)
    gamma_corrected: np.ndarray | None = None  # (orders, apertures)


@dataclass(frozen=True, eq=False)
class Ensemble:
    cfg: ScenarioConfig
    base_seed: int
    samples: tuple
    ao_orders: tuple = (14,)

    def __post_init__(self):
        if not self.samples:
            raise ValueError("an ensemble needs at least one sample")

    def __len__(self):
        return len(self.samples)

    @property
    def fingerprint(self) -> str:
        return self.cfg.fingerprint()

    @property
    def T(self) -> np.ndarray:
        return np.array([s.T for s in self.samples])

    @property
    def P_prime(self) -> np.ndarray:
        return np.array([s.P_prime for s in self.samples])

    @property
    def centroid(self) -> np.ndarray:
        return np.array([s.centroid_irradiance for s in self.samples])

    @property
    def has_gamma(self) -> bool:
        return self.samples[0].gamma_raw is not None

    @property
    def gamma_raw(self) -> np.ndarray:
        return np.array([s.gamma_raw for s in self.samples])

    def gamma_corrected(self, n_max: int | None = None) -> np.ndarray:
        """(shots, apertures) post-correction efficiency; first order by default."""
        k = 0 if n_max is None else self.ao_orders.index(n_max)
        return np.array([s.gamma_corrected[k] for s in self.samples])


@dataclass(frozen=True)
class EffectiveChannel:
    T_f: float
    xi_f: float
    mean_T: float
    mean_sqrt_T: float
    var_sqrt_T: float
    mean_T_xi: float
    V_mod: float


def _gammas(beacon, radii, orders):
    ref = make_plane_wave(beacon.n, beacon.pixel_m, beacon.wavelength_m)
    raw = np.empty(len(radii))
    corr = np.empty((len(orders), len(radii)))
    for j, r in enumerate(radii):
        raw[j] = coherent_efficiency(beacon, ref, r)
        phase = aperture_phase(beacon, r)
        for k, n_max in enumerate(orders):
            fixed = correct(phase, beacon, CorrectionSpec(r, n_max))
            corr[k, j] = coherent_efficiency(fixed, ref, r)
    return raw, corr


def _one_shot(cfg, base_seed, index, with_beacon, orders):
    seed = derive_seed(base_seed, index)
    try:
        res = run_shot(cfg, build_stack(cfg, seed, validate=False), with_beacon=with_beacon)
    except NumericalIntegrityError as exc:
        raise NumericalIntegrityError(str(exc), shot=index) from exc
    raw = corr = None
    if res.beacon_field is not None and orders:
        raw, corr = _gammas(res.beacon_field, cfg.aperture_radii_m, orders)
    return ChannelSample(index, seed, res.P_prime, res.T, res.centroid_irradiance, raw, corr)


def run_ensemble(
    cfg: ScenarioConfig,
    m: int,
    base_seed: int = 0,
    ao_orders=(14,),
    with_beacon: bool | None = None,
    workers: int = 1,
    progress: bool = False,
) -> Ensemble:
    """Run ``m`` independent shots, each with fresh screens.

    Shot ``i`` uses the seed ``derive_seed(base_seed, i)``, so results depend
    only on ``(cfg, base_seed, i)`` and never on ``workers``.  Coherent
    efficiencies are computed when the shot carries a beacon (downlink by
    default), before and after correction at each order in ``ao_orders``.
    """
    if m < 1:
        raise ValueError("sample count must be at least 1")
    validate_stack(cfg)
    if isinstance(ao_orders, int):
        ao_orders = (ao_orders,)
    ao_orders = tuple(ao_orders)

    def job(i):
        return _one_shot(cfg, base_seed, i, with_beacon, ao_orders)

    samples = []
    if workers <= 1:
        for i, s in enumerate(map(job, range(m))):
            samples.append(s)
            if progress and (i + 1) % max(1, m // 20) == 0:
                print(f"  shot {i + 1}/{m}", file=sys.stderr)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(job, range(m)))  # map keeps index order
    return Ensemble(cfg, base_seed, tuple(samples), ao_orders)


def histogram(samples, bins=None):
    """Density-normalised histogram ``(density, edges)``.

    ``bins=None`` uses the Freedman-Diaconis rule.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("empty sample set")
    if bins is None:
        bins = "fd"
    elif int(bins) < 2:
        raise ValueError("need at least two bins")
    density, edges = np.histogram(x, bins=bins, density=True)
    return density, edges


TF_CONVENTIONS = ("squared", "literal")


def effective_params(
    T, gamma, V_mod, xi_ch=0.02, noise: AoNoiseParams = AoNoiseParams(), tf_convention="squared"
) -> EffectiveChannel:
    """Map a fading channel to a fixed one with the same Gaussian moments.

    Parameters
    ----------
    T : array
        Per-shot transmissivity.
    gamma : array or None
        Per-shot coherent efficiency (after correction).  ``None`` means
        perfect mode matching, leaving only electronic noise.
    V_mod : float
    xi_ch : float
        Channel excess noise in shot-noise units.
    tf_convention : {"squared", "literal"}
        ``squared`` takes ``T_f = <sqrt T>^2``, which reduces to ``T_f = T``
        and ``xi_f = xi_ch + xi_det / T`` for a non-fading channel.
        ``literal`` takes ``T_f = <sqrt T>``.

    Notes
    -----
    ``T_f xi_f = Var(sqrt T) V_mod + <T xi>`` with
    ``<T xi> = xi_ch <T> + <xi_det(gamma)>``; sample means replace the
    integrals over the transmissivity and efficiency distributions.
    """
    if tf_convention not in TF_CONVENTIONS:
        raise ValueError(f"tf_convention must be one of {TF_CONVENTIONS}")
    T = np.asarray(T, dtype=float)
    if T.size == 0:
        raise ValueError("empty ensemble")
    if V_mod <= 0:
        raise ValueError("V_mod must be positive")
    g = np.ones_like(T) if gamma is None else np.asarray(gamma, dtype=float)
    mean_t = float(np.mean(T))
    mean_sqrt = float(np.mean(np.sqrt(T)))
    if mean_sqrt == 0:
        raise DegenerateChannelError("effective transmissivity is zero")
    tf = mean_sqrt**2 if tf_convention == "squared" else mean_sqrt
    var = max(mean_t - mean_sqrt**2, 0.0)  # Jensen; only rounding can push it below 0
    t_xi = xi_ch * mean_t + float(np.mean(detection_noise(g, noise)))
    xi_f = (var * V_mod + t_xi) / tf
    return EffectiveChannel(tf, xi_f, mean_t, mean_sqrt, var, t_xi, float(V_mod))


def fmt(x) -> str:
    """CSV float format: nine significant digits."""
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


SHOT_COLUMNS = ("sample_id", "zenith_deg", "aperture_m", "P_prime", "T", "gamma_raw", "gamma_corrected")


def write_shots_csv(ensembles, path):
    """One row per (shot, aperture) for each ensemble in order."""
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(SHOT_COLUMNS)
        for ens in ensembles:
            zen = ens.cfg.zenith_deg if ens.cfg.kind == "downlink" else None
            for s in ens.samples:
                for j, r in enumerate(ens.cfg.aperture_radii_m):
                    graw = s.gamma_raw[j] if s.gamma_raw is not None else None
                    gcor = s.gamma_corrected[0, j] if s.gamma_corrected is not None else None
                    w.writerow([fmt(s.index), fmt(zen), fmt(r), fmt(s.P_prime[j]), fmt(s.T[j]), fmt(graw), fmt(gcor)])


def write_histograms_csv(ensembles, path, bins=None):
    """Histogram of normalised power P/<P> for every (zenith, aperture)."""
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(("zenith_deg", "aperture_m", "bin_lo", "bin_hi", "density"))
        for ens in ensembles:
            zen = ens.cfg.zenith_deg if ens.cfg.kind == "downlink" else None
            P = ens.P_prime
            for j, r in enumerate(ens.cfg.aperture_radii_m):
                x = P[:, j] / P[:, j].mean()
                density, edges = histogram(x, bins)
                for d, lo, hi in zip(density, edges[:-1], edges[1:]):
                    w.writerow([fmt(zen), fmt(r), fmt(lo), fmt(hi), fmt(d)])


def provenance(cfg: ScenarioConfig, base_seed: int, m: int) -> dict:
    import scipy
    import skimage

    from . import __version__

    return {
        "config_hash": cfg.fingerprint(),
        "seed": int(base_seed),
        "samples": int(m),
        "versions": {
            "turbqkd": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "scikit-image": skimage.__version__,
        },
    }


def summarize(ens: Ensemble) -> list:
    """Per-aperture moments and scintillation of one ensemble (JSON-ready)."""
    out = []
    P, T = ens.P_prime, ens.T
    for j, r in enumerate(ens.cfg.aperture_radii_m):
        row = {
            "aperture_m": r,
            "mean_P_prime": float(P[:, j].mean()),
            "mean_T": float(T[:, j].mean()),
            "mean_sqrt_T": float(np.sqrt(T[:, j]).mean()),
            "sigma2_P": scintillation_estimate(P[:, j]) if len(ens) > 1 else None,
        }
        if ens.has_gamma:
            row["mean_gamma_raw"] = float(ens.gamma_raw[:, j].mean())
            row["mean_gamma_corrected"] = float(ens.gamma_corrected()[:, j].mean())
        out.append(row)
    return out


def dump_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
