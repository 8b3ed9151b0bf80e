"""Satellite-to-ground scintillation: Monte-Carlo centroid vs weak-turbulence theory.

Runs a small ensemble of downlink shots at the desk-scale profile and compares
the centroid irradiance variance with the quadrature of the slant-path
Rytov-type integral, for a few zenith angles.

    python demos/01_downlink_scintillation.py [shots]
"""

import sys
import time

import numpy as np

from turbqkd.channel_sim import ScenarioConfig, scintillation_estimate, slab_fractions
from turbqkd.statistics import run_ensemble
from turbqkd.turbulence import scintillation_theory

shots = int(sys.argv[1]) if len(sys.argv) > 1 else 100

# %% screen stack: every slab must hold < 10 % of the path's scintillation weight
cfg = ScenarioConfig().desk_scale()
frac = slab_fractions(cfg)
print(f"{len(frac)} slabs, largest weight fraction {frac.max():.3f}")

# %% theory first, it is cheap
for h0 in (0.0, cfg.h0_m):
    vals = [scintillation_theory(cfg.hv, h0, cfg.H_m, z, cfg.wavelength_m) for z in range(0, 61, 10)]
    print(f"theory, path from h0={h0:6.0f} m:", np.round(vals, 4))

# %% simulation; the beacon is not needed for irradiance statistics
for zen in (0.0, 30.0, 60.0):
    c = cfg.replace(zenith_deg=zen)
    t0 = time.time()
    ens = run_ensemble(c, shots, base_seed=1, with_beacon=False)
    s2 = scintillation_estimate(ens.centroid)
    th = scintillation_theory(c.hv, c.h0_m, c.H_m, zen, c.wavelength_m)
    print(f"zenith {zen:4.0f}: sim {s2:.4f}  theory {th:.4f}  <T> {ens.T.mean(axis=0)}  ({time.time() - t0:.0f} s)")
