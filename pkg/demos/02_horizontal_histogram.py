"""1.5 km horizontal link: received-power statistics behind three apertures.

Reproduces the horizontal validation setup at desk scale and prints the
scintillation index per aperture plus a text histogram of P/<P> for the
13 mm aperture, which should be skewed with its peak left of 1.

    python demos/02_horizontal_histogram.py [shots]
"""

import sys

from scipy.stats import skew

from turbqkd.channel_sim import ScenarioConfig, scintillation_estimate
from turbqkd.statistics import histogram, run_ensemble
from turbqkd.turbulence import fried_horizontal

shots = int(sys.argv[1]) if len(sys.argv) > 1 else 200
cfg = ScenarioConfig("horizontal").desk_scale()

r0 = fried_horizontal(cfg.cn2_0, cfg.path_m, cfg.wavelength_m)
print(f"path Fried parameter {r0 * 1e3:.1f} mm, grid {cfg.n} x {cfg.pixel_m * 1e3:.1f} mm")

ens = run_ensemble(cfg, shots, base_seed=3)
for j, r in enumerate(cfg.aperture_radii_m):
    print(f"aperture {2e3 * r:5.1f} mm: sigma_I^2 = {scintillation_estimate(ens.P_prime[:, j]):.3f}")

# %% power distribution, 13 mm aperture
x = ens.P_prime[:, -1] / ens.P_prime[:, -1].mean()
density, edges = histogram(x, bins=20)
for d, lo in zip(density, edges):
    print(f"{lo:5.2f} {'#' * int(round(40 * d / density.max()))}")
print(f"skewness {skew(x):.2f}")
