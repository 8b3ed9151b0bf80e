"""Command-line front end.

Subcommands ``validate``, ``run-horizontal``, ``run-downlink`` and ``keyrate``
read an optional YAML file with the sections ``scenario``, ``horizontal``,
``downlink``, ``ao``, ``qkd``, ``run`` and ``output``.  Results go to files in
the output directory; stdout carries only the human-readable report of
``validate`` and stderr carries progress.

Exit codes: 0 success, 1 configuration error, 2 numerical-integrity error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .adaptive_optics import AoNoiseParams
from .channel_sim import (
    ScenarioConfig,
    StackValidationError,
    db_to_linear,
    scintillation_estimate,
    slab_fractions,
    stack_layers,
)
from .errors import ConfigurationError, NumericalIntegrityError
from .qkd_gg02 import KeyRateRow, rate_vs_zenith
from .statistics import (
    ChannelSample,
    Ensemble,
    dump_json,
    fmt,
    provenance,
    run_ensemble,
    summarize,
    write_histograms_csv,
    write_shots_csv,
)
from .turbulence import HvProfile, ScaleProfile

DESK_SAMPLE_CAP = 500
OUT_ENV = "TURBQKD_OUT"

_SCHEMA = {
    "scenario": {
        "kind", "wavelength_m", "w0_m", "n", "pixel_m", "aperture_radii_m",
        "fixed_loss_db", "detector_eff_db", "taper_fraction",
    },
    "horizontal": {"path_m", "cn2_0", "l0_m", "L0_m", "n_screens"},
    "downlink": {"H_m", "h0_m", "h1_m", "n0", "n1", "hv", "scales"},
    "downlink.hv": {"wind_rms_mps", "ground_cn2"},
    "downlink.scales": {"inner_ratio"},
    "ao": {"n_max"},
    "qkd": {"V_mod", "beta", "xi_ch", "electronic_noise", "tf_convention"},
    "run": {"samples", "seed", "zenith_deg", "desk_scale", "workers"},
    "output": {"dir"},
}


@dataclass
class RunConfig:
    scenario: ScenarioConfig
    samples: int = 10_000
    seed: int = 0
    n_max: int = 14
    V_mod: object = "optimize"
    beta: float = 0.95
    xi_ch: float = 0.02
    electronic_noise: float = 0.01
    tf_convention: str = "squared"
    zenith_deg: tuple = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0)
    desk_scale: bool = False
    workers: int = 1
    out_dir: Path = field(default_factory=lambda: Path("turbqkd_out"))

    def __post_init__(self):
        if self.samples < 1:
            raise ConfigurationError("run.samples must be at least 1")
        if self.n_max < 0:
            raise ConfigurationError("ao.n_max must be non-negative")
        if not (self.V_mod == "optimize" or (isinstance(self.V_mod, (int, float)) and self.V_mod > 0)):
            raise ConfigurationError("qkd.V_mod must be a positive number or 'optimize'")
        if not 0 < self.beta <= 1:
            raise ConfigurationError("qkd.beta must lie in (0, 1]")
        if self.xi_ch < 0 or self.electronic_noise < 0:
            raise ConfigurationError("qkd noise terms must be non-negative")
        if self.tf_convention not in ("squared", "literal"):
            raise ConfigurationError("qkd.tf_convention must be 'squared' or 'literal'")
        if not self.zenith_deg:
            raise ConfigurationError("run.zenith_deg must list at least one angle")
        if self.workers < 1:
            raise ConfigurationError("run.workers must be at least 1")

    @property
    def noise(self) -> AoNoiseParams:
        return AoNoiseParams(self.electronic_noise, float(db_to_linear(self.scenario.detector_eff_db)))

    def scenario_for(self, kind: str, zenith: float = 0.0) -> ScenarioConfig:
        cfg = self.scenario
        if cfg.kind != kind:
            # per-kind defaults (pixel, waist, apertures) must be re-resolved
            cfg = dataclasses.replace(cfg, kind=kind, **{k: self._explicit.get(k) for k in _KIND_DEFAULTED})
        if kind == "downlink":
            cfg = cfg.replace(zenith_deg=float(zenith))
        return cfg.desk_scale() if self.desk_scale else cfg

    _explicit: dict = field(default_factory=dict, repr=False)


_KIND_DEFAULTED = ("w0_m", "pixel_m", "aperture_radii_m", "taper_fraction")


def _check_keys(tree: dict, path: str = ""):
    allowed = _SCHEMA.get(path) if path else set(_SCHEMA) - {k for k in _SCHEMA if "." in k}
    if not isinstance(tree, dict):
        raise ConfigurationError(f"{path or 'config'}: expected a mapping")
    for key, val in tree.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in allowed:
            raise ConfigurationError(f"unknown config key {where!r}")
        if where in _SCHEMA and val is not None:
            _check_keys(val, where)


def _num(val, where, kind=float):
    if isinstance(val, str):
        # YAML 1.1 reads unsigned exponents such as 300.0e3 as strings
        try:
            val = float(val)
        except ValueError:
            pass
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigurationError(f"{where}: expected a number, got {val!r}")
    if kind is int and int(val) != val:
        raise ConfigurationError(f"{where}: expected an integer, got {val!r}")
    return kind(val)


def parse_config(path=None, overrides: dict | None = None, kind: str | None = None) -> RunConfig:
    """Load and validate a YAML run configuration; ``path=None`` means all defaults.

    ``kind`` forces the scenario type (the ``run-*`` subcommands do this);
    otherwise ``scenario.kind`` decides, defaulting to the downlink.
    """
    tree = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {p}: {exc.strerror}") from exc
        try:
            tree = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"{p}: not valid YAML ({exc})") from exc
    _check_keys(tree)
    sec = {k: (tree.get(k) or {}) for k in ("scenario", "horizontal", "downlink", "ao", "qkd", "run", "output")}

    scen = {}
    for key, val in sec["scenario"].items():
        where = f"scenario.{key}"
        if key == "kind":
            scen[key] = str(val)
        elif key == "aperture_radii_m":
            if not isinstance(val, list):
                raise ConfigurationError(f"{where}: expected a list")
            scen[key] = tuple(_num(v, where) for v in val)
        else:
            scen[key] = _num(val, where, int if key == "n" else float)
    for key, val in sec["horizontal"].items():
        scen[key] = _num(val, f"horizontal.{key}", int if key == "n_screens" else float)
    dl = dict(sec["downlink"])
    hv = dl.pop("hv", None) or {}
    sc = dl.pop("scales", None) or {}
    for key, val in dl.items():
        scen[key] = _num(val, f"downlink.{key}", int if key in ("n0", "n1") else float)
    scen["hv"] = HvProfile(**{k: _num(v, f"downlink.hv.{k}") for k, v in hv.items()})
    scen["scales"] = ScaleProfile(**{k: _num(v, f"downlink.scales.{k}") for k, v in sc.items()})
    explicit = {k: scen[k] for k in _KIND_DEFAULTED if k in scen}
    if kind is not None:
        scen["kind"] = kind

    run = sec["run"]
    kw = {}
    if "samples" in run:
        kw["samples"] = _num(run["samples"], "run.samples", int)
    if "seed" in run:
        kw["seed"] = _num(run["seed"], "run.seed", int)
    if "workers" in run:
        kw["workers"] = _num(run["workers"], "run.workers", int)
    if "desk_scale" in run:
        kw["desk_scale"] = bool(run["desk_scale"])
    if "zenith_deg" in run:
        z = run["zenith_deg"]
        z = z if isinstance(z, list) else [z]
        kw["zenith_deg"] = tuple(_num(v, "run.zenith_deg") for v in z)
    if "n_max" in sec["ao"]:
        kw["n_max"] = _num(sec["ao"]["n_max"], "ao.n_max", int)
    for key, val in sec["qkd"].items():
        if (key, val) == ("V_mod", "optimize") or key == "tf_convention":
            kw[key] = val
        else:
            kw[key] = _num(val, f"qkd.{key}")
    if "dir" in sec["output"]:
        kw["out_dir"] = Path(str(sec["output"]["dir"]))
    kw.update(overrides or {})

    try:
        scenario = ScenarioConfig(**scen)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
    return RunConfig(scenario=scenario, _explicit=explicit, **kw)


def _progress(msg):
    print(msg, file=sys.stderr, flush=True)


def _samples(rc: RunConfig) -> int:
    return min(rc.samples, DESK_SAMPLE_CAP) if rc.desk_scale else rc.samples


def write_keyrates_csv(rows, path):
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(KeyRateRow._fields)
        for row in rows:
            vals = list(row)
            vals[-1] = max(row.K, 0.0)  # negative rates are reported as no key
            w.writerow([fmt(v) for v in vals])


def _write_outputs(rc: RunConfig, ensembles, m):
    out = rc.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_shots_csv(ensembles, out / "shots.csv")
    write_histograms_csv(ensembles, out / "histograms.csv")
    rows = rate_vs_zenith(ensembles, rc.V_mod, rc.beta, rc.xi_ch, rc.noise, tf_convention=rc.tf_convention)
    write_keyrates_csv(rows, out / "keyrates.csv")
    by_key = {(r.zenith_deg, r.aperture_m): r for r in rows}
    summary = []
    for ens in ensembles:
        entry = {"zenith_deg": ens.cfg.zenith_deg if ens.cfg.kind == "downlink" else None, "apertures": []}
        if len(ens) > 1:
            entry["sigma2_centroid"] = scintillation_estimate(ens.centroid)
        for a in summarize(ens):
            kr = by_key[(ens.cfg.zenith_deg, a["aperture_m"])]
            a.update(V_mod=kr.V_mod, T_f=kr.T_f, xi_f=kr.xi_f, K=kr.K)
            entry["apertures"].append(a)
        summary.append(entry)
    dump_json(
        {
            "kind": ensembles[0].cfg.kind,
            "results": summary,
            "provenance": provenance(ensembles[0].cfg, rc.seed, m),
        },
        out / "summary.json",
    )


def cmd_validate(rc: RunConfig) -> int:
    kind = rc.scenario.kind
    zens = rc.zenith_deg if kind == "downlink" else (0.0,)
    ok = True
    for z in zens:
        cfg = rc.scenario_for(kind, z)
        layers = stack_layers(cfg)
        fr = slab_fractions(cfg, layers)
        worst = int(np.argmax(fr))
        label = f"zenith {z:g} deg" if kind == "downlink" else "horizontal path"
        print(f"{label}: {len(layers)} screens")
        for i, (layer, f) in enumerate(zip(layers, fr)):
            flag = "FAIL" if f >= 0.10 else "ok"
            print(f"  slab {i:2d} [{layer.slab_m[0]:12.1f}, {layer.slab_m[1]:12.1f}] m  fraction {f:.4f}  {flag}")
        a, b = layers[worst].slab_m
        print(f"  max fraction {fr[worst]:.4f} in slab {worst} [{a:.1f}, {b:.1f}] m")
        ok &= bool(np.all(fr < 0.10))
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def _run(rc: RunConfig, kind: str):
    m = _samples(rc)
    zens = rc.zenith_deg if kind == "downlink" else (0.0,)
    ensembles = []
    for z in zens:
        cfg = rc.scenario_for(kind, z)
        _progress(f"{kind} zenith={z:g}: {m} shots on {cfg.n}^2 grid")
        ensembles.append(run_ensemble(cfg, m, rc.seed, ao_orders=(rc.n_max,), workers=rc.workers, progress=True))
    return ensembles, m


def cmd_run(rc: RunConfig, kind: str) -> int:
    ensembles, m = _run(rc, kind)
    _write_outputs(rc, ensembles, m)
    _progress(f"wrote results to {rc.out_dir}")
    return 0


def read_shots_csv(path, rc: RunConfig):
    """Rebuild downlink ensembles (T and corrected efficiency only) from a shot log."""
    groups = {}
    with open(Path(path), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            z = float(row["zenith_deg"]) if row["zenith_deg"] else 0.0
            g = groups.setdefault(z, {})
            g.setdefault(int(row["sample_id"]), []).append(row)
    ensembles = []
    for z, shots in groups.items():
        radii = tuple(float(r["aperture_m"]) for r in next(iter(shots.values())))
        cfg = rc.scenario_for("downlink", z).replace(aperture_radii_m=radii)
        samples = []
        for i, rows in sorted(shots.items()):
            T = np.array([float(r["T"]) for r in rows])
            P = np.array([float(r["P_prime"]) for r in rows])
            has_g = rows[0]["gamma_corrected"] != ""
            gr = np.array([float(r["gamma_raw"]) for r in rows]) if has_g else None
            gc = np.array([[float(r["gamma_corrected"]) for r in rows]]) if has_g else None
            samples.append(ChannelSample(i, 0, P, T, float("nan"), gr, gc))
        ensembles.append(Ensemble(cfg, rc.seed, tuple(samples), (rc.n_max,)))
    return ensembles


def cmd_keyrate(rc: RunConfig, shots: str | None) -> int:
    """Key rates from an existing shot log, or from fresh downlink ensembles."""
    if shots:
        ensembles = read_shots_csv(shots, rc)
    else:
        ensembles, _ = _run(rc, "downlink")
    rc.out_dir.mkdir(parents=True, exist_ok=True)
    rows = rate_vs_zenith(ensembles, rc.V_mod, rc.beta, rc.xi_ch, rc.noise, tf_convention=rc.tf_convention)
    write_keyrates_csv(rows, rc.out_dir / "keyrates.csv")
    _progress(f"wrote {rc.out_dir / 'keyrates.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="turbqkd", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
    common.add_argument("--samples", type=int, help="shots per zenith angle")
    common.add_argument("--out", help=f"output directory (overrides ${OUT_ENV})")
    common.add_argument("--desk-scale", action="store_true", help="512^2 grid at double pitch, at most 500 shots")
    common.add_argument("--workers", type=int, help="worker threads")
    sub.add_parser("validate", parents=[common], help="check screen placement")
    sub.add_parser("run-horizontal", parents=[common], help="horizontal-link ensemble")
    sub.add_parser("run-downlink", parents=[common], help="downlink ensembles over the zenith list")
    kr = sub.add_parser("keyrate", parents=[common], help="key rates per zenith angle and aperture")
    kr.add_argument("--shots", help="existing shots.csv to reduce instead of simulating")
    return parser


def _overrides(args) -> dict:
    ov = {}
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigurationError("--seed must be an unsigned 64-bit integer")
        ov["seed"] = args.seed
    if args.samples is not None:
        ov["samples"] = args.samples
    if args.desk_scale:
        ov["desk_scale"] = True
    if args.workers is not None:
        ov["workers"] = args.workers
    if os.environ.get(OUT_ENV):
        ov["out_dir"] = Path(os.environ[OUT_ENV])
    if args.out:
        ov["out_dir"] = Path(args.out)
    return ov


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        kind = {"run-horizontal": "horizontal", "run-downlink": "downlink", "keyrate": "downlink"}.get(args.command)
        rc = parse_config(args.config, _overrides(args), kind)
        if args.command == "validate":
            return cmd_validate(rc)
        if args.command == "run-horizontal":
            return cmd_run(rc, "horizontal")
        if args.command == "run-downlink":
            return cmd_run(rc, "downlink")
        return cmd_keyrate(rc, args.shots)
    except NumericalIntegrityError as exc:
        _progress(f"error: {exc}")
        return 2
    except StackValidationError as exc:
        _progress(f"error: {exc}")
        return 1
    except OSError as exc:
        _progress(f"error: {exc}")
        return 3
    except (ConfigurationError, ValueError) as exc:
        _progress(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
