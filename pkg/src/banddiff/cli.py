"""Command line driver: ``banddiff <subcommand> [--config FILE] [--key value ...]``.

Each subcommand reads a flat JSON config (keys listed in ``DEFAULTS``),
applies command line overrides, writes CSV/JSON payloads plus a
``manifest.json`` into the output directory, and exits with 0 (success),
2 (configuration error), 3 (numerical failure) or 4 (cap exceeded). Payloads
are deterministic in the config; timestamps only appear in the manifest.
"""
import argparse
import csv
import json
import logging
import os
import platform
import sys
import time
import warnings

import numpy as np

from . import __version__, chebyshev, constants, diagrams, diffusion, propagator, spectral
from ._accel import backend
from .constants import LIMIT_LAW_GRID, LIMIT_LAW_TIMES, TEST_FUNCTIONS
from .ensemble import EnsembleKind, sample
from .errors import BandDiffError, CapExceeded, ConfigError
from .lattice import LatticeConfig, all_sites

log = logging.getLogger("banddiff")

_LATTICE = {"d": 1, "N": 64, "W": 4}

DEFAULTS = {
    "coeffs": {"t": 10.0, "M": 100, "lam_lo": 0.0, "lam_hi": 1.2, "lam_step": 0.01},
    "evolve": {**_LATTICE, "kind": "hermitian", "seed": 0, "t": 10.0, "method": "chebyshev"},
    "diffusion": {**_LATTICE, "kind": "hermitian", "seed": 0, "kappa": 0.3, "T": 1.0,
                  "n_samples": 20, "method": "chebyshev"},
    "theorem1": {"d": 1, "N": 4096, "W": 24, "kind": "hermitian", "seed": 0, "kappa": 0.3, "T": 1.0,
                 "n_samples": 100, "functions": list(TEST_FUNCTIONS)},
    "deloc": {"d": 1, "N": 1024, "W": 8, "kind": "hermitian", "seed": 0, "kappa": 0.3, "eps": 0.04,
              "n_seeds": 2},
    "diagrams": {"n": 3, "n_prime": 3},
    "audit": {"d": 1, "N": 8, "W": 2, "p": 3},
    "limitlaw": {"times": list(LIMIT_LAW_TIMES), "lam_lo": LIMIT_LAW_GRID[0],
                 "lam_hi": LIMIT_LAW_GRID[1], "lam_step": 0.005},
}


# -- output helpers --------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _lattice(cfg):
    lat = LatticeConfig(int(cfg["d"]), int(cfg["N"]), int(cfg["W"]))
    if not lat.meets_uniformity():
        warnings.warn(f"N = {lat.N} < W^(1+d/6) = {lat.W ** (1 + lat.d / 6):.4g}: "
                      "outside the regime of uniform statements")
    return lat


def _site_columns(lat):
    return [f"x{k}" for k in range(lat.d)]


# -- subcommands ---------------------------------------------------------------------

def run_coeffs(cfg, out):
    t, M = float(cfg["t"]), int(cfg["M"])
    cc = chebyshev.alphas(t)
    ac = chebyshev.a_coeffs(t, M, K=cc.K)
    rows = [(k, cc.alphas[k].real, cc.alphas[k].imag, ac.a[k].real, ac.a[k].imag) for k in range(cc.K + 1)]
    write_csv(os.path.join(out, "coeffs.csv"), ["k", "re_alpha", "im_alpha", "re_a", "im_a"], rows)
    lam = chebyshev.limit_law_grid(cfg["lam_lo"], cfg["lam_hi"], cfg["lam_step"])
    write_csv(os.path.join(out, "cdf.csv"), ["lambda", "F_tilde", "F"],
              zip(lam, chebyshev.empirical_cdf(t, lam), chebyshev.limit_cdf(lam)))
    return {"K": cc.K, "tail_abs": cc.tail_abs}


def run_evolve(cfg, out):
    lat = _lattice(cfg)
    H = sample(lat, cfg["kind"], int(cfg["seed"]))
    method = propagator.Method(cfg["method"])
    t = float(cfg["t"])
    if method is propagator.Method.ChebyshevRecursion:
        res = propagator.chebyshev_evolve(H, t)
    elif method is propagator.Method.NonbacktrackingSeries:
        res = propagator.nonbacktracking_evolve(H, t)
    else:
        res = propagator.dense_oracle_evolve(H, t)
    sites = all_sites(lat)
    prob = np.abs(res.psi) ** 2
    rows = ((i, *sites[i], res.psi[i].real, res.psi[i].imag, prob[i]) for i in range(lat.n_sites))
    write_csv(os.path.join(out, "psi.csv"), ["index", *_site_columns(lat), "re_psi", "im_psi", "prob"], rows)
    return {"truncation": res.truncation, "residual_bound": res.residual_bound, "scale": res.scale,
            "norm_defect": res.norm_defect}


def run_diffusion(cfg, out):
    lat = _lattice(cfg)
    sp = diffusion.ScalingParams(float(cfg["kappa"]), float(cfg["T"]), lat.W, lat.d)
    prof = diffusion.estimate_rho(lat, cfg["kind"], sp.t, int(cfg["n_samples"]), int(cfg["seed"]),
                                  method=cfg["method"])
    lad = diffusion.ladder_prediction(lat, sp.t)
    lim = diffusion.scaled_limit_profile(lat, sp.kappa, sp.T)
    sites = all_sites(lat)
    rows = ((i, *sites[i], prof.rho[i], prof.stderr[i], lad[i], lim[i]) for i in range(lat.n_sites))
    write_csv(os.path.join(out, "profile.csv"),
              ["index", *_site_columns(lat), "rho", "stderr", "ladder_prediction", "L_scaled"], rows)
    return {"t": sp.t, "s": sp.s, "eta": sp.eta, "mass": prof.mass, "tv_to_ladder": diffusion.tv_distance(prof.rho, lad)}


def run_theorem1(cfg, out):
    lat = _lattice(cfg)
    names = tuple(cfg["functions"])
    res, prof = diffusion.theorem1_batch(lat, cfg["kind"], float(cfg["kappa"]), float(cfg["T"]),
                                         int(cfg["n_samples"]), int(cfg["seed"]), names=names,
                                         keep_profile=True)
    write_csv(os.path.join(out, "theorem1.csv"), ["function", "lhs", "rhs", "stderr", "gap", "n_samples"],
              ((r.name, r.lhs, r.rhs, r.stderr, r.gap, r.n_samples) for r in res.values()))
    lad = diffusion.ladder_prediction(lat, prof.t)
    return {"tv_to_ladder": diffusion.tv_distance(prof.rho, lad), "t": prof.t}


def run_deloc(cfg, out):
    lat = _lattice(cfg)
    rows, summary = [], []
    for i in range(int(cfg["n_seeds"])):
        s = diffusion.derive_seed(int(cfg["seed"]), "deloc", i)
        rec = spectral.localization_records(lat, cfg["kind"], float(cfg["kappa"]), float(cfg["eps"]), s)
        for a in range(len(rec.eigenvalues)):
            rows.append((i, a, rec.eigenvalues[a], rec.functional[a], rec.in_A[a], rec.in_B[a], rec.in_A_tilde[a]))
        summary.append((i, s, float(np.mean(rec.in_A)), int(np.sum(rec.in_B)),
                        bool(np.all(rec.in_A_tilde[rec.in_B]))))
    write_csv(os.path.join(out, "deloc.csv"),
              ["sample", "alpha", "lambda", "functional", "in_A", "in_B", "in_A_tilde"], rows)
    write_csv(os.path.join(out, "deloc_summary.csv"),
              ["sample", "seed", "localized_fraction", "n_B", "inclusion_ok"], summary)
    return {"samples": len(summary), "seeds": [row[1] for row in summary]}


def run_diagrams(cfg, out):
    c = diagrams.census(int(cfg["n"]), int(cfg["n_prime"]))
    write_json(os.path.join(out, "census.json"), c)
    return {"pairings": c["pairings"], "skeleton_classes": c["skeleton_classes"]}


def run_audit(cfg, out):
    lat = _lattice(cfg)
    rep = diagrams.bound_audit(int(cfg["p"]), lat)
    rows = ((r.pairing.n, r.pairing.n_prime, " ".join(map(str, r.pairing.partner)), r.skeleton.m,
             r.skeleton.mbar, r.skeleton.nbar, str(r.total_R), float(r.total_R), r.bound, r.ok)
            for r in rep.records)
    write_csv(os.path.join(out, "audit.csv"),
              ["n", "n_prime", "partner", "m", "mbar", "nbar", "sum_R_exact", "sum_R", "bound", "ok"], rows)
    return {"audited": rep.n_audited, "failures": len(rep.failures), "max_ratio": rep.max_ratio}


def run_limitlaw(cfg, out):
    grid = chebyshev.limit_law_grid(cfg["lam_lo"], cfg["lam_hi"], cfg["lam_step"])
    write_csv(os.path.join(out, "limitlaw.csv"), ["t", "sup_error"],
              ((t, chebyshev.limit_law_sup_error(t, grid)) for t in cfg["times"]))
    return {"grid_points": len(grid)}


RUNNERS = {
    "coeffs": run_coeffs, "evolve": run_evolve, "diffusion": run_diffusion, "theorem1": run_theorem1,
    "deloc": run_deloc, "diagrams": run_diagrams, "audit": run_audit, "limitlaw": run_limitlaw,
}


# -- configuration ---------------------------------------------------------------------

def _coerce(key, value, default):
    try:
        if isinstance(default, bool):
            return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, list):
            items = value.split(",") if isinstance(value, str) else list(value)
            return [_coerce(key, v, default[0]) for v in items] if default else items
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {value!r}") from exc


def resolve_config(sub, config_path=None, overrides=None):
    """Defaults, then the JSON file, then command line overrides; unknown keys are errors."""
    defaults = DEFAULTS[sub]
    cfg = dict(defaults)
    if config_path:
        try:
            with open(config_path) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg.update(loaded)
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg[k] = v
    unknown = sorted(set(cfg) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown config keys for {sub}: {unknown}")
    return {k: _coerce(k, cfg[k], defaults[k]) for k in defaults}


def build_parser():
    parser = argparse.ArgumentParser(prog="banddiff", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"banddiff {__version__}")
    subs = parser.add_subparsers(dest="subcommand", required=True)
    for name, defaults in DEFAULTS.items():
        sp = subs.add_parser(name, help=RUNNERS[name].__name__.replace("run_", "") + " experiment")
        sp.add_argument("--config", help="JSON file with run parameters")
        sp.add_argument("--out", default=None, help="output directory (default: banddiff-out/<subcommand>)")
        for key, val in defaults.items():
            flags = [f"--{key}"] + ([f"--{key.replace('_', '')}"] if "_" in key else [])
            sp.add_argument(*flags, dest=f"opt_{key}", default=None, help=f"override (default {val!r})")
    return parser


def run(sub, cfg, out):
    """Execute one subcommand; returns (exit code, manifest dict)."""
    os.makedirs(out, exist_ok=True)
    started = time.time()
    manifest = {
        "subcommand": sub,
        "config": cfg,
        "versions": {"banddiff": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "backend": backend()},
        "tolerances": {k: v for k, v in sorted(vars(constants).items()) if k.startswith(("TOL_", "DEFAULT_TOL"))},
        "started": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started)),
    }
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            manifest["result"] = RUNNERS[sub](cfg, out)
            code = 0
        except BandDiffError as exc:
            code = exc.exit_code
            record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
            if isinstance(exc, CapExceeded):
                record["estimate"] = exc.estimate
            if getattr(exc, "index", None) is not None:
                record["sample_index"] = exc.index
            manifest["error"] = record
            write_json(os.path.join(out, "error.json"), record)
            print(json.dumps(record, sort_keys=True, default=str), file=sys.stderr)
    manifest["warnings"] = [str(w.message) for w in caught]
    for w in caught:
        log.warning("%s", w.message)
    manifest["wall_clock_seconds"] = time.time() - started
    manifest["exit_code"] = code
    write_json(os.path.join(out, "manifest.json"), manifest)
    return code, manifest


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    sub = args.subcommand
    out = args.out or os.path.join("banddiff-out", sub)
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("opt_")}
    try:
        cfg = resolve_config(sub, args.config, overrides)
        if "kind" in cfg:
            EnsembleKind.parse(cfg["kind"])
        if "method" in cfg and sub == "evolve":
            try:
                propagator.Method(cfg["method"])
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
    except BandDiffError as exc:
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return exc.exit_code
    code, _ = run(sub, cfg, out)
    return code


if __name__ == "__main__":
    sys.exit(main())
