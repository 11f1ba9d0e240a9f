"""Command line interface.

Every command reads an optional JSON config file (``--config``); flags
override its keys.  A result file written by ``fit`` or ``exact`` embeds
the effective config under ``"config"`` and can itself be passed back as
``--config`` to rerun the same computation.

Exit status: 0 on success, 1 for invalid input, 2 for runtime failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .aggregate import (ChainConfig, estimate_sigma2, exact_aggregate, metropolis_run,
                        two_stage_sigma2)
from .core import SparsityPattern, normalize_columns
from .experiments import METHODS, SimSpec, run_comparison
from .groups import GroupStructure
from .priors import PriorSpec, check_assumption_grouped, check_assumption_penalized
from .structure import penalty_from_json
from .theory import bound_report

log = logging.getLogger("structagg")

DEFAULTS = {
    "data": None, "response": None, "prior": "spa", "penalty": None, "groups": None,
    "h": None, "sigma2": None, "iterations": 7000, "burn_in": 3000, "seed": 0,
    "walk": "covariate", "simplified": True, "normalize": True, "threshold": 0.0,
    "output": None, "trace": None, "jobs": 1,
}
SIM_KEYS = ("n", "M", "C", "C_on", "sigma", "geometry", "width", "reps", "h",
            "iterations", "burn_in", "seed")
EXHAUSTIVE_SCAN_LIMIT = 16


class UsageError(Exception):
    """Invalid input; reported with exit status 1."""


PATH_KEYS = ("data", "penalty", "groups", "output", "trace", "beta")


def _resolve(cfg, base):
    for key in PATH_KEYS:
        if isinstance(cfg.get(key), str):
            cfg[key] = str((base / cfg[key]).resolve())


def _load_config(path):
    """Config keys from a JSON file; relative paths are taken from its directory."""
    if path is None:
        return {}
    obj = io.load_json(path)
    if not isinstance(obj, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    cfg = dict(obj.get("config", obj))
    _resolve(cfg, Path(path).resolve().parent)
    return cfg


def _effective(args, extra_keys=()):
    cfg = dict(DEFAULTS)
    cfg.update(_load_config(args.config))
    flags = {}
    for key in list(DEFAULTS) + list(extra_keys):
        val = getattr(args, key, None)
        if val is not None:
            flags[key] = val
    _resolve(flags, Path.cwd())
    cfg.update(flags)
    cfg["command"] = args.command
    return cfg


def _load_structure(value, loader):
    if value is None:
        return None
    return loader(value if isinstance(value, dict) else io.load_json(value))


def _build_prior(cfg, M, R):
    variant = cfg["prior"]
    simplified = bool(cfg.get("simplified", True))
    if variant == "spa":
        return PriorSpec.spa(M, R, simplified)
    if variant == "ssa":
        pen_obj = cfg.get("penalty")
        if pen_obj is None:
            raise UsageError("--prior ssa needs --penalty")
        obj = pen_obj if isinstance(pen_obj, dict) else io.load_json(pen_obj)
        if cfg.get("h") is not None:
            obj = dict(obj, h=float(cfg["h"]))
        penalty = penalty_from_json(obj, M)
        if penalty.M != M:
            raise UsageError(f"penalty is defined on {penalty.M} covariates, data has {M}")
        return PriorSpec.ssa(penalty, R, simplified)
    if variant == "gsa":
        groups = _load_structure(cfg.get("groups"), lambda o: GroupStructure.from_json(o, M))
        if groups is None:
            raise UsageError("--prior gsa needs --groups")
        return PriorSpec.gsa(groups, R, simplified)
    raise UsageError(f"unknown prior {variant!r}; expected spa, ssa or gsa")


def _load_data(cfg):
    if cfg.get("data") is None:
        raise UsageError("no data file given (--data)")
    data, names = io.read_csv(cfg["data"], cfg.get("response"))
    return data, names


def _emit(cfg, payload):
    text = io.dumps(payload)
    if cfg.get("output"):
        Path(cfg["output"]).write_text(text + "\n")
    else:
        print(text)


def _chain_config(cfg, prior, sigma2):
    return ChainConfig(prior=prior, sigma2=sigma2, iterations=int(cfg["iterations"]),
                       burn_in=int(cfg["burn_in"]), seed=int(cfg["seed"]),
                       walk=cfg["walk"], trace=bool(cfg.get("trace")))


def cmd_fit(args, exact=False):
    cfg = _effective(args)
    data, names = _load_data(cfg)
    prior = _build_prior(cfg, data.M, data.rank())
    work, scaling = normalize_columns(data) if cfg["normalize"] else (data, None)
    sigma2 = cfg.get("sigma2")
    t0 = time.perf_counter()
    sigma_info = None
    if exact:
        if sigma2 is None:
            raise UsageError("exact aggregation needs --sigma2")
        fit = exact_aggregate(work, prior, float(sigma2), walk=cfg["walk"])
    else:
        config = _chain_config(cfg, prior, None if sigma2 is None else float(sigma2))
        if sigma2 is None:
            est = two_stage_sigma2(work, config, scaling=scaling)
            fit = est.fit
            sigma_info = {"method": "two-stage", "path": est.path}
        else:
            fit = metropolis_run(work, config)
    wall = time.perf_counter() - t0
    if scaling is not None:
        fit.beta = scaling.to_original(fit.beta)
    result = fit.to_json()
    result["covariates"] = names
    if cfg.get("threshold"):
        result["beta_thresholded"] = fit.thresholded(float(cfg["threshold"])).tolist()
    if sigma_info:
        result["sigma2_estimate"] = sigma_info
    if fit.trace is not None and cfg.get("trace"):
        io.write_trace(cfg["trace"], fit.trace)
    result.update({"config": cfg, "seed": int(cfg["seed"]), "wall_time": wall})
    _emit(cfg, result)
    return 0


def cmd_exact(args):
    return cmd_fit(args, exact=True)


def cmd_simulate(args):
    cfg = _effective(args, ("methods",))
    sim = dict(cfg.get("simulation") or {})
    sim.setdefault("seed", cfg["seed"])
    for key in SIM_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            sim[key] = val
    missing = [k for k in ("n", "M", "C", "C_on") if k not in sim]
    if missing:
        raise UsageError(f"simulation settings missing: {', '.join(missing)}")
    try:
        spec = SimSpec(**{k: sim[k] for k in SIM_KEYS if k in sim})
    except TypeError as e:
        raise UsageError(str(e)) from None
    methods = cfg.get("methods") or list(METHODS)
    if isinstance(methods, str):
        methods = [m.strip() for m in methods.split(",") if m.strip()]
    cfg["simulation"] = spec.to_json()
    cfg["seed"] = spec.seed
    cfg["methods"] = methods
    summary = run_comparison(spec, methods, jobs=int(cfg.get("jobs") or 1))
    if cfg.get("output"):
        summary.to_csv(cfg["output"])
        Path(cfg["output"]).with_suffix(".config.json").write_text(io.dumps(cfg) + "\n")
    else:
        summary.to_csv(sys.stdout)
    print(summary.to_text(), file=sys.stderr if not cfg.get("output") else sys.stdout)
    return 0


def cmd_estimate_variance(args):
    cfg = _effective(args, ("alpha", "grid"))
    data, _ = _load_data(cfg)
    prior = _build_prior(cfg, data.M, data.rank())
    work, scaling = normalize_columns(data) if cfg["normalize"] else (data, None)
    config = _chain_config(cfg, prior, None)
    grid = cfg.get("grid")
    if isinstance(grid, str):
        grid = [float(v) for v in grid.split(",") if v.strip()]
    if grid:
        est = estimate_sigma2(work, config, float(cfg.get("alpha") or 0.1), grid, scaling)
        method = "grid"
    else:
        est = two_stage_sigma2(work, config, scaling=scaling)
        method = "two-stage"
    cfg["grid"] = grid
    _emit(cfg, {"sigma2": est.sigma2, "fallback": est.fallback, "method": method,
                "path": est.path, "config": cfg, "seed": int(cfg["seed"])})
    return 0


def cmd_check_assumptions(args):
    cfg = _effective(args, ("samples", "rank"))
    if cfg.get("data"):
        data, _ = _load_data(cfg)
        M, R = data.M, data.rank()
    else:
        M = cfg.get("M")
        if M is None and isinstance(cfg.get("penalty"), (str, dict)):
            obj = cfg["penalty"] if isinstance(cfg["penalty"], dict) else io.load_json(cfg["penalty"])
            M = penalty_from_json(obj).M
        if M is None and cfg.get("groups"):
            M = _load_structure(cfg["groups"], GroupStructure.from_json).M
        if M is None:
            raise UsageError("give --data, or a penalty/group file that fixes M")
        R = int(cfg.get("rank") or M)
    prior = _build_prior(cfg, M, R)
    if prior.variant == "ssa":
        if M <= EXHAUSTIVE_SCAN_LIMIT:
            report = check_assumption_penalized(prior)
            mode = "exhaustive"
        else:
            rng = np.random.default_rng(int(cfg["seed"]))
            n_samples = int(cfg.get("samples") or 10000)
            pats = (SparsityPattern(rng.random(M) < rng.random()) for _ in range(n_samples))
            report = check_assumption_penalized(prior, pats)
            mode = f"sampled ({n_samples})"
    elif prior.variant == "gsa":
        report = check_assumption_grouped(prior)
        mode = "exhaustive" if report.detail.get("exhaustive") else "sufficient condition only"
    else:
        raise UsageError("check-assumptions applies to the ssa and gsa priors")
    out = report.to_json()
    out.update({"mode": mode, "config": cfg})
    _emit(cfg, out)
    return 0


def cmd_bounds(args):
    cfg = _effective(args, ("beta",))
    data, _ = _load_data(cfg)
    if cfg.get("sigma2") is None:
        raise UsageError("bounds need --sigma2")
    if cfg.get("beta") is None:
        raise UsageError("bounds need a comparator --beta (JSON list, fit output, or CSV column)")
    beta = io.read_vector(cfg["beta"])
    if beta.shape != (data.M,):
        raise UsageError(f"comparator has length {beta.shape[0]}, data has M={data.M}")
    prior = _build_prior(cfg, data.M, data.rank())
    report = bound_report(data, beta, float(cfg["sigma2"]), prior)
    report["config"] = cfg
    _emit(cfg, report)
    return 0


COMMANDS = {
    "fit": cmd_fit, "exact": cmd_exact, "simulate": cmd_simulate,
    "estimate-variance": cmd_estimate_variance,
    "check-assumptions": cmd_check_assumptions, "bounds": cmd_bounds,
}


def _common(p):
    p.add_argument("--config", help="JSON config file (or a previous result file)")
    p.add_argument("--data", help="CSV file with covariates and response")
    p.add_argument("--response", help="response column name or 1-based number (default: last)")
    p.add_argument("--prior", choices=["spa", "ssa", "gsa"])
    p.add_argument("--penalty", help="JSON structural penalty (ssa)")
    p.add_argument("--groups", help="JSON group structure (gsa)")
    p.add_argument("--h", type=float, help="cluster threshold, overrides the penalty file")
    p.add_argument("--sigma2", type=float, help="noise variance (estimated when absent)")
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", dest="burn_in", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--walk", choices=["covariate", "group"])
    p.add_argument("--full-prior", dest="simplified", action="store_const", const=False,
                   help="give the full model prior mass 1/2")
    p.add_argument("--no-normalize", dest="normalize", action="store_const", const=False)
    p.add_argument("--threshold", type=float, help="zero coefficients selected less often")
    p.add_argument("--output", "-o", help="output file (default: standard output)")
    p.add_argument("--trace", help="write the chain trace to this CSV")
    p.add_argument("--jobs", type=int, help="worker processes")


def build_parser():
    parser = argparse.ArgumentParser(prog="structagg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        _common(p)
        if name == "simulate":
            for key, typ in (("n", int), ("M", int), ("C", int), ("C_on", int),
                             ("sigma", float), ("width", int), ("reps", int)):
                p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=typ)
            p.add_argument("--geometry")
            p.add_argument("--methods", help="comma separated subset of spa,ssa,stepwise")
        if name == "estimate-variance":
            p.add_argument("--alpha", type=float)
            p.add_argument("--grid", help="comma separated trial variances")
        if name == "check-assumptions":
            p.add_argument("--samples", type=int)
            p.add_argument("--rank", type=int)
        if name == "bounds":
            p.add_argument("--beta", help="comparator coefficients")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001
        print(f"runtime failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
