"""Command line entry points.

    lrrinfer mc --spec 1 --reps 200 --out out/mc1
    lrrinfer infer --data data/synthetic_wages.csv --topcode-frac 0.10 --out out/wages
    lrrinfer lrr-check --model interval --theta 2,1 --scale-k 0.01,0.1,1

Failures print ``{"format_version": 1, "error": {...}}`` on stderr and exit
with status 1 (2 for bad arguments).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace

import numpy as np

from . import io
from .grid import ParameterGrid
from .lrr import METHODS, confidence_sets, sensitivity_oracle, DiscretizedSelectionRule
from .models.entry import EntryGame, EntryParameters
from .models.interval import IntervalModel
from .simulation import DEFAULT_GRIDS, SPECS, run_coverage
from .statespace import CounterfactualContext, eta_grid

# default search grid for log-wage data; wide enough for z2 = 1e8
INFER_GRID = ParameterGrid.from_bounds(beta=[(1.0, 6.0, 51)], gamma=[(-4.0, 4.0, 51)])
_INFER_STREAM = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_grid(text: str) -> ParameterGrid:
    """``lo:hi:steps,lo:hi:steps`` (beta then gamma) or a JSON file path."""
    if text.endswith(".json"):
        with open(text, encoding="utf-8") as fh:
            d = json.load(fh)
        return ParameterGrid.from_dict(d.get("grid", d))
    parts = [p.split(":") for p in text.split(",")]
    if len(parts) != 2 or any(len(p) != 3 for p in parts):
        raise UsageError("grid must look like 'blo:bhi:bsteps,glo:ghi:gsteps'")
    (b0, b1, bn), (g0, g1, gn) = parts
    return ParameterGrid.from_bounds(beta=[(float(b0), float(b1), int(bn))], gamma=[(float(g0), float(g1), int(gn))])


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _common(p):
    p.add_argument("--config", help="JSON run configuration; explicit flags override it")
    p.add_argument("--boot", type=int, help="bootstrap draws B (default 199)")
    p.add_argument("--alpha", type=float, help="level (default 0.05)")
    p.add_argument("--alpha1", type=float, help="first-stage level (default 0.005)")
    p.add_argument("--kappa", type=float, help="set-estimation slack (default 0.02)")
    p.add_argument("--grid", help="'blo:bhi:bsteps,glo:ghi:gsteps' or a grid JSON file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--method", choices=(*METHODS, "both"), help="critical-value scheme (default both)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lrrinfer", description="Moment-inequality confidence regions with locally robust refinement")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    mc = sub.add_parser("mc", help="Monte Carlo coverage study")
    _common(mc)
    mc.add_argument("--spec", type=int, choices=sorted(SPECS), help="design (default 1)")
    mc.add_argument("--n", type=int, help="sample size (default 200)")
    mc.add_argument("--reps", type=int, help="replicates R (default 200)")
    mc.add_argument("--workers", type=int, help="worker processes (default 1)")
    mc.add_argument("--truncation", choices=("none", "reject"), help="handling of Y* > z2 (default none)")

    inf = sub.add_parser("infer", help="confidence regions for top-coded wage data")
    _common(inf)
    inf.add_argument("--data", help="CSV with header wage,gender")
    inf.add_argument("--topcode-frac", type=float, help="fraction of rows to top-code (default 0.10)")
    inf.add_argument("--z2", type=float, help="upper wage bound on the raw scale (default 1e8)")

    chk = sub.add_parser("lrr-check", help="numerical check of the sensitivity bound")
    chk.add_argument("--model", choices=("interval", "entry"), default="interval")
    chk.add_argument("--theta", help="comma-separated parameter (interval: beta,gamma; entry: b1,b2,g1,g2)")
    chk.add_argument("--eta-bins", type=int, default=101, help="eta bins for the interval model")
    chk.add_argument("--perturbations", type=int, default=200)
    chk.add_argument("--scale-k", default="0.01,0.1,1", help="comma-separated perturbation sizes")
    chk.add_argument("--z1", type=float, default=2.3)
    chk.add_argument("--z2", type=float, default=4.5)
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--out", help="also write the reports to this directory")
    return parser


def build_config(args, kind: str) -> io.RunConfig:
    cfg = io.RunConfig.load(args.config) if args.config else io.RunConfig()
    cfg.model = "interval"
    plan = dict(cfg.plan)
    for flag, key in (("boot", "B"), ("alpha", "alpha"), ("alpha1", "alpha1"), ("kappa", "kappa")):
        if getattr(args, flag) is not None:
            plan[key] = getattr(args, flag)
    plan.pop("seed", None)
    cfg.plan = plan
    for flag, key in (("seed", "seed"), ("method", "method"), ("out", "output_dir")):
        if getattr(args, flag) is not None:
            setattr(cfg, key, getattr(args, flag))
    if args.grid:
        cfg.grid = parse_grid(args.grid).to_dict()

    extra = dict(cfg.extra)
    if kind == "mc":
        defaults = {"spec": 1, "n": 200, "reps": 200, "workers": 1, "truncation": "none"}
        for key, default in defaults.items():
            val = getattr(args, key)
            extra[key] = val if val is not None else extra.get(key, default)
        if not cfg.grid:
            cfg.grid = DEFAULT_GRIDS[extra["spec"]].to_dict()
    else:
        if args.data:
            cfg.input_path = args.data
        for flag, key, default in (("topcode_frac", "topcode_frac", 0.10), ("z2", "z2", 1e8)):
            val = getattr(args, flag)
            extra[key] = val if val is not None else extra.get(key, default)
        if not cfg.grid:
            cfg.grid = INFER_GRID.to_dict()
    extra["command"] = kind
    cfg.extra = extra
    return cfg.validate(need_input=(kind == "infer"))


def _methods(cfg) -> tuple[str, ...]:
    return METHODS if cfg.method == "both" else (cfg.method,)


def cmd_mc(args) -> dict:
    cfg = build_config(args, "mc")
    x = cfg.extra
    spec = SPECS[x["spec"]]
    spec = replace(spec, truncation=x["truncation"])
    cov = run_coverage(x["spec"], grid=ParameterGrid.from_dict(cfg.grid), plan=cfg.bootstrap_plan(),
                       R=x["reps"], n=x["n"], workers=x["workers"], spec=spec)
    files = io.emit_report(cov, cfg.output_dir, config=cfg.to_dict(), name="coverage", methods=_methods(cfg))
    return {"files": [str(f) for f in files], **{k: v for k, v in cov.summary().items() if k != "elapsed_seconds"}}


def cmd_infer(args) -> dict:
    cfg = build_config(args, "infer")
    start = time.perf_counter()
    records = io.ingest_csv(cfg.input_path)
    data, z1, log_z2 = io.apply_topcoding(records, cfg.extra["topcode_frac"], cfg.extra["z2"])
    model = IntervalModel(z1, log_z2)
    grid = ParameterGrid.from_dict(cfg.grid)
    reports = confidence_sets(data, model, model.lrr_criterion(data), grid, cfg.bootstrap_plan(),
                              stream=(_INFER_STREAM,))
    reports = {m: reports[m] for m in _methods(cfg)}
    timings = {"elapsed_seconds": time.perf_counter() - start}
    cfg.extra.update({"z1_log": z1, "z2_log": log_z2, "n": len(data), "censored": int(data.censored.sum())})
    files = io.emit_report(reports, cfg.output_dir, config=cfg.to_dict(), name="infer", timings=timings)
    return {"files": [str(f) for f in files], "n": len(data), "censored": int(data.censored.sum()),
            "results": {m: r.summary() for m, r in reports.items()}}


def lrr_check(model_name: str, theta, eta_bins: int, perturbations: int, scales, seed: int,
              z1: float = 2.3, z2: float = 4.5):
    if model_name == "interval":
        theta = theta or [2.0, 1.0]
        model = IntervalModel(z1, z2)
        ctx = CounterfactualContext([[1, 0, z1, z2], [1, 1, z1, z2]], [0.5, 0.5])
        eta = eta_grid(eta_bins, "midpoint")
    else:
        theta = EntryParameters.from_theta(theta or [-1.0, -1.0, 0.0, 0.0])
        theta.check_signs()
        model = EntryGame()
        ctx = CounterfactualContext([[1.0]], [1.0])
        eta = eta_grid(2, "binary")
    rule = DiscretizedSelectionRule.uniform(eta)
    return [sensitivity_oracle(model, theta, rule, K, perturbations, seed, ctx) for K in scales]


def cmd_lrr_check(args) -> dict:
    theta = _floats(args.theta) if args.theta else None
    scales = _floats(args.scale_k)
    if not scales:
        raise UsageError("--scale-k needs at least one value")
    reports = lrr_check(args.model, theta, args.eta_bins, args.perturbations, scales, args.seed, args.z1, args.z2)
    out = []
    for r in reports:
        d = r.to_dict()
        d["bound_respected"] = bool(r.max_observed_ratio <= r.bound * (1 + 1e-6) + 1e-12)
        d["extremal_gap"] = abs(r.extremal_ratio - r.bound)
        out.append(d)
    result = {"model": args.model, "reports": out}
    if args.out:
        config = {"command": "lrr-check", **{k: v for k, v in vars(args).items() if k != "func"}}
        result["files"] = [str(f) for f in io.emit_report(reports, args.out, config=config, name="lrr_check")]
    return result


COMMANDS = {"mc": cmd_mc, "infer": cmd_infer, "lrr-check": cmd_lrr_check}


def _error(exc: BaseException, code: int) -> int:
    payload = {"format_version": io.FORMAT_VERSION, "error": {"type": type(exc).__name__, "message": str(exc)}}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        result = COMMANDS[args.command](args)
    except UsageError as exc:
        return _error(exc, 2)
    except (ValueError, OSError, KeyError) as exc:
        return _error(exc, 1)
    print(json.dumps({"format_version": io.FORMAT_VERSION, **result}, default=_jsonable, indent=2))
    return 0


def _jsonable(o):
    if isinstance(o, (np.generic,)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


if __name__ == "__main__":
    sys.exit(main())
