"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 numeric or detection failure,
3 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional

from . import __version__
from .detect import ClassifyOptions, classify, recurrent_period, segment_pseudo_helices
from .errors import HelixChaosError, InsufficientDataError, NotInRegimeError, UsageError
from .families import BUILTIN_NAMES, bind, builtin, custom, schwarzian_scan
from .io import SERIES_COLUMNS, RunConfig, emit, ingest_series, load_config, series_rows
from .metrics import DEFAULT_SHIFTS, chaos_mod1_test, make_train, quasi_ap_check
from .orbit import iterate
from .sweep import (
    SWEEP_COLUMNS,
    MuEvaluator,
    bind_param,
    classify_grid,
    find_boundary,
    measure_mu,
    vier_estimate,
    widest_window_bracket,
)

log = logging.getLogger("helixchaos")

DEFAULTS = {
    "x0": 0.5,
    "horizon": 100_000,
    "seed": 0,
    "format": "json",
    "x_lo": 0.0,
    "x_hi": 2.0,
    "samples": 10_000,
    "lambda_threshold": 0.1,
    "frac_tol": 1e-3,
    "burn_in": 1_000,
    "pairs": 20,
    "param": "beta",
    "iter_max": 60,
    "boundary_tol": 1e-9,
    "min_steady_points": 10,
    "horizon_max": 100_000_000,
    "side": "left",
    "p0": 50.0,
    "levels": 4,
    "start_distance": 1e-2,
    "mu_rel_tol": 0.05,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_map_args(p):
    g = p.add_argument_group("map")
    g.add_argument("--family", choices=BUILTIN_NAMES, help="built-in family")
    g.add_argument("--expr", help="custom map expression in x, alpha, beta")
    g.add_argument("--lift-period", type=int, help="L with F(x+L) = F(x)+L for --expr")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--x0", type=float, help="initial value (default 0.5)")


def _add_detect_args(p):
    g = p.add_argument_group("detector")
    g.add_argument("--horizon", type=int, help="number of terms (default 1e5)")
    g.add_argument("--transient", type=int)
    g.add_argument("--confirm-cycles", type=int)
    g.add_argument("--tol", type=float)
    g.add_argument("--p-max", type=int)
    g.add_argument("--min-segment-length", type=int)
    g.add_argument("--slack", type=float)


def _add_param_args(p, with_range=False):
    p.add_argument("--param", choices=("alpha", "beta"), help="swept parameter (default beta)")
    if with_range:
        p.add_argument("--lo", type=float)
        p.add_argument("--hi", type=float)
        p.add_argument("--steps", type=int)
        p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="helixchaos", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value file, or a JSON report to replay")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("iterate", parents=[common], help="print the orbit")
    _add_map_args(p)
    p.add_argument("--horizon", type=int, help="number of terms")

    p = sub.add_parser("classify", parents=[common], help="helix / pseudo-helix / chaos verdict")
    _add_map_args(p)
    _add_detect_args(p)

    p = sub.add_parser("steady-points", parents=[common], help="steady orders of an orbit or table")
    _add_map_args(p)
    _add_detect_args(p)
    p.add_argument("--ingest", help="read the series from an (index, value) table")
    p.add_argument("--period", type=int, help="pseudo-helix order (default: inferred)")

    p = sub.add_parser("quasi-ap", parents=[common], help="quasi arithmetic progression test")
    p.add_argument("--orders", help="comma-separated steady orders")

    p = sub.add_parser("schwarzian", parents=[common], help="scan the Schwarzian derivative")
    _add_map_args(p)
    p.add_argument("--x-lo", type=float)
    p.add_argument("--x-hi", type=float)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("chaos-test", parents=[common], help="chaos modulo 1 estimator")
    _add_map_args(p)
    p.add_argument("--horizon", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--pairs", type=int)
    p.add_argument("--shifts", help="comma-separated shifts in (-1, 1)")
    p.add_argument("--lambda", dest="lambda_threshold", type=float)
    p.add_argument("--frac-tol", type=float)

    p = sub.add_parser("sweep", parents=[common], help="classify a parameter grid")
    _add_map_args(p)
    _add_detect_args(p)
    _add_param_args(p, with_range=True)
    p.add_argument("--min-steady-points", type=int)

    p = sub.add_parser("boundary", parents=[common], help="bisect an order/chaos boundary")
    _add_map_args(p)
    _add_detect_args(p)
    _add_param_args(p)
    p.add_argument("--bracket", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--iter-max", type=int)
    p.add_argument("--boundary-tol", type=float)

    p = sub.add_parser("mu", parents=[common], help="average steady-point periodicity")
    _add_map_args(p)
    _add_detect_args(p)
    _add_param_args(p)
    p.add_argument("--value", type=float, help="parameter value (default: --alpha/--beta)")
    p.add_argument("--min-steady-points", type=int)
    p.add_argument("--horizon-max", type=int)

    p = sub.add_parser("vier", parents=[common], help="estimate the Vier ratios near a boundary")
    _add_map_args(p)
    _add_detect_args(p)
    _add_param_args(p, with_range=True)
    p.add_argument("--side", choices=("left", "right"), help="chaotic side of the boundary")
    p.add_argument("--p0", type=float)
    p.add_argument("--levels", type=int)
    p.add_argument("--boundary", type=float, help="known boundary (skips the search)")
    p.add_argument("--bracket", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--start-distance", type=float)
    p.add_argument("--mu-rel-tol", type=float)
    p.add_argument("--min-steady-points", type=int)
    p.add_argument("--horizon-max", type=int)
    p.add_argument("--iter-max", type=int)
    p.add_argument("--boundary-tol", type=float)

    p = sub.add_parser("ingest", parents=[common], help="read and re-emit a series table")
    p.add_argument("ingest", metavar="PATH")
    return ap


# ---------------------------------------------------------------- config merge

def merged_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    bracket = getattr(args, "bracket", None)
    if bracket:
        args.bracket_lo, args.bracket_hi = bracket
    for key in RunConfig.keys():
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, key, v)
    for key, v in DEFAULTS.items():
        if getattr(cfg, key) is None:
            setattr(cfg, key, v)
    if cfg.family and cfg.expr:
        raise UsageError("give either --family or --expr, not both")
    return cfg


def _family(cfg):
    if cfg.expr:
        return custom(cfg.expr, lift_period=cfg.lift_period)
    if cfg.family:
        return builtin(cfg.family)
    raise UsageError("a map is required: --family NAME or --expr TEXT")


def _map(cfg):
    return bind(_family(cfg), alpha=cfg.alpha, beta=cfg.beta)


def _classify_opts(cfg, **over) -> ClassifyOptions:
    kw = {}
    for key in ("transient", "confirm_cycles", "tol", "p_max", "horizon",
                "min_segment_length", "slack"):
        v = getattr(cfg, key)
        if v is not None:
            kw[key] = v
    kw.update(over)
    return ClassifyOptions(**kw)


def _other(cfg):
    """Value of the parameter that is not being varied."""
    return cfg.alpha if cfg.param == "beta" else cfg.beta


def _floats(text, what):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad {what} list {text!r}") from None


# ---------------------------------------------------------------- commands

def cmd_iterate(cfg):
    s = iterate(_map(cfg), cfg.x0, cfg.horizon)
    if cfg.format == "csv":
        return list(series_rows(s)), SERIES_COLUMNS
    return {"terms": list(series_rows(s))}, None


def cmd_classify(cfg):
    return classify(_map(cfg), cfg.x0, _classify_opts(cfg)).to_dict(), None


def cmd_steady_points(cfg):
    opts = _classify_opts(cfg)
    result = {}
    if cfg.ingest:
        ing = ingest_series(cfg.ingest)
        series = ing.series
        result["provenance"] = ing.provenance
        transient = 0
    else:
        series = iterate(_map(cfg), cfg.x0, cfg.horizon)
        transient = min(opts.transient, len(series) - 1)
    p = cfg.period
    if p is None:
        p = recurrent_period(series.tail(transient), opts.p_max, opts.recurrence_tol,
                             opts.recurrence_fraction)
        if p is None:
            raise NotInRegimeError("no recurrent pseudo-helix order found; pass --period")
    segs = segment_pseudo_helices(series, p, opts.min_segment_length, opts.slack)
    train = make_train([s.steady_orders[0] for s in segs if s.n0 > transient])
    result.update({"period": p, "train": train.to_dict(),
                   "segments": [s.to_dict() for s in segs if s.n0 > transient]})
    if cfg.format == "csv":
        return [{"order": o} for o in train.orders], ("order",)
    return result, None


def cmd_quasi_ap(cfg):
    if not cfg.orders:
        raise UsageError("--orders is required")
    orders = [int(v) for v in _floats(cfg.orders, "orders")]
    return quasi_ap_check(orders).to_dict(), None


def cmd_schwarzian(cfg):
    rep = schwarzian_scan(_map(cfg), cfg.x_lo, cfg.x_hi, cfg.samples)
    if cfg.format == "csv":
        return [{"x": x, "schwarzian": v} for x, v in zip(rep.grid, rep.values)], ("x", "schwarzian")
    return rep.to_dict(), None


def cmd_chaos_test(cfg):
    shifts = _floats(cfg.shifts, "shifts") if cfg.shifts else DEFAULT_SHIFTS
    rep = chaos_mod1_test(_map(cfg), cfg.pairs, cfg.horizon, cfg.burn_in, shifts,
                          cfg.lambda_threshold, cfg.frac_tol, cfg.seed)
    return rep.to_dict(), None


def _grid(cfg, lo, hi, steps):
    fam = _family(cfg)
    return classify_grid(fam, cfg.param, lo, hi, steps, _other(cfg), cfg.x0,
                         _classify_opts(cfg), cfg.min_steady_points, cfg.workers)


def cmd_sweep(cfg):
    if cfg.lo is None or cfg.hi is None:
        raise UsageError("--lo and --hi are required")
    recs = _grid(cfg, cfg.lo, cfg.hi, cfg.steps or 11)
    if cfg.format == "csv":
        return [r.to_dict() for r in recs], SWEEP_COLUMNS
    return {"records": [r.to_dict() for r in recs]}, None


def cmd_boundary(cfg):
    if cfg.bracket_lo is None or cfg.bracket_hi is None:
        raise UsageError("--bracket LO HI is required")
    res = find_boundary(_family(cfg), cfg.param, cfg.bracket_lo, cfg.bracket_hi,
                        _other(cfg), cfg.x0, _classify_opts(cfg), cfg.iter_max,
                        cfg.boundary_tol)
    return res.to_dict(), None


def cmd_mu(cfg):
    value = cfg.value if cfg.value is not None else getattr(cfg, cfg.param)
    if value is None:
        raise UsageError(f"--value or --{cfg.param} is required")
    fmap = bind_param(_family(cfg), cfg.param, value, _other(cfg))
    opts = _classify_opts(cfg)
    if cfg.transient is None:
        opts = ClassifyOptions(**{**opts.to_dict(), "transient": 1000})
    h = cfg.horizon
    while True:
        try:
            m = measure_mu(fmap, cfg.x0, h, cfg.min_steady_points, opts)
            break
        except InsufficientDataError:
            if h >= cfg.horizon_max:
                raise
            h = min(2 * h, cfg.horizon_max)
    return {"param": cfg.param, "value": value, "mu": m.to_dict()}, None


def cmd_vier(cfg):
    fam = _family(cfg)
    other = _other(cfg)
    copts = _classify_opts(cfg)
    search = {}
    boundary = cfg.boundary
    if boundary is None:
        if cfg.bracket_lo is not None and cfg.bracket_hi is not None:
            lo, hi = cfg.bracket_lo, cfg.bracket_hi
        else:
            # scan the whole parameter period and bracket the edge of the widest helix window
            lo = cfg.lo if cfg.lo is not None else 0.0
            hi = cfg.hi if cfg.hi is not None else lo + float(fam.lift_period or 2)
            steps = cfg.steps or 201
            recs = _grid(cfg, lo, hi, steps)
            lo, hi, order = widest_window_bracket(recs, cfg.side)
            search["scan"] = {"lo": recs[0].param_value, "hi": recs[-1].param_value,
                              "steps": len(recs), "helix_order": order}
        res = find_boundary(fam, cfg.param, lo, hi, other, cfg.x0, copts, cfg.iter_max,
                            cfg.boundary_tol)
        search["bisection"] = res.to_dict()
        boundary = res.value
    mu_opts = copts if cfg.transient is not None else ClassifyOptions(
        **{**copts.to_dict(), "transient": 1000})
    ev = MuEvaluator(fam, cfg.param, other, boundary, cfg.side, horizon=cfg.horizon,
                     horizon_max=cfg.horizon_max, min_steady_points=cfg.min_steady_points,
                     opts=mu_opts)
    est = vier_estimate(fam, cfg.param, boundary, cfg.side, cfg.p0, cfg.levels, other,
                        cfg.start_distance, cfg.mu_rel_tol, evaluator=ev)
    if cfg.format == "csv":
        rows = [{"level": n, "target": t, "b": b, "mu": m, "residual": r}
                for n, (t, b, m, r) in enumerate(zip(est.targets, est.b, est.mu, est.residuals))]
        return rows, ("level", "target", "b", "mu", "residual")
    out = est.to_dict()
    out["boundary_search"] = search
    if est.failed_level is not None:
        out["status"] = "partial"
    return out, None


def cmd_ingest(cfg):
    ing = ingest_series(cfg.ingest)
    if cfg.format == "csv":
        return list(series_rows(ing.series)), SERIES_COLUMNS
    return {"provenance": ing.provenance, "terms": list(series_rows(ing.series))}, None


COMMANDS = {
    "iterate": cmd_iterate,
    "classify": cmd_classify,
    "steady-points": cmd_steady_points,
    "quasi-ap": cmd_quasi_ap,
    "schwarzian": cmd_schwarzian,
    "chaos-test": cmd_chaos_test,
    "sweep": cmd_sweep,
    "boundary": cmd_boundary,
    "mu": cmd_mu,
    "vier": cmd_vier,
    "ingest": cmd_ingest,
}


def run(argv=None):
    """Parse, execute and render.  Returns (text, path) where path is the
    output file or None for stdout; raises on error."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = merged_config(args)
    result, columns = COMMANDS[args.command](cfg)
    path = cfg.out if cfg.out not in (None, "-") else None
    if cfg.format == "csv":
        if columns is None:
            raise UsageError(f"{args.command} has no csv form; use --format json")
        return emit(result, "csv", path, columns), path
    report = {"command": args.command, "config": cfg.to_dict(), "result": result}
    return emit(report, "json", path), path


def main(argv: Optional[list] = None) -> int:
    try:
        text, path = run(argv)
    except SystemExit as exc:  # argparse: --help, --version or a bad flag
        return exc.code if isinstance(exc.code, int) else 1
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except HelixChaosError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    if path is None:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
