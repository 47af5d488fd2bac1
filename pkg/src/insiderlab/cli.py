"""Scenario-driven command line front end.

Every subcommand reads one JSON config, writes CSV/JSON artifacts into
``--out`` and a manifest tying them to the config hash, seed and grid.

Exit codes: 0 ok, 2 a check failed, 64 malformed config or usage,
70 numeric failure, 74 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import metrics_report
from .config import build_grid, build_params, build_rule, build_strategies, build_weighting, load_config
from .dynamics import StrategySpec, TimeGrid, ensemble_stats, simulate_ensemble
from .errors import ConfigError, ConstructionError, InsiderLabError, NumericError, SingularityError
from .filtering import gamma_ode_solve, innovations_whiteness, kalman_filter
from .io import read_csv, write_csv, write_json, write_manifest
from .model import check_assumptions, check_nonmarkovian_conditions
from .pricing import pde_residual, price
from .value import ValueFunction, profit_upper_bound, value_V, value_V_nonmarkov

EXIT_OK = 0
EXIT_CHECK = 2
EXIT_CONFIG = 64
EXIT_NUMERIC = 70
EXIT_IO = 74

COMMANDS = ("check", "price", "simulate", "mc", "filter", "value", "analyze", "report")

PRICE_Y = np.linspace(-3.0, 3.0, 25)
PRICE_T = (0.0, 0.25, 0.5, 0.75, 0.9, 0.99, 1.0)
VALUE_Y = np.linspace(-2.0, 2.0, 9)
VALUE_Z = np.linspace(-2.0, 2.0, 9)
VALUE_T = (0.0, 0.25, 0.5, 0.75, 0.9)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser():
    p = _Parser(prog="insiderlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"insiderlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="scenario config (JSON)")
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("--seed", type=int, help="override run.base_seed")
        s.add_argument("--grid-size", type=int, help="override grid.size")
        s.add_argument("--force", action="store_true", help="run even when checks fail")
        if name == "filter":
            s.add_argument("--input", help="path CSV with columns path, t, Y (default: simulate)")
    return p


class Context:
    """A loaded config with its overrides applied and the objects it builds."""

    def __init__(self, args):
        cfg = load_config(args.config)
        run, grid = {}, {}
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must lie in [0, 2^64)", field="seed")
            run["base_seed"] = args.seed
        if args.grid_size is not None:
            if args.grid_size < 2:
                raise ConfigError("--grid-size must be at least 2", field="grid-size")
            grid["size"] = args.grid_size
        self.cfg = cfg.model_copy(update={"run": cfg.run.model_copy(update=run),
                                          "grid": cfg.grid.model_copy(update=grid)})
        self.out = Path(args.out)
        self.force = args.force
        self.params = build_params(self.cfg)
        self.construction_error = None
        try:
            self.weighting = build_weighting(self.cfg, self.params)
        except ConstructionError as err:
            self.weighting = None
            self.construction_error = err

    @property
    def seed(self):
        return self.cfg.run.base_seed

    @property
    def rule(self):
        if self.construction_error is not None:
            raise self.construction_error
        return build_rule(self.cfg, self.params, self.weighting)

    def grid(self, extra=()):
        return build_grid(self.cfg, self.params, self.rule, extra=extra)

    def strategies(self):
        return build_strategies(self.cfg, self.rule)

    def finish(self, command, files, grid=None):
        write_manifest(self.out, command, self.cfg, self.seed, grid, files)


# ---------------------------------------------------------------- check

def check_document(ctx: Context):
    """The applicable verdicts: all assumptions for Markov pricing; payoff
    assumptions plus the weighting conditions for weighted pricing."""
    rep = check_assumptions(ctx.params)
    doc = {"scenario": ctx.cfg.name, "pricing": ctx.cfg.pricing.kind, "assumptions": rep.to_dict()}
    if ctx.cfg.pricing.kind == "markovian":
        failed = rep.failed
    else:
        failed = [k for k in ("assumption_2.1", "assumption_2.2") if rep.verdicts[k] == "fail"]
        if ctx.construction_error is not None:
            err = ctx.construction_error
            doc["construction"] = {"error": str(err), "intervals": list(err.indices)}
            failed.append("construction")
        else:
            cond = check_nonmarkovian_conditions(ctx.params, ctx.weighting)
            doc["conditions"] = cond.to_dict()
            doc["weighting"] = ctx.weighting.to_dict()
            failed += cond.failed
    doc["failed"] = failed
    doc["passed"] = not failed
    return doc


def cmd_check(ctx: Context):
    doc = check_document(ctx)
    path = write_json(ctx.out / "check.json", doc)
    ctx.finish("check", [path])
    if not doc["passed"]:
        print("check failed: " + ", ".join(doc["failed"]), file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def _precheck(ctx: Context):
    doc = check_document(ctx)
    if doc["passed"]:
        return None
    msg = "check failed: " + ", ".join(doc["failed"])
    if ctx.force and ctx.construction_error is None:
        print(msg + " (continuing under --force)", file=sys.stderr)
        return None
    print(msg, file=sys.stderr)
    return EXIT_CHECK


# ---------------------------------------------------------------- run commands

def cmd_price(ctx: Context):
    rule = ctx.rule
    rows = []
    for t in PRICE_T:
        H = np.atleast_1d(price(rule, PRICE_Y, t))
        try:
            res = pde_residual(rule, PRICE_Y, [t]).field[:, 0]
        except InsiderLabError:
            # no admissible stencil at t = 1 or next to a breakpoint
            res = np.full(len(PRICE_Y), np.nan)
        rows += [(y, t, h, r) for y, h, r in zip(PRICE_Y, H, res)]
    path = write_csv(ctx.out / "price.csv", ["y", "t", "H", "residual"], rows)
    ctx.finish("price", [path])
    return EXIT_OK


def cmd_simulate(ctx: Context):
    rule, grid, strats = ctx.rule, ctx.grid(), ctx.strategies()
    ens = simulate_ensemble(ctx.params, rule, strats, grid, ctx.cfg.run.record_paths, ctx.seed,
                            record="all", workers=ctx.cfg.run.workers)
    files = []
    t = grid.nodes[ens.rec_nodes]
    for j, lab in enumerate(ens.labels):
        th, Y, xi, P = (ens.field(k, j) for k in ("theta", "Y", "xi", "P"))
        rows = [(i, t[k], ens.Z[i, k], th[i, k], Y[i, k], xi[i, k], P[i, k])
                for i in range(len(th)) for k in range(len(t))]
        files.append(write_csv(ctx.out / f"simulate_{_slug(lab)}.csv",
                               ["path", "t", "Z", "theta", "Y", "xi", "P"], rows))
    ctx.finish("simulate", files, grid)
    return EXIT_OK


def _slug(label):
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in label)


def _bound(ctx: Context, rule):
    return profit_upper_bound(ValueFunction(rule, ctx.params, ctx.cfg.pricing.nodes))


def cmd_mc(ctx: Context):
    rule, grid, strats = ctx.rule, ctx.grid(), ctx.strategies()
    ens = simulate_ensemble(ctx.params, rule, strats, grid, ctx.cfg.run.n_paths, ctx.seed,
                            workers=ctx.cfg.run.workers)
    stats = ensemble_stats(ens)
    doc = {"scenario": ctx.cfg.name, "bound": _bound(ctx, rule), "grid_size": grid.m,
           "n_paths": ctx.cfg.run.n_paths, "seed": ctx.seed,
           "stats": {k: v.to_dict() for k, v in stats.items()}}
    path = write_json(ctx.out / "mc.json", doc)
    ctx.finish("mc", [path], grid)
    return EXIT_OK


def _read_paths(path):
    header, rows = read_csv(path)
    try:
        ip, it, iy = header.index("path"), header.index("t"), header.index("Y")
    except ValueError:
        raise ConfigError(f"{path}: need columns path, t, Y", field="input") from None
    try:
        data = np.array([[float(r[ip]), float(r[it]), float(r[iy])] for r in rows])
    except (ValueError, IndexError):
        raise ConfigError(f"{path}: malformed numeric row", field="input") from None
    if data.size == 0:
        raise ConfigError(f"{path}: no rows", field="input")
    ids = np.unique(data[:, 0])
    t = data[data[:, 0] == ids[0], 1]
    Y = []
    for i in ids:
        sel = data[data[:, 0] == i]
        if len(sel) != len(t) or np.any(sel[:, 1] != t):
            raise ConfigError(f"{path}: paths must share one time grid", field="input")
        Y.append(sel[:, 2])
    return ids.astype(int), TimeGrid(t, "input"), np.array(Y)


def cmd_filter(ctx: Context, input_path=None):
    rule = ctx.rule
    if input_path:
        ids, grid, Y = _read_paths(input_path)
    else:
        grid = ctx.grid()
        insider = StrategySpec("equilibrium_markov" if rule.is_markov else "equilibrium_nonmarkov",
                               weighting=rule.weighting)
        ens = simulate_ensemble(ctx.params, rule, [insider], grid, ctx.cfg.run.record_paths, ctx.seed,
                                record="all")
        ids, Y = np.arange(ctx.cfg.run.record_paths), ens.field("Y", 0)
    gp = gamma_ode_solve(ctx.params, grid, ctx.weighting)
    res = kalman_filter(ctx.params, Y, grid, ctx.weighting, gamma=gp)
    n = len(res.t)
    rows = []
    for r, i in enumerate(ids):
        for k in range(n):
            e = res.innovations[r, k] if k < n - 1 else np.nan
            rows.append((i, res.t[k], res.m[r, k], res.gamma[k], res.gamma_analytic[k], e))
    csv_path = write_csv(ctx.out / "filter.csv",
                         ["path", "t", "m", "gamma_numeric", "gamma_analytic", "innovation"], rows)
    wr = innovations_whiteness(res.innovations, res.dt, stiffness=res.stiffness)
    doc = {"gamma_max_error": gp.max_error, "max_drift": res.max_drift,
           "whiteness_pass_rate": wr.pass_rate, "paths": [int(i) for i in ids]}
    json_path = write_json(ctx.out / "filter.json", doc)
    ctx.finish("filter", [csv_path, json_path], grid)
    return EXIT_OK


def cmd_value(ctx: Context):
    rule = ctx.rule
    nodes = ctx.cfg.pricing.nodes
    vf = ValueFunction(rule, ctx.params, nodes)
    Yg, Zg = np.meshgrid(VALUE_Y, VALUE_Z, indexing="ij")
    rows = []
    for t in VALUE_T:
        if rule.is_markov:
            V = value_V(vf, Yg, Zg, t)
        else:
            V = value_V_nonmarkov(rule, ctx.params, rule.weighting, Yg, Zg, t, nodes)
        rows += [(y, z, t, v) for y, z, v in zip(Yg.ravel(), Zg.ravel(), np.ravel(V))]
    state = "y" if rule.is_markov else "xi"
    csv_path = write_csv(ctx.out / "value.csv", [state, "z", "t", "V"], rows)
    v0 = value_V(vf, 0.0, 0.0, 0.0) if rule.is_markov else \
        value_V_nonmarkov(rule, ctx.params, rule.weighting, 0.0, 0.0, 0.0, nodes)
    doc = {"scenario": ctx.cfg.name, "bound": profit_upper_bound(vf), "value_at_origin": v0,
           "state_variable": state}
    json_path = write_json(ctx.out / "value.json", doc)
    ctx.finish("value", [csv_path, json_path])
    return EXIT_OK


def _metrics(ctx: Context):
    rule = ctx.rule
    run = ctx.cfg.run
    return metrics_report(ctx.cfg.name, ctx.params, rule, run.n_paths, ctx.cfg.grid.size, ctx.seed,
                          strategies=ctx.strategies(), probe_times=run.probe_times, workers=run.workers)


def cmd_analyze(ctx: Context):
    rep = _metrics(ctx)
    json_path = write_json(ctx.out / "analyze.json", rep.to_dict())
    rows = [(int(c.with_insider), t, e, s) for c in rep.efficiency for t, e, s in zip(c.t, c.mse, c.stderr)]
    csv_path = write_csv(ctx.out / "efficiency.csv", ["with_insider", "t", "mse", "stderr"], rows)
    ctx.finish("analyze", [json_path, csv_path])
    return EXIT_OK


def cmd_report(ctx: Context):
    doc = {"check": check_document(ctx), "metrics": _metrics(ctx).to_dict(), "version": __version__}
    path = write_json(ctx.out / "report.json", doc)
    ctx.finish("report", [path])
    return EXIT_OK


RUNNERS = {"price": cmd_price, "simulate": cmd_simulate, "mc": cmd_mc, "value": cmd_value,
           "analyze": cmd_analyze, "report": cmd_report}


def _dispatch(args):
    ctx = Context(args)
    ctx.out.mkdir(parents=True, exist_ok=True)
    if args.command == "check":
        return cmd_check(ctx)
    code = _precheck(ctx)
    if code is not None:
        return code
    if args.command == "filter":
        return cmd_filter(ctx, args.input)
    return RUNNERS[args.command](ctx)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _dispatch(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularityError as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except NumericError as err:
        where = f" (path {err.index})" if err.index is not None else ""
        print(f"numeric error: {err}{where}", file=sys.stderr)
        return EXIT_NUMERIC
    except InsiderLabError as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
