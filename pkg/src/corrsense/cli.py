"""Command-line front end: ``corrsense <subcommand> --config FILE [--out CSV]``.

Each subcommand sweeps one configured quantity and writes a CSV table plus a
``.meta.json`` sidecar. The sidecar holds the canonical config text, so
passing it back through ``--config`` reproduces the table.
"""

import argparse
import json
import logging
import math
import platform
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from . import analysis as an
from . import mc_engine as mc
from .analytic_stats import var_ns_at
from .config import apply_value, emit_config, parse_config, parse_text
from .errors import ConfigError
from .results import SweepResult, meta_path
from .signal_model import effective_theta
from .snr_analytics import corr_signal_expectation, sync_signal_expectation

log = logging.getLogger("corrsense")

COMMANDS = ("variance-sweep", "snr-sweep", "linewidth", "resolution", "harmonics", "mc-run")


def _colname(variable):
    return "B" if variable == "field.amplitude" else variable.split(".", 1)[1]


def _theta(cfg):
    return effective_theta(cfg.sequence, cfg.field, cfg.constants, cfg.theta_convention)


def _points(cfg):
    for v in cfg.sweep.values():
        yield v, apply_value(cfg, cfg.sweep.variable, v)


def _require_sweep(cfg, variable, command):
    if cfg.sweep.variable != variable:
        raise ConfigError([f"{command} sweeps {variable}, config sweeps {cfg.sweep.variable}"])


def cmd_variance_sweep(cfg):
    name = _colname(cfg.sweep.variable)
    n_values = cfg.analysis.n_s_values or (cfg.schedule.n_s,)
    cols = {name: [], "n_s": [], "theta": [], "var_analytic": [], "sigma_analytic": []}
    if cfg.analysis.mc:
        cols.update(expected_counts=[], mc_mean=[], mc_std=[])
    for n in n_values:
        for v, c in _points(cfg):
            c = replace(c, schedule=replace(c.schedule, n_s=n))
            th = _theta(c)
            var = float(var_ns_at(th, n, c.field.omega * c.schedule.t_d))
            cols[name].append(v)
            cols["n_s"].append(n)
            cols["theta"].append(th)
            cols["var_analytic"].append(var)
            cols["sigma_analytic"].append(math.sqrt(max(var, 0.0)))
            if cfg.analysis.mc:
                grid = mc.build_lambda_grid(c.schedule, c.sequence, c.field, c.detection,
                                            c.constants, c.theta_convention)
                vals = mc.simulate_trials(grid, c.run, [mc.Estimator.VARIANCE], c.schedule.mode,
                                          tag="variance-sweep")[:, 0]
                cols["expected_counts"].append(corr_signal_expectation(grid))
                cols["mc_mean"].append(vals.mean())
                cols["mc_std"].append(vals.std(ddof=1) if vals.size > 1 else math.nan)
    return cols, {}


def cmd_snr_sweep(cfg):
    name = _colname(cfg.sweep.variable)
    cols = {name: []}
    for v, c in _points(cfg):
        row = an.snr_point(c.schedule, c.sequence, c.field, c.detection, c.constants, c.run,
                           cfg.analysis.nu, c.theta_convention)
        cols[name].append(v)
        for k, x in row.items():
            cols.setdefault(k, []).append(x)
    return cols, {}


def cmd_linewidth(cfg):
    _require_sweep(cfg, "field.amplitude", "linewidth")
    b = cfg.sweep.values()
    res = an.linewidth_vs_field(cfg.schedule.n_s, cfg.field.omega, cfg.sequence, b,
                                cfg.constants, cfg.schedule.t_d, cfg.analysis.use_sqrt,
                                cfg.theta_convention)
    cols = {"B": b, "theta": res.extra["theta"], "fwhm": res.y, "flag_unresolved": ~res.resolved}
    return cols, {"fit": _fit_meta(res.fit)}


def cmd_resolution(cfg):
    _require_sweep(cfg, "schedule.t_d", "resolution")
    n_values = cfg.analysis.n_s_values or (cfg.schedule.n_s,)
    res = an.resolution_vs_time(_theta(cfg), n_values, cfg.sweep.values(), cfg.field.omega,
                                cfg.analysis.use_sqrt)
    cols = {"n_s": res.extra["n_s"], "t_d": res.extra["t_d"], "total_time": res.x,
            "delta_omega": res.y, "flag_unresolved": ~res.resolved}
    return cols, {"fit": _fit_meta(res.fit)}


def cmd_harmonics(cfg):
    name = _colname(cfg.sweep.variable)
    n_max = cfg.analysis.n_max
    cols = {name: [], "theta": []}
    cols.update({f"h{n}": [] for n in range(0, n_max + 1, 2)})
    cols["snr_sync_h1_analytic"] = []
    for v, c in _points(cfg):
        th = _theta(c)
        h = an.harmonic_amplitudes(th, n_max)
        cols[name].append(v)
        cols["theta"].append(th)
        for n in range(0, n_max + 1, 2):
            cols[f"h{n}"].append(h[n])
        cols["snr_sync_h1_analytic"].append(
            mc.analytic_sync_snr(c.schedule, c.sequence, c.field, c.detection, c.constants,
                                 cfg.analysis.nu, c.theta_convention))
    dips = an.harmonic_dip_fields(cfg.field.omega, cfg.sequence, cfg.constants, 5,
                                  cfg.theta_convention)
    return cols, {"first_harmonic_zero_fields_T": dips}


def cmd_mc_run(cfg):
    name = _colname(cfg.sweep.variable)
    est = mc.Estimator(cfg.analysis.estimator)
    cols = {name: [], "mean": [], "std": [], "snr": [], "analytic_mean": [], "analytic_snr": []}
    for v, c in _points(cfg):
        grid = mc.build_lambda_grid(c.schedule, c.sequence, c.field, c.detection, c.constants,
                                    c.theta_convention)
        nu = cfg.analysis.nu
        if nu is None and not est.is_correlation:
            nu = mc.first_harmonic_bin(c.schedule, c.field.omega)
        vals = mc.simulate_trials(grid, c.run, [est], c.schedule.mode, nu, tag="mc-run")[:, 0]
        base = 0.0
        amean = asnr = math.nan
        if est is mc.Estimator.VARIANCE:
            base = mc.correlation_baseline(c.schedule, c.sequence, c.field, c.detection,
                                           c.constants, c.theta_convention)
            amean = corr_signal_expectation(grid)
            asnr = mc.analytic_correlation_snr(c.schedule, c.sequence, c.field, c.detection,
                                               c.constants, True, c.theta_convention)
        elif est is mc.Estimator.PERIODOGRAM:
            flat = mc.flatten_acquisition(grid.values, c.schedule.mode)
            amean = sync_signal_expectation(flat, nu)
            asnr = mc.analytic_sync_snr(c.schedule, c.sequence, c.field, c.detection, c.constants,
                                        nu, c.theta_convention)
        mean = float(vals.mean())
        std = float(vals.std(ddof=1)) if vals.size > 1 else math.nan
        cols[name].append(v)
        cols["mean"].append(mean)
        cols["std"].append(std)
        cols["snr"].append((mean - base) / std if std > 0 else math.nan)
        cols["analytic_mean"].append(amean)
        cols["analytic_snr"].append(asnr)
    return cols, {"estimator": est.value}


HANDLERS = {"variance-sweep": cmd_variance_sweep, "snr-sweep": cmd_snr_sweep,
            "linewidth": cmd_linewidth, "resolution": cmd_resolution,
            "harmonics": cmd_harmonics, "mc-run": cmd_mc_run}


def _fit_meta(fit):
    if fit is None:
        return None
    return {"slope": fit.slope, "intercept": fit.intercept, "slope_stderr": fit.slope_stderr}


def load_config(path, overrides=()):
    """Config file, or a sidecar .meta.json whose stored config text is reused."""
    if str(path).endswith(".json"):
        try:
            with open(path, encoding="utf-8") as fh:
                meta = json.load(fh)
            text = meta["config_text"]
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError([f"{path}: not a usable metadata sidecar ({exc})"]) from None
        return parse_text(text, overrides, str(path)), meta.get("command")
    return parse_config(path, overrides), None


def build_parser():
    p = argparse.ArgumentParser(prog="corrsense",
                                description="Correlation vs synchronized readout studies.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="config file or .meta.json sidecar")
        s.add_argument("--out", help="output CSV path (default: <command>.csv)")
        s.add_argument("--seed", type=int, help="override run.seed")
        s.add_argument("--trials", type=int, help="override run.trials")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key, e.g. --set field.amplitude='8 uT'")
        s.add_argument("--quiet", action="store_true")
    return p


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.trials is not None:
        overrides.append(f"run.trials={args.trials}")
    try:
        cfg, meta_cmd = load_config(args.config, overrides)
        if meta_cmd is not None and meta_cmd != args.command:
            raise ConfigError([f"{args.config} was written by {meta_cmd!r}, not {args.command!r}"])
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for d in cfg.defaults_applied:
        log.info("default %s", d)

    out = args.out or f"{args.command}.csv"
    t0 = time.perf_counter()
    try:
        cols, extra = HANDLERS[args.command](cfg)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as exc:  # any numerical failure is a runtime error
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    wall = time.perf_counter() - t0

    result = SweepResult({k: list(v) for k, v in cols.items()})
    flagged = int(np.sum(result.column("flag_unresolved"))) if "flag_unresolved" in cols else 0
    result.metadata = {
        "command": args.command,
        "config_text": emit_config(cfg),
        "seed": cfg.run.master_seed,
        "trials": cfg.run.trials,
        "gamma_e": cfg.constants.gamma_e,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "wall_time_s": wall,
        "columns": list(cols),
        "defaults_applied": list(cfg.defaults_applied),
        "flagged_rows": flagged,
        **extra,
    }
    try:
        result.write_csv(out)
        result.write_meta(meta_path(out))
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 1
    if flagged:
        log.warning("%d row(s) flagged as unresolved", flagged)
    log.info("wrote %s (%d rows) in %.2f s", out, len(result), wall)
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
