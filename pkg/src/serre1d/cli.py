"""Command-line front end over the scenario registry.

Subcommands: run a named scenario, drive the mesh-refinement study, batch
the two amplitude tables, period-fold a gauge file, list scenarios.  All
output is CSV under an output root taken from --out or $SERRE_OUT_DIR;
identical invocations produce byte-identical files.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""

import argparse
import configparser
import os
import sys
from dataclasses import replace

from . import fem1d, harness, kernels
from .fem1d import SimulationError
from .physics import ModelVariant

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class UsageError(Exception):
    """Bad arguments or configuration; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad arguments; route through UsageError instead
    # so that code 2 stays reserved for numerical failures.
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Config files: INI sections mirroring the scenario dataclasses, scalar
# overrides only.

_SCENARIO_KEYS = {
    "n_elements": int,
    "variant": str,
    "g": float,
    "lambda_bar": float,
    "h_ref": float,
    "still_surface": float,
}
_TIME_KEYS = {
    "cfl": float,
    "t_final": float,
    "fields_dt": float,
    "gauge_dt": float,
    "steady_tol": float,
    "steady_window": float,
}


def _parse_variant(text):
    table = {"full": ModelVariant.FULL, "incomplete": ModelVariant.INCOMPLETE}
    try:
        return table[text]
    except KeyError:
        raise UsageError(
            f"invalid value for 'scenario.variant': {text!r}"
            " (expected 'full' or 'incomplete')")


def load_config_overrides(path):
    """Read an override file into (scenario dict, time dict)."""
    cp = configparser.ConfigParser()
    try:
        loaded = cp.read(path)
    except configparser.Error as exc:
        raise UsageError(f"cannot parse config file {path!r}: {exc}")
    if not loaded:
        raise UsageError(f"cannot read config file {path!r}")
    scenario, time = {}, {}
    for section in cp.sections():
        if section == "scenario":
            table, out = _SCENARIO_KEYS, scenario
        elif section == "time":
            table, out = _TIME_KEYS, time
        else:
            raise UsageError(f"unknown config section {section!r}")
        for key, raw in cp.items(section):
            if key not in table:
                raise UsageError(f"unknown config key '{section}.{key}'")
            try:
                out[key] = table[key](raw)
            except ValueError:
                raise UsageError(
                    f"invalid value for '{section}.{key}': {raw!r}")
    if "variant" in scenario:
        scenario["variant"] = _parse_variant(scenario["variant"])
    return scenario, time


def _get_scenario(name):
    try:
        return harness.get_scenario(name)
    except ValueError as exc:
        raise UsageError(str(exc))


def _out_root(args):
    root = args.out or os.environ.get("SERRE_OUT_DIR") or "."
    os.makedirs(root, exist_ok=True)
    return root


def _parse_int_list(text, what):
    try:
        values = [int(part) for part in text.split(",") if part]
    except ValueError:
        raise UsageError(f"invalid {what} list: {text!r}")
    if not values:
        raise UsageError(f"empty {what} list: {text!r}")
    return values


def _summary_line(record):
    cfg = record.config
    mass, energy, _, _ = kernels.diagnostics_reduction(
        record.final_state, record.z, record.dzdx, record.mesh.m,
        record.mesh.eps, cfg.g, cfg.lambda_bar, cfg.h_ref)
    return (f"{cfg.name}: {record.steps} steps, t_end={record.t_end:.6g}, "
            f"mass={mass:.12e}, energy={energy:.12e}")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_run(args):
    config = _get_scenario(args.scenario)
    if args.config:
        scenario_over, time_over = load_config_overrides(args.config)
        if time_over:
            config = replace(config, time=replace(config.time, **time_over))
        if scenario_over:
            config = replace(config, **scenario_over)
    config = harness.apply_overrides(
        config,
        n_elements=args.n_elements,
        cfl=args.cfl,
        t_final=args.t_final,
        variant=_parse_variant(args.variant) if args.variant else None,
    )
    record = fem1d.run(config, per_step_diagnostics=args.per_step_diagnostics)
    out_dir = os.path.join(_out_root(args), config.name)
    record.write_csv(out_dir)
    print(_summary_line(record))
    return EXIT_OK


def cmd_convergence(args):
    base = _get_scenario(args.scenario)
    if not args.counts:
        counts = [100, 200, 400, 800, 1600]
    else:
        counts = _parse_int_list(args.counts, "element count")
    rows = harness.convergence_study(base, counts)
    path = os.path.join(_out_root(args), "table1.csv")
    harness.write_table1(path, rows)
    print(f"{base.name}: {len(rows)} meshes -> {path}")
    return EXIT_OK


def cmd_table2(args):
    rows = (_parse_int_list(args.rows, "experiment")
            if args.rows else sorted(harness.TRIANGLE_EXPERIMENTS))
    for exp in rows:
        if exp not in harness.TRIANGLE_EXPERIMENTS:
            known = ", ".join(str(k) for k in sorted(harness.TRIANGLE_EXPERIMENTS))
            raise UsageError(f"unknown experiment {exp}; available: {known}")
    results = harness.run_table2(rows, n_elements=args.n_elements,
                                 jobs=args.jobs)
    path = os.path.join(_out_root(args), "table2.csv")
    harness.write_table2(path, results)
    print(f"table2: {len(results)} rows -> {path}")
    return EXIT_OK


def cmd_table3(args):
    rows = (_parse_int_list(args.rows, "experiment")
            if args.rows else sorted(harness.STEP_EXPERIMENTS))
    for exp in rows:
        if exp not in harness.STEP_EXPERIMENTS:
            known = ", ".join(str(k) for k in sorted(harness.STEP_EXPERIMENTS))
            raise UsageError(f"unknown experiment {exp}; available: {known}")
    results = harness.run_table3(rows, n_elements=args.n_elements,
                                 jobs=args.jobs)
    path = os.path.join(_out_root(args), "table3.csv")
    harness.write_table3(path, results)
    print(f"table3: {len(results)} rows -> {path}")
    return EXIT_OK


def cmd_fold(args):
    if args.period <= 0.0:
        raise UsageError(f"period must be positive, got {args.period}")
    if not os.path.exists(args.gauges_csv):
        raise UsageError(f"no such gauge file: {args.gauges_csv!r}")
    out_dir = _out_root(args)
    try:
        paths = harness.fold_gauge_file(args.gauges_csv, args.t0,
                                        args.period, out_dir)
    except ValueError as exc:
        raise UsageError(str(exc))
    print(f"fold: {len(paths)} gauges -> {out_dir}")
    return EXIT_OK


def cmd_list(args):
    for name in sorted(harness.scenario_registry()):
        print(name)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="serre1d",
                     description="dispersive shallow-water scenario runner")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_out(p):
        p.add_argument("--out", default=None,
                       help="output root (default: $SERRE_OUT_DIR or .)")

    p = sub.add_parser("run", help="run one named scenario")
    p.add_argument("scenario")
    p.add_argument("--config", default=None,
                   help="INI override file ([scenario]/[time] sections)")
    p.add_argument("--n-elements", type=int, default=None)
    p.add_argument("--cfl", type=float, default=None)
    p.add_argument("--t-final", type=float, default=None)
    p.add_argument("--variant", choices=("full", "incomplete"), default=None)
    p.add_argument("--per-step-diagnostics", action="store_true")
    add_out(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("convergence", help="mesh refinement study")
    p.add_argument("--scenario", default="steady")
    p.add_argument("--counts", default=None,
                   help="comma-separated element counts")
    add_out(p)
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("table2", help="reflected-amplitude batch")
    p.add_argument("--rows", default=None, help="comma-separated experiments")
    p.add_argument("--n-elements", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    add_out(p)
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("table3", help="transmitted-amplitude batch")
    p.add_argument("--rows", default=None, help="comma-separated experiments")
    p.add_argument("--n-elements", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    add_out(p)
    p.set_defaults(func=cmd_table3)

    p = sub.add_parser("fold", help="period-fold a gauges.csv")
    p.add_argument("gauges_csv")
    p.add_argument("--t0", type=float, required=True)
    p.add_argument("--period", type=float, required=True)
    add_out(p)
    p.set_defaults(func=cmd_fold)

    p = sub.add_parser("list", help="list scenario names")
    p.set_defaults(func=cmd_list)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SimulationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
