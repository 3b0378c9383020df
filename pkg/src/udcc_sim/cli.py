"""Command-line entry point: ``udcc-sim run`` and ``udcc-sim experiment``."""

import argparse
import sys

from .config import ConfigError, expand, parse_config, parse_time, sweep_axes
from .experiments import PRESETS, SweepError, run_points, run_preset, write_results
from .system import report_json, simulate


def _cmd_run(args):
    cfg = parse_config(args.config, args.overrides)
    if args.timeseries and cfg["stats.timeseries_interval"] is None:
        cfg["stats.timeseries_interval"] = parse_time("1us")
    if not sweep_axes(cfg):
        report = simulate(cfg, timeseries=args.timeseries)
        if args.out:
            write_results([({}, report.to_dict())], args.out)
        else:
            print(report_json(report))
        return 0
    if args.timeseries:
        raise ConfigError("--timeseries needs a single run, not a sweep")
    results = run_points(list(expand(cfg)), args.jobs)
    if args.out:
        write_results(results, args.out)
        print("%d runs written to %s" % (len(results), args.out))
    else:
        for coords, report in results:
            print("%s llc_bandwidth=%.3f GB/s" % (coords, report["llc_bandwidth"]))
    return 0


def _cmd_experiment(args):
    base = parse_config(args.config, args.overrides) if (args.config or args.overrides) else None
    duration = parse_time(args.duration) if args.duration else None
    results = run_preset(args.preset, args.out, duration, args.jobs, base)
    print("%s: %d runs written to %s" % (args.preset, len(results), args.out))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="udcc-sim", description="Unified DRAM-cache / NVM controller simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one configuration (or a sweep)")
    run.add_argument("--config", help="flat key = value config file")
    run.add_argument("overrides", nargs="*", metavar="key=value",
                     help="config overrides; comma lists sweep")
    run.add_argument("--out", help="directory for JSON reports and summary.csv")
    run.add_argument("--timeseries", help="write a per-interval CSV time series here")
    run.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
    run.set_defaults(func=_cmd_run)

    exp = sub.add_parser("experiment", help="run a bundled case-study sweep")
    exp.add_argument("preset", choices=PRESETS)
    exp.add_argument("--out", required=True)
    exp.add_argument("--duration", help="measured time per point, e.g. 200us (default 1ms)")
    exp.add_argument("--config", help="base config applied under the preset")
    exp.add_argument("overrides", nargs="*", metavar="key=value")
    exp.add_argument("--jobs", type=int, default=1)
    exp.set_defaults(func=_cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    # overrides may follow options (``run --out d orb_size=8``), which a
    # plain nargs="*" positional does not pick up
    stray = [a for a in extra if a.startswith("-") or "=" not in a]
    if stray:
        parser.error("unrecognized arguments: %s" % " ".join(stray))
    args.overrides = list(args.overrides) + extra
    try:
        return args.func(args)
    except (ConfigError, SweepError, OSError, ValueError) as exc:
        print("udcc-sim: error: %s" % exc, file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print("udcc-sim: simulation error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
