"""Command-line entry point.

    relaxctl <subcommand> [--config FILE] [--n N] [--dmin D] [--out DIR] [--set key=value ...]

Exit status is 0 on success, 2 on configuration errors and 1 on any other
package error; the error class name is printed on stderr.
"""
import argparse
import json
import sys

from . import experiments as ex
from .errors import ConfigError, RelaxCtlError

SUBCOMMANDS = ("spectrum", "suppress", "evolve", "speedup", "sweep", "local-ops", "slowdown")


def build_parser():
    p = argparse.ArgumentParser(prog="relaxctl", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--n", type=int, help="largest mode label to suppress (n_max)")
    p.add_argument("--dmin", type=float, help="distance threshold D_min")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="worker processes for the sweep")
    p.add_argument("--full", action="store_true", help="sweep on a 16 x 16 grid per alpha")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any configuration key (repeatable)")
    return p


def _overrides(args):
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    out.update(n_max=args.n, d_min=args.dmin, output_dir=args.out, workers=args.workers)
    if args.full:
        out.update(sweep_h_x="0.25:4:16", sweep_J="0.25:4:16")
    return out


def run(args):
    cfg = ex.load_config(args.config, **_overrides(args))
    cmd = args.subcommand
    if cmd == "spectrum":
        return ex.run_spectrum(cfg)
    if cmd == "suppress":
        return ex.run_suppress(cfg)
    if cmd == "evolve":
        return ex.run_evolve(cfg, args.n)
    if cmd == "speedup":
        return ex.run_speedup(cfg)
    if cmd == "sweep":
        return ex.run_sweep(cfg)[0]
    if cmd == "local-ops":
        return ex.run_local_ops(cfg)
    return ex.run_slowdown(cfg)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        report = run(args)
    except ConfigError as exc:
        print(f"ConfigError: {exc}", file=sys.stderr)
        return 2
    except (RelaxCtlError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    json.dump(report, sys.stdout, indent=2, sort_keys=True, default=str)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
