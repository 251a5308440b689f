"""Command-line entry point.

Subcommands:
  run        one simulation; writes timeseries/profile/snapshot CSVs
  sweep      parameter grid from a config file; writes sweep.csv
  figure N   preset reproducing the data behind figure N (1..8)

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .engine import ConfigError, run
from .runner import (SweepSpec, parse_config, execute, execute_figure,
                     write_timeseries, write_profile, write_snapshot)


def _add_config_flags(p):
    p.add_argument("--config", type=str, default=None,
                   help="flat key = value config file")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--Lz", type=int, default=None)
    p.add_argument("--Q", type=int, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--iters", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--variant", type=str, default=None,
                   help="working | nonworking")
    p.add_argument("--update-mode", dest="update_mode", type=str, default=None,
                   help="per_unit | batch")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--out-dir", dest="out_dir", type=str, default="out")
    p.add_argument("--workers", type=int, default=1)


def _overrides(args):
    keys = ("d", "L", "Lz", "Q", "beta", "gamma", "iters", "seed",
            "variant", "update_mode", "window")
    return {k: getattr(args, k) for k in keys if getattr(args, k) is not None}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="worklattice",
        description="Workload distribution on a (d+1)-dimensional lattice "
                    "with reinforcement-learned link preferences.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one simulation run")
    _add_config_flags(p_run)

    p_sweep = sub.add_parser("sweep", help="execute a parameter sweep")
    _add_config_flags(p_sweep)

    p_fig = sub.add_parser("figure", help="run a figure preset (1..8)")
    p_fig.add_argument("n", type=int, help="figure number 1..8")
    _add_config_flags(p_fig)
    p_fig.add_argument("--rescale", type=str, default="0,0,1",
                       help="collapse exponents a,b,c (figure 8)")
    return parser


def _cmd_run(args):
    config = parse_config(args.config, _overrides(args))
    if isinstance(config, SweepSpec):
        raise ConfigError([("config", "sweep keys present; use the sweep subcommand")])
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = run(config, keep_state=True)
    write_timeseries(out_dir / "timeseries.csv", summary)
    write_profile(out_dir / "profile.csv", summary)
    write_snapshot(out_dir / "snapshot.csv", summary)
    _write_run_manifest(out_dir / "manifest.json", config)
    print(f"wrote {out_dir}/timeseries.csv, profile.csv, snapshot.csv")
    return 0


def _write_run_manifest(path, config):
    import json
    from .runner import _config_dict, _version
    path.write_text(json.dumps({"config": _config_dict(config),
                                "version": _version()}, indent=2))


def _cmd_sweep(args):
    spec = parse_config(args.config, _overrides(args))
    if not isinstance(spec, SweepSpec):
        spec = SweepSpec(base=spec, seeds=[spec.seed], outputs=["depth"])
    written, _ = execute(spec, args.out_dir, workers=args.workers)
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_figure(args):
    seeds = None
    if args.seed is not None:
        seeds = [args.seed]
    rescale = tuple(float(x) for x in args.rescale.split(","))
    if len(rescale) != 3:
        raise ConfigError([("rescale", "expected three exponents a,b,c")])
    written = execute_figure(args.n, args.out_dir, workers=args.workers,
                             iterations=args.iters, seeds=seeds,
                             rescale=rescale)
    for path in written:
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "figure":
            if not 1 <= args.n <= 8:
                raise ConfigError([("figure", f"must be 1..8, got {args.n}")])
            return _cmd_figure(args)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
