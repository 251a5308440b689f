"""Command line entry point: figplot --figure <n> --in <dir> --out <file>."""

import argparse
import sys

from .plots import PlotJob, SchemaError, render


def _parse_rescale(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three exponents a,b,c")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad exponents {text!r}")


def build_parser():
    p = argparse.ArgumentParser(
        prog="figplot",
        description="Render simulation CSV outputs as figure images.")
    p.add_argument("--figure", type=int, required=True, metavar="N",
                   help="figure id, 1..8")
    p.add_argument("--in", dest="in_dir", required=True, metavar="DIR",
                   help="directory holding the figure's CSV files")
    p.add_argument("--out", required=True, metavar="FILE",
                   help="output image path (extension selects the format)")
    p.add_argument("--rescale", type=_parse_rescale, default=(0.0, 0.0, 1.0),
                   metavar="a,b,c",
                   help="axis-rescale exponents for the collapse figure")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        job = PlotJob(figure=args.figure, in_dir=args.in_dir,
                      out_path=args.out, rescale=args.rescale)
        render(job)
    except (SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
