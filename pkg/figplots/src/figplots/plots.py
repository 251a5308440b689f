"""Render experiment CSVs (time series, snapshots, profiles, sweeps) as
deterministic image files.

Each figure id 1..8 consumes the fixed CSV schemas written by the
simulation runner:

  timeseries_*.csv  iter, flow, depth, n_active, n_flux, failed
  snapshot_*.csv    level, site, q, J_slot0..
  profile_*.csv     level, mean_sq_width, max_J, mean_charge, active_fraction
  sweep.csv         <swept params>, observable, mean, sd, n_seeds

Rendering is read-only and deterministic: fixed figure size, dpi, style
and fonts, so re-rendering identical inputs yields a pixel-identical file.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.2,
    "legend.fontsize": 8,
}

_FIGSIZE = (6.4, 4.8)


class SchemaError(ValueError):
    """Input CSV does not match the expected schema for the figure."""


@dataclass
class PlotJob:
    """One rendering job: a figure id, its input directory, the output
    image path, and (for the collapse figure) axis-rescale exponents."""

    figure: int
    in_dir: Path
    out_path: Path
    rescale: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if not 1 <= self.figure <= 8:
            raise ValueError(f"figure id must be 1..8, got {self.figure}")
        self.in_dir = Path(self.in_dir)
        self.out_path = Path(self.out_path)


def _read_csv(path, required):
    """Read a CSV into {column: list of floats/strings}; checks schema."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"missing input file {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path.name}: empty file, no header")
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path.name}: missing column(s) "
                              + ", ".join(missing))
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaError(f"{path.name}: no data rows")
    cols = {name: [] for name in header}
    for row in rows:
        for name, value in zip(header, row):
            cols[name].append(value)
    return cols


def _floats(col):
    return [float(x) for x in col]


def _glob_sorted(in_dir, pattern, required):
    paths = sorted(Path(in_dir).glob(pattern))
    if not paths:
        raise SchemaError(f"no {pattern} files in {in_dir}")
    return [(p.stem.split("_", 1)[1] if "_" in p.stem else p.stem,
             _read_csv(p, required)) for p in paths]


def _sweep_groups(in_dir, group_col, observable):
    """Rows of sweep.csv for one observable, grouped by `group_col` and
    sorted by beta within each group."""
    data = _read_csv(Path(in_dir) / "sweep.csv",
                     ["beta", group_col, "observable", "mean"])
    rows = [
        (float(data[group_col][i]), float(data["beta"][i]),
         float(data["mean"][i]))
        for i in range(len(data["mean"]))
        if data["observable"][i] == observable
    ]
    if not rows:
        raise SchemaError(f"sweep.csv: no rows for observable {observable!r}")
    groups = {}
    for g, b, m in sorted(rows):
        groups.setdefault(g, ([], []))
        groups[g][0].append(b)
        groups[g][1].append(m)
    return groups


# ---------------------------------------------------------------------------
# per-figure renderers
# ---------------------------------------------------------------------------

def _render_fig1(job, fig):
    files = _glob_sorted(job.in_dir, "timeseries_*.csv",
                         ["iter", "flow", "depth"])
    ax_flow, ax_depth = fig.subplots(2, 1, sharex=True)
    for label, cols in files:
        it = _floats(cols["iter"])
        ax_flow.plot(it, _floats(cols["flow"]), label=label)
        ax_depth.plot(it, _floats(cols["depth"]), label=label)
    ax_flow.set_ylabel("flow")
    ax_depth.set_ylabel("depth")
    ax_depth.set_xlabel("iteration")
    ax_flow.legend()


def _render_fig2(job, fig):
    files = _glob_sorted(job.in_dir, "snapshot_*.csv", ["level", "site", "q"])
    _, cols = files[0]
    levels = _floats(cols["level"])
    sites = _floats(cols["site"])
    loads = _floats(cols["q"])
    max_q = max(loads)
    ax = fig.subplots()
    # one bar per occupied site, scaled by its received load
    for z, s, q in zip(levels, sites, loads):
        ax.bar(s, 0.85 * q / max_q, bottom=-z, width=0.8, color="C0")
        if q >= 2:
            ax.text(s, -z + 0.88 * q / max_q, str(int(q)),
                    ha="center", va="bottom", fontsize=6)
    ax.set_xlabel("site")
    ax.set_ylabel("level (downward)")
    ax.set_yticks([-z for z in sorted(set(levels))][:: max(1, len(set(levels)) // 10)])
    ax.set_yticklabels([str(int(-y)) for y in ax.get_yticks()])


def _render_fig3(job, fig):
    files = _glob_sorted(job.in_dir, "profile_*.csv",
                         ["level", "mean_charge", "max_J", "mean_sq_width"])
    ax_top, ax_bot = fig.subplots(2, 1)
    blob_start = None
    for label, cols in files:
        lv = _floats(cols["level"])
        ax_top.plot(lv, _floats(cols["max_J"]), marker=".", label=label)
        widths = _floats(cols["mean_sq_width"])
        first = next((z for z, w in zip(lv, widths) if w > 0), lv[-1])
        blob_start = first if blob_start is None else min(blob_start, first)
    ax_top.set_ylabel("max preference")
    ax_top.set_yscale("log")
    ax_top.legend()
    # enlargement of the disordered (blob) region
    for label, cols in files:
        lv = _floats(cols["level"])
        ch = _floats(cols["mean_charge"])
        sel = [(z, c) for z, c in zip(lv, ch) if z >= blob_start - 1]
        ax_bot.plot([z for z, _ in sel], [c for _, c in sel],
                    marker=".", label=label)
    ax_bot.set_xlabel("level")
    ax_bot.set_ylabel("mean charge (blob region)")


def _render_fig4(job, fig):
    files = _glob_sorted(job.in_dir, "profile_*.csv",
                         ["level", "mean_sq_width"])
    ax = fig.subplots()
    for label, cols in files:
        ax.plot(_floats(cols["level"]), _floats(cols["mean_sq_width"]),
                marker=".", label=label)
    ax.set_xlabel("level")
    ax.set_ylabel("squared width")
    ax.legend()


def _render_fig5(job, fig):
    groups = _sweep_groups(job.in_dir, "d", "depth")
    ax = fig.subplots()
    for d, (betas, means) in sorted(groups.items()):
        ax.plot(betas, means, marker="o", label=f"d={int(d)}")
    ax.set_xscale("log")
    ax.set_xlabel("beta")
    ax.set_ylabel("mean depth")
    ax.legend()


def _render_fig6(job, fig):
    ax_nt, ax_nf = fig.subplots(2, 1, sharex=True)
    for name, ax, ylab in (("n_t", ax_nt, "total workforce N_t"),
                           ("n_f", ax_nf, "churn N_f")):
        for d, (betas, means) in sorted(_sweep_groups(job.in_dir,
                                                      "d", name).items()):
            ax.plot(betas, means, marker="o", label=f"d={int(d)}")
        ax.set_xscale("log")
        ax.set_ylabel(ylab)
    ax_nf.set_xlabel("beta")
    ax_nt.legend()


def _render_fig7(job, fig):
    ax_depth, ax_fail = fig.subplots(2, 1, sharex=True)
    for q, (betas, means) in sorted(_sweep_groups(job.in_dir,
                                                  "Q", "depth").items()):
        ax_depth.plot(betas, means, marker="o", label=f"Q={int(q)}")
    for q, (betas, means) in sorted(
            _sweep_groups(job.in_dir, "Q", "failure_fraction").items()):
        ax_fail.plot(betas, means, marker="o", label=f"Q={int(q)}")
    ax_fail.axhline(0.5, color="k", linestyle="--", linewidth=0.8)
    ax_depth.set_xscale("log")
    ax_depth.set_ylabel("mean depth")
    ax_fail.set_ylabel("failure fraction")
    ax_fail.set_xlabel("beta")
    ax_depth.legend()


def _render_fig8(job, fig):
    a, b, c = job.rescale
    data = _read_csv(Path(job.in_dir) / "sweep.csv",
                     ["beta", "Q", "Lz", "observable", "mean"])
    rows = [
        (float(data["Q"][i]), float(data["Lz"][i]), float(data["beta"][i]),
         float(data["mean"][i]))
        for i in range(len(data["mean"]))
        if data["observable"][i] == "depth"
    ]
    if not rows:
        raise SchemaError("sweep.csv: no depth rows")
    ax = fig.subplots()
    qs = sorted({r[0] for r in rows})
    for q in qs:
        sub = sorted(r for r in rows if r[0] == q)
        xs = [beta * q ** a * lz ** b for _, lz, beta, _ in sub]
        ys = [m / lz ** c for _, lz, _, m in sub]
        ax.plot(xs, ys, marker="o", label=f"Q={int(q)}")
    ax.set_xscale("log")
    ax.set_xlabel(f"beta * Q^{a:g} * Lz^{b:g}")
    ax.set_ylabel(f"depth / Lz^{c:g}")
    ax.legend()


_RENDERERS = {1: _render_fig1, 2: _render_fig2, 3: _render_fig3,
              4: _render_fig4, 5: _render_fig5, 6: _render_fig6,
              7: _render_fig7, 8: _render_fig8}


def render(job: PlotJob):
    """Render one job to its output image; returns the output path.

    Inputs are read-only; the image is deterministic for fixed inputs.
    """
    with plt.rc_context(_STYLE):
        fig = plt.figure(figsize=_FIGSIZE)
        try:
            _RENDERERS[job.figure](job, fig)
            fig.suptitle(f"figure {job.figure}")
            job.out_path.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(job.out_path, metadata={"Software": "figplots"})
        finally:
            plt.close(fig)
    return job.out_path
