"""Experiment harness: config parsing, parameter sweeps with multi-seed
averaging, figure-style presets, and CSV/manifest emission.

CSV schemas (headers are fixed; golden-file friendly):
  timeseries.csv  iter, flow, depth, n_active, n_flux, failed
  profile.csv     level, mean_sq_width, max_J, mean_charge, active_fraction
  sweep.csv       <one column per swept parameter>, observable, mean, sd, n_seeds
  snapshot.csv    level, site, q, J_slot0..J_slot2d
"""

from __future__ import annotations

import csv
import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .engine import (SimConfig, Variant, UpdateMode, ConfigError, run)
from .measures import estimate_beta50, rescale_curve

OBSERVABLES = ("depth", "failure_fraction", "flow", "n_t", "n_f")

# flat config-file / flag keys -> SimConfig attribute
_KEYS = {
    "d": ("d", int),
    "L": ("L", int),
    "Lz": ("L_z", int),
    "Q": ("Q", int),
    "beta": ("beta", float),
    "gamma": ("gamma", float),
    "iters": ("iterations", int),
    "seed": ("seed", int),
    "variant": ("variant", None),
    "update_mode": ("update_mode", None),
    "window": ("measure_window", int),
}

_VARIANTS = {
    "working": Variant.WORKING_MANAGERS,
    "workingmanagers": Variant.WORKING_MANAGERS,
    "nonworking": Variant.NON_WORKING_MANAGERS,
    "nonworkingmanagers": Variant.NON_WORKING_MANAGERS,
}

_UPDATE_MODES = {
    "per_unit": UpdateMode.PER_UNIT,
    "perunit": UpdateMode.PER_UNIT,
    "batch": UpdateMode.BATCH,
}


def parse_variant(text) -> Variant:
    if isinstance(text, Variant):
        return text
    v = _VARIANTS.get(str(text).strip().lower())
    if v is None:
        raise ConfigError([("variant", f"unknown variant {text!r}")])
    return v


def parse_update_mode(text) -> UpdateMode:
    if isinstance(text, UpdateMode):
        return text
    m = _UPDATE_MODES.get(str(text).strip().lower())
    if m is None:
        raise ConfigError([("update_mode", f"unknown update mode {text!r}")])
    return m


@dataclass
class SweepSpec:
    """A parameter grid over a base config.

    Axis values may be scalars or dicts of several overrides varied
    together (e.g. Q = L_z).  Every grid point is run once per seed;
    `outputs` selects the observables aggregated into sweep.csv and
    `emit` the per-point artifacts (timeseries/profile/snapshot), written
    for the first seed of each point.
    """

    base: SimConfig
    axes: list = field(default_factory=list)   # [(name, [value, ...]), ...]
    seeds: list = field(default_factory=lambda: [1])
    outputs: list = field(default_factory=list)
    emit: list = field(default_factory=list)

    def grid(self):
        """Yield (grid_index, overrides dict) for every grid point."""
        if not self.axes:
            yield 0, {}
            return
        names = [a[0] for a in self.axes]
        for i, combo in enumerate(itertools.product(*[a[1] for a in self.axes])):
            overrides = {}
            for name, value in zip(names, combo):
                if isinstance(value, dict):
                    overrides.update(value)
                else:
                    overrides[name] = value
            yield i, overrides

    @property
    def grid_size(self) -> int:
        n = 1
        for _, values in self.axes:
            n *= len(values)
        return n


def _apply_overrides(base: SimConfig, overrides: dict) -> SimConfig:
    fields = {}
    for key, value in overrides.items():
        if key not in _KEYS:
            raise ConfigError([(key, "unknown parameter")])
        attr, conv = _KEYS[key]
        if key == "variant":
            value = parse_variant(value)
        elif key == "update_mode":
            value = parse_update_mode(value)
        elif conv is not None:
            value = conv(value)
        fields[attr] = value
    return replace(base, **fields)


def parse_config(path=None, overrides=None):
    """Parse a flat `key = value` config file plus flag overrides.

    Returns a validated SimConfig, or a SweepSpec when any sweep axis
    (sweep_<param> = comma list), `seeds` or `outputs` key is present.
    Unknown keys are errors; flag overrides win over file values.
    """
    values = {}
    sweep_axes = []
    seeds = None
    outputs = None
    if path is not None:
        text = Path(path).read_text()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError([(f"line {lineno}", f"expected key = value, got {raw!r}")])
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key == "seeds":
                seeds = [int(x) for x in val.split(",")]
            elif key == "outputs":
                outputs = [x.strip() for x in val.split(",")]
                for o in outputs:
                    if o not in OBSERVABLES:
                        raise ConfigError([("outputs", f"unknown observable {o!r}")])
            elif key.startswith("sweep_"):
                param = key[len("sweep_"):]
                if param not in _KEYS:
                    raise ConfigError([(key, "unknown sweep parameter")])
                _, conv = _KEYS[param]
                conv = conv or str
                sweep_axes.append((param, [conv(x) for x in val.split(",")]))
            elif key in _KEYS:
                values[key] = val
            else:
                raise ConfigError([(key, "unknown key")])
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in _KEYS:
                raise ConfigError([(key, "unknown parameter")])
            values[key] = value
    config = _apply_overrides(SimConfig(), values)
    config.validate()
    if sweep_axes or seeds is not None or outputs is not None:
        return SweepSpec(base=config, axes=sweep_axes,
                         seeds=seeds or [config.seed],
                         outputs=outputs or ["depth"])
    return config


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------

def effective_seed(seed: int, grid_index: int) -> int:
    """Independent per-(seed, grid point) stream seed."""
    ss = np.random.SeedSequence([int(seed), int(grid_index)])
    return int(ss.generate_state(1, np.uint64)[0])


def _observable(summary, name):
    w = max(1, summary.window)
    if name == "depth":
        return float(summary.depth[-w:].mean())
    if name == "failure_fraction":
        return float(summary.failed[-w:].mean())
    if name == "flow":
        return float(summary.flow[-w:].mean())
    if name == "n_t":
        return float(summary.n_t)
    if name == "n_f":
        wf = min(w, 1000)
        return float(summary.n_flux[-wf:].mean())
    raise ValueError(f"unknown observable {name!r}")


def _run_job(config, outputs, emit):
    summary = run(config, keep_state="snapshot" in emit)
    obs = {name: _observable(summary, name) for name in outputs}
    artifacts = {}
    if "timeseries" in emit:
        artifacts["timeseries"] = summary
    if "profile" in emit:
        artifacts["profile"] = summary
    if "snapshot" in emit:
        artifacts["snapshot"] = summary
    return obs, artifacts or None


def _job_entry(args):
    grid_index, seed_index, config, outputs, emit = args
    try:
        obs, artifacts = _run_job(config, outputs, emit)
        return grid_index, seed_index, obs, artifacts, None
    except Exception as exc:  # errored grid point: reported, sweep continues
        return grid_index, seed_index, None, None, f"{type(exc).__name__}: {exc}"


def _point_label(overrides):
    if not overrides:
        return "base"
    return "_".join(f"{k}{v}" for k, v in overrides.items()).replace(".", "p")


def write_timeseries(path, summary):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "flow", "depth", "n_active", "n_flux", "failed"])
        for t in range(summary.flow.size):
            w.writerow([t, repr(float(summary.flow[t])), int(summary.depth[t]),
                        int(summary.n_active[t]), int(summary.n_flux[t]),
                        int(summary.failed[t])])


def write_profile(path, summary):
    prof = summary.profile
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "mean_sq_width", "max_J", "mean_charge",
                    "active_fraction"])
        for z in range(summary.config.L_z):
            w.writerow([z, repr(float(prof.mean_sq_width[z])),
                        repr(float(prof.mean_max_j[z])),
                        repr(float(prof.mean_charge[z])),
                        repr(float(prof.active_fraction[z]))])


def write_snapshot(path, summary):
    if summary.state is None:
        raise ValueError("snapshot requires a run with keep_state=True")
    geom = summary.config.geometry
    n_sites = geom.n_sites_per_level
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "site", "q"]
                   + [f"J_slot{k}" for k in range(geom.n_nb)])
        for code, charge in zip(summary.final_active_codes,
                                summary.final_active_charges):
            z, s = int(code // n_sites), int(code % n_sites)
            w.writerow([z, s, int(charge)]
                       + [repr(float(x)) for x in summary.state.J[z, s]])


def execute(spec: SweepSpec, out_dir, workers: int = 1, name: str = "sweep"):
    """Run every grid point x seed, write CSVs and a manifest.

    Returns the list of written file paths.  Individual failed runs mark
    their rows as errored (NaN aggregates, message in the manifest) without
    aborting the sweep.
    """
    spec.base.validate()
    for o in spec.outputs:
        if o not in OBSERVABLES:
            raise ConfigError([("outputs", f"unknown observable {o!r}")])
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()

    jobs = []
    points = list(spec.grid())
    for grid_index, overrides in points:
        for seed_index, seed in enumerate(spec.seeds):
            config = _apply_overrides(spec.base, overrides)
            config = replace(config, seed=effective_seed(seed, grid_index))
            emit = spec.emit if seed_index == 0 else []
            jobs.append((grid_index, seed_index, config, spec.outputs, emit))

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_job_entry, jobs))
    else:
        results = [_job_entry(j) for j in jobs]

    by_point = {i: {} for i, _ in points}
    errors = []
    written = []
    for grid_index, seed_index, obs, artifacts, err in results:
        if err is not None:
            errors.append({"grid_index": grid_index, "seed_index": seed_index,
                           "error": err})
            continue
        by_point[grid_index][seed_index] = obs
        if artifacts:
            label = _point_label(dict(points[grid_index][1]))
            for kind, summary in artifacts.items():
                path = out_dir / f"{kind}_{label}.csv"
                {"timeseries": write_timeseries,
                 "profile": write_profile,
                 "snapshot": write_snapshot}[kind](path, summary)
                written.append(path)

    sweep_rows = []
    if spec.outputs:
        param_names = sorted({k for _, ov in points for k in ov})
        sweep_path = out_dir / f"{name}.csv"
        with open(sweep_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(param_names + ["observable", "mean", "sd", "n_seeds"])
            for grid_index, overrides in points:
                seen = by_point[grid_index]
                for obs_name in spec.outputs:
                    vals = np.array([seen[i][obs_name] for i in sorted(seen)])
                    mean = float(vals.mean()) if vals.size else float("nan")
                    sd = (float(vals.std(ddof=1)) if vals.size > 1 else 0.0) \
                        if vals.size else float("nan")
                    row = dict(overrides)
                    row.update(observable=obs_name, mean=mean, sd=sd,
                               n_seeds=vals.size)
                    sweep_rows.append(row)
                    w.writerow([overrides.get(p, "") for p in param_names]
                               + [obs_name, repr(mean), repr(sd), vals.size])
        written.append(sweep_path)

    manifest = {
        "spec": {
            "base": _config_dict(spec.base),
            "axes": [[n, v] for n, v in spec.axes],
            "seeds": list(spec.seeds),
            "outputs": list(spec.outputs),
            "emit": list(spec.emit),
        },
        "jobs": [{"grid_index": g, "seed_index": si,
                  "effective_seed": cfg.seed,
                  "overrides": dict(points[g][1])}
                 for g, si, cfg, _, _ in jobs],
        "errors": errors,
        "wall_time_s": time.time() - t0,
        "version": _version(),
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, default=str))
    written.append(manifest_path)
    return written, sweep_rows


def _config_dict(config: SimConfig) -> dict:
    return {
        "d": config.d, "L": config.L, "Lz": config.L_z, "Q": config.Q,
        "beta": config.beta, "gamma": config.gamma,
        "variant": config.variant.value,
        "update_mode": config.update_mode.value,
        "iters": config.iterations, "seed": config.seed,
        "window": config.measure_window,
    }


def _version() -> str:
    from . import __version__
    return __version__


# ---------------------------------------------------------------------------
# figure presets
# ---------------------------------------------------------------------------

def _log_betas(lo, hi, n):
    return [float(b) for b in np.geomspace(lo, hi, n)]


def figure_preset(n: int, iterations: Optional[int] = None,
                  seeds: Optional[list] = None) -> SweepSpec:
    """Desk-scale sweep spec producing the data behind figure n (1..8).

    `iterations` / `seeds` override the preset defaults (useful to shrink
    runs for smoke tests or grow them toward publication scale).
    """
    if not 1 <= n <= 8:
        raise ValueError(f"figure number must be 1..8, got {n}")
    builder = _PRESETS[n]
    spec = builder()
    if iterations is not None:
        spec.base = replace(spec.base, iterations=iterations,
                            measure_window=None)
    if seeds is not None:
        spec.seeds = list(seeds)
    return spec


def _preset_fig1():
    # equilibration of flow and depth, low and high dimension
    base = SimConfig(d=1, L=30, L_z=60, Q=60, beta=0.1, gamma=0.3,
                     iterations=10000, seed=1)
    return SweepSpec(base=base,
                     axes=[("case", [{"d": 1, "L": 30}, {"d": 4, "L": 9}])],
                     seeds=[1], outputs=["flow", "depth"],
                     emit=["timeseries"])


def _preset_fig2():
    # single end-state load snapshot of the snake + blob pattern
    base = SimConfig(d=1, L=30, L_z=30, Q=20, beta=0.3, gamma=0.3,
                     iterations=2000, seed=1)
    return SweepSpec(base=base, seeds=[1], outputs=[],
                     emit=["snapshot", "profile"])


def _preset_fig3():
    # per-level preference profiles vs dimension
    base = SimConfig(d=1, L=30, L_z=25, Q=20, beta=0.03, gamma=0.03,
                     iterations=3000, measure_window=1000, seed=1)
    return SweepSpec(base=base,
                     axes=[("case", [{"d": 1, "L": 30}, {"d": 2, "L": 16},
                                     {"d": 3, "L": 10}])],
                     seeds=[1], outputs=[], emit=["profile"])


def _preset_fig4():
    # squared width per level for a grid of beta
    base = SimConfig(d=1, L=30, L_z=60, Q=60, gamma=0.3,
                     iterations=10000, measure_window=5000, seed=1)
    return SweepSpec(base=base,
                     axes=[("beta", [0.03, 0.06, 0.12, 0.24, 0.48])],
                     seeds=[1], outputs=["depth"], emit=["profile"])


def _preset_fig5():
    # mean depth vs beta for d = 1, 2, 3 (L shrinks with d: single-core runtime)
    base = SimConfig(L_z=60, Q=60, gamma=0.3, iterations=4000,
                     measure_window=1000, seed=1)
    return SweepSpec(base=base,
                     axes=[("case", [{"d": 1, "L": 30}, {"d": 2, "L": 20},
                                     {"d": 3, "L": 10}]),
                           ("beta", _log_betas(0.01, 1.0, 10))],
                     seeds=list(range(1, 11)), outputs=["depth"])


def _preset_fig6():
    # workforce size and churn vs beta
    base = SimConfig(L=30, L_z=60, Q=60, gamma=0.3, iterations=3000,
                     measure_window=1000, seed=1)
    return SweepSpec(base=base,
                     axes=[("d", [1, 2, 3]),
                           ("beta", _log_betas(0.01, 1.0, 8))],
                     seeds=[1], outputs=["n_t", "n_f"])


def _preset_fig7():
    # non-working managers: depth, failure fraction, beta_50 vs Q = L_z
    base = SimConfig(d=1, L=30, Q=40, L_z=40, gamma=0.3,
                     variant=Variant.NON_WORKING_MANAGERS,
                     iterations=2000, measure_window=500, seed=1)
    return SweepSpec(base=base,
                     axes=[("case", [{"Q": q, "Lz": q}
                                     for q in (40, 100, 200, 400)]),
                           ("beta", _log_betas(0.003, 3.0, 20))],
                     seeds=list(range(1, 5)),
                     outputs=["depth", "failure_fraction"])


def _preset_fig8():
    # data for the collapse plot (rescaled fig-7-style depth curves)
    spec = _preset_fig7()
    spec.outputs = ["depth"]
    return spec


_PRESETS = {1: _preset_fig1, 2: _preset_fig2, 3: _preset_fig3,
            4: _preset_fig4, 5: _preset_fig5, 6: _preset_fig6,
            7: _preset_fig7, 8: _preset_fig8}


def execute_figure(n: int, out_dir, workers: int = 1,
                   iterations: Optional[int] = None,
                   seeds: Optional[list] = None,
                   rescale=(0.0, 0.0, 1.0)):
    """Run figure preset n and write its CSVs (plus derived files:
    beta50.csv for figure 7, collapse.csv for figure 8)."""
    spec = figure_preset(n, iterations=iterations, seeds=seeds)
    out_dir = Path(out_dir)
    written, sweep_rows = execute(spec, out_dir, workers=workers)

    if n == 7:
        path = out_dir / "beta50.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["Q", "beta50"])
            for q_val, rows in _group_by_q(sweep_rows, "failure_fraction"):
                betas = [r["beta"] for r in rows]
                fracs = [r["mean"] for r in rows]
                b50 = estimate_beta50(betas, fracs)
                w.writerow([q_val, "" if b50 is None else repr(b50)])
        written.append(path)
    if n == 8:
        a, b, c = rescale
        path = out_dir / "collapse.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["Q", "Lz", "x", "y"])
            for q_val, rows in _group_by_q(sweep_rows, "depth"):
                betas = [r["beta"] for r in rows]
                ys = [r["mean"] for r in rows]
                xs, ys2 = rescale_curve(betas, ys, q_val, q_val, a, b, c)
                for x, y in zip(xs, ys2):
                    w.writerow([q_val, q_val, repr(float(x)), repr(float(y))])
        written.append(path)
    return written


def _group_by_q(sweep_rows, observable):
    rows = [r for r in sweep_rows if r["observable"] == observable]
    qs = sorted({r["Q"] for r in rows})
    for q_val in qs:
        sub = sorted((r for r in rows if r["Q"] == q_val),
                     key=lambda r: r["beta"])
        yield q_val, sub
