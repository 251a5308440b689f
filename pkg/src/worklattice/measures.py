"""Observables over iteration outcome streams: flow, level profiles,
workforce statistics, interface location, and sweep post-processing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

# A level whose window-averaged squared width exceeds this is disordered
# (part of the blob); ordered "snake" levels are exactly zero by construction.
WIDTH_EPS = 1e-9


def flow(state) -> float:
    """Sum of every stored link preference (the global order parameter)."""
    return float(state.J.sum())


def symmetric_difference_size(a: np.ndarray, b: np.ndarray) -> int:
    """|A ^ B| for two sorted arrays of unique site codes."""
    common = np.intersect1d(a, b, assume_unique=True).size
    return int(a.size + b.size - 2 * common)


def squared_width_by_level(active_codes, geometry) -> np.ndarray:
    """Per-level mean squared distance of active sites from their circular
    center of mass, for one iteration.

    Distances are minimal-image under the helical wrap; the center per
    dimension is the circular (angular) mean of the active coordinates,
    which reduces to the ordinary center of mass for a compact cluster.
    Levels with no active site report NaN; a single active site is exactly
    zero.  (For a cluster spread uniformly around the ring the circular
    mean is ill-conditioned, but that regime does not arise here: blobs
    stay compact.)
    """
    L, L_z, d = geometry.L, geometry.L_z, geometry.d
    n_sites = geometry.n_sites_per_level
    out = np.full(L_z, np.nan)
    codes = np.asarray(active_codes, dtype=np.int64)
    if codes.size == 0:
        return out
    z = codes // n_sites
    s = codes % n_sites
    counts = np.bincount(z, minlength=L_z)
    step = 2.0 * np.pi / L
    sq = np.zeros(codes.size)
    for k in range(d):
        ck = (s // L ** k) % L
        ang = ck * step
        c_sum = np.bincount(z, weights=np.cos(ang), minlength=L_z)
        s_sum = np.bincount(z, weights=np.sin(ang), minlength=L_z)
        center = (np.arctan2(s_sum, c_sum) / step) % L
        delta = (ck - center[z] + L / 2.0) % L - L / 2.0
        sq += delta * delta
    totals = np.bincount(z, weights=sq, minlength=L_z)
    active = counts > 0
    out[active] = totals[active] / counts[active]
    out[counts == 1] = 0.0  # point mass: avoid fp residue from the angular mean
    return out


@dataclass
class LevelProfile:
    """Window-averaged per-level statistics.  NaN marks levels that were
    never active during the window."""

    mean_sq_width: np.ndarray
    mean_max_j: np.ndarray      # pre-decay max outgoing J over active sites
    mean_charge: np.ndarray     # mean received load (charge) per active site
    active_fraction: np.ndarray  # fraction of window iterations with activity
    mean_active_count: np.ndarray
    max_active_count: np.ndarray


class ProfileAccumulator:
    """Accumulates per-level statistics over a trailing window of iterations."""

    def __init__(self, geometry):
        self.geometry = geometry
        L_z = geometry.L_z
        self.n_iters = 0
        self._width_sum = np.zeros(L_z)
        self._maxj_sum = np.zeros(L_z)
        self._charge_sum = np.zeros(L_z)
        self._count_sum = np.zeros(L_z, dtype=np.int64)
        self._active_iters = np.zeros(L_z, dtype=np.int64)
        self._max_count = np.zeros(L_z, dtype=np.int64)

    def update(self, active_codes, active_loads, J=None, charges=None):
        geom = self.geometry
        n_sites = geom.n_sites_per_level
        self.n_iters += 1
        z = active_codes // n_sites
        counts = np.bincount(z, minlength=geom.L_z)
        occupied = counts > 0
        self._count_sum += counts
        self._active_iters += occupied
        np.maximum(self._max_count, counts, out=self._max_count)
        if charges is None:
            charges = active_loads  # fall back to final loads
        self._charge_sum += np.bincount(z, weights=charges,
                                        minlength=geom.L_z)
        width = squared_width_by_level(active_codes, geom)
        self._width_sum[occupied] += width[occupied]
        if J is not None and active_codes.size:
            s = active_codes % n_sites
            row_max = J[z, s, :].max(axis=1)
            level_max = np.zeros(geom.L_z)
            np.maximum.at(level_max, z, row_max)
            self._maxj_sum += level_max

    def finalize(self) -> LevelProfile:
        act = self._active_iters
        seen = act > 0

        def _avg(total):
            out = np.full(self.geometry.L_z, np.nan)
            out[seen] = total[seen] / act[seen]
            return out

        mean_charge = np.full(self.geometry.L_z, np.nan)
        mean_charge[seen] = self._charge_sum[seen] / self._count_sum[seen]
        return LevelProfile(
            mean_sq_width=_avg(self._width_sum),
            mean_max_j=_avg(self._maxj_sum),
            mean_charge=mean_charge,
            active_fraction=act / max(self.n_iters, 1),
            mean_active_count=_avg(self._count_sum.astype(float)),
            max_active_count=self._max_count.copy(),
        )


def squared_width_profile(outcomes: Sequence, geometry) -> np.ndarray:
    """Window-averaged squared width per level over a sequence of
    IterationOutcome (mean over the iterations in which a level is active).
    """
    if len(outcomes) == 0:
        raise ValueError("empty outcome window")
    acc = ProfileAccumulator(geometry)
    for out in outcomes:
        acc.update(out.active_codes, out.active_loads)
    return acc.finalize().mean_sq_width


def workforce_stats(outcomes: Sequence):
    """Total distinct workforce N_t and the per-iteration churn series N_f.

    N_f(t) is the symmetric difference between consecutive active-site
    sets; the first entry is counted against the empty set.
    """
    seen = set()
    n_f = np.zeros(len(outcomes), dtype=np.int64)
    prev = np.empty(0, dtype=np.int64)
    for t, out in enumerate(outcomes):
        n_f[t] = symmetric_difference_size(prev, out.active_codes)
        seen.update(out.active_codes.tolist())
        prev = out.active_codes
    return len(seen), n_f


def depth_stats(outcomes: Sequence, window: Optional[int] = None):
    """(mean depth, failure fraction) over the trailing window."""
    if len(outcomes) == 0:
        raise ValueError("empty outcome window")
    if window is None:
        window = len(outcomes)
    tail = outcomes[-window:]
    depths = np.array([o.depth for o in tail], dtype=float)
    fails = np.array([o.failed for o in tail], dtype=float)
    return float(depths.mean()), float(fails.mean())


@dataclass
class InterfaceReport:
    """Location of the snake/blob handover in one run."""

    width_level: Optional[int]      # first level (top down) with width > eps
    width_charge: Optional[float]   # Q - width_level
    j_level: Optional[int]          # first level where max J leaves the strong branch
    j_charge: Optional[float]
    predicted_charge_meanfield: float
    snake_length: Optional[int]     # == width_level


def meanfield_interface(Q, beta, gamma, d):
    """Mean-field interface: predicted charge q* and snake length z*.

    The ordered single-link regime persists while beta*(q-1)/gamma exceeds
    the fan-out 2d+1; with charge q(z) = Q - z this gives
    q* = 1 + (2d+1)*gamma/beta and z* = max(0, Q - q*).  beta = 0 never
    orders: q* is infinite and the snake length is zero.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if beta == 0.0:
        return math.inf, 0.0
    q_star = 1.0 + (2 * d + 1) * gamma / beta
    z_star = max(0.0, Q - q_star)
    return q_star, z_star


def interface_report(summary, eps: float = WIDTH_EPS) -> InterfaceReport:
    """Locate the snake/blob interface in a RunSummary, by two routes.

    Width route: first level, scanning downward, whose window-averaged
    squared width exceeds eps.  Preference route: first level whose
    window-averaged max outgoing J falls below half the strong-branch value
    (q(z)-1)/gamma with q(z) = Q - z.  Both are reported; they need not
    agree.
    """
    cfg = summary.config
    prof = summary.profile
    q_star, _ = meanfield_interface(cfg.Q, cfg.beta, cfg.gamma, cfg.d)

    width_level = None
    for z in range(cfg.L_z):
        w = prof.mean_sq_width[z]
        if np.isnan(w):
            break
        if w > eps:
            width_level = z
            break

    j_level = None
    if cfg.gamma > 0:
        for z in range(cfg.L_z):
            mj = prof.mean_max_j[z]
            if np.isnan(mj):
                break
            strong = (cfg.Q - z - 1) / cfg.gamma
            if strong <= 0 or mj < 0.5 * strong:
                j_level = z
                break

    return InterfaceReport(
        width_level=width_level,
        width_charge=None if width_level is None else float(cfg.Q - width_level),
        j_level=j_level,
        j_charge=None if j_level is None else float(cfg.Q - j_level),
        predicted_charge_meanfield=q_star,
        snake_length=width_level,
    )


def estimate_beta50(betas, fractions) -> Optional[float]:
    """beta at the first upward crossing of failure fraction through 0.5,
    linearly interpolated between the bracketing grid points.  Returns
    None when the curve never crosses."""
    betas = np.asarray(betas, dtype=float)
    fractions = np.asarray(fractions, dtype=float)
    if betas.size != fractions.size:
        raise ValueError("betas and fractions must have equal length")
    if np.any(np.diff(betas) <= 0):
        raise ValueError("betas must be strictly increasing")
    for i in range(betas.size):
        if fractions[i] >= 0.5:
            if i == 0:
                return float(betas[0]) if fractions[0] == 0.5 else None
            f0, f1 = fractions[i - 1], fractions[i]
            if f1 == f0:
                return float(betas[i])
            t = (0.5 - f0) / (f1 - f0)
            return float(betas[i - 1] + t * (betas[i] - betas[i - 1]))
    return None


def rescale_curve(betas, ys, Q, L_z, a=0.0, b=0.0, c=0.0):
    """Axis rescaling for collapse exploration:
    x = beta * Q**a * L_z**b, y' = y / L_z**c.  Pure transform, no fitting."""
    for name, e in (("a", a), ("b", b), ("c", c)):
        if not math.isfinite(e):
            raise ValueError(f"exponent {name} must be finite")
    betas = np.asarray(betas, dtype=float)
    ys = np.asarray(ys, dtype=float)
    return betas * Q ** a * L_z ** b, ys / L_z ** c
