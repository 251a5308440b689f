"""Iteration engine: top-down distribution of one workload per iteration.

Each iteration places Q units on the central top site, sweeps the levels
downward (sites in ascending index order within a level), and lets every
site with more than one unit push its surplus to downstream neighbours
sampled from a logit over the link preferences J.  Each transferred unit
reinforces the chosen link by +1; at the end of the iteration every J is
decayed by (1 - gamma) and all workloads are reset to zero.

The hot path is a numba kernel; a pure-Python reference path consuming the
same random stream is kept for oracle tests (see run_iteration_reference).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit

from .lattice import LatticeGeometry, LatticeState, make_state
from .measures import ProfileAccumulator, LevelProfile, symmetric_difference_size

# Incremental softmax weights are renormalized past this magnitude.
_W_RENORM = 1e250


class Variant(str, enum.Enum):
    WORKING_MANAGERS = "working"      # distributing sites keep one unit
    NON_WORKING_MANAGERS = "nonworking"  # distributing sites pass everything on


class UpdateMode(str, enum.Enum):
    PER_UNIT = "per_unit"  # J incremented after every transferred unit
    BATCH = "batch"        # per-slot tallies added to J after the site finishes


class ConfigError(ValueError):
    """Invalid simulation configuration; .fields lists the offending names."""

    def __init__(self, problems):
        self.fields = [name for name, _ in problems]
        msg = "; ".join(f"{name}: {why}" for name, why in problems)
        super().__init__(f"invalid config: {msg}")


class FailureAtBottom(Exception):
    """A bottom-level site holds surplus it cannot pass on."""


@dataclass
class SimConfig:
    """All model and run parameters for one simulation."""

    d: int = 1
    L: int = 30
    L_z: int = 60
    Q: int = 60
    beta: float = 0.1
    gamma: float = 0.3
    variant: Variant = Variant.WORKING_MANAGERS
    update_mode: UpdateMode = UpdateMode.PER_UNIT
    iterations: int = 10000
    seed: int = 1
    measure_window: Optional[int] = None  # default: trailing half of the run

    @property
    def geometry(self) -> LatticeGeometry:
        return LatticeGeometry(d=self.d, L=self.L, L_z=self.L_z)

    @property
    def effective_window(self) -> int:
        if self.iterations == 0:
            return 0
        w = self.measure_window
        if w is None:
            w = max(1, self.iterations // 2)
        return max(1, min(w, self.iterations))

    def validate(self):
        problems = []
        if self.d < 1:
            problems.append(("d", f"must be >= 1, got {self.d}"))
        if self.L < 2:
            problems.append(("L", f"must be >= 2, got {self.L}"))
        if self.L_z < 1:
            problems.append(("Lz", f"must be >= 1, got {self.L_z}"))
        if self.Q < 1:
            problems.append(("Q", f"must be >= 1, got {self.Q}"))
        if not (math.isfinite(self.beta) and self.beta >= 0):
            problems.append(("beta", f"must be finite and >= 0, got {self.beta}"))
        if not (0.0 <= self.gamma <= 1.0):
            problems.append(("gamma", f"must be in [0, 1], got {self.gamma}"))
        if not isinstance(self.variant, Variant):
            problems.append(("variant", f"unknown variant {self.variant!r}"))
        if not isinstance(self.update_mode, UpdateMode):
            problems.append(("update_mode", f"unknown update mode {self.update_mode!r}"))
        if self.iterations < 0:
            problems.append(("iters", f"must be >= 0, got {self.iterations}"))
        if self.measure_window is not None and self.measure_window < 1:
            problems.append(("window", f"must be >= 1, got {self.measure_window}"))
        if problems:
            raise ConfigError(problems)


@dataclass
class IterationOutcome:
    """Observables of a single iteration, recorded at end of distribution."""

    depth: int
    failed: bool
    units_transferred: int
    active_codes: np.ndarray  # sorted flat codes level * n_sites + site, q >= 1
    active_loads: np.ndarray  # final q per active site, aligned with active_codes
    active_charges: np.ndarray  # load each active site received during the sweep
    flow: float               # sum of all J after the end-of-iteration decay


@dataclass
class RunSummary:
    """Per-iteration time series plus window-averaged level profiles."""

    config: SimConfig
    seed: int
    window: int
    flow: np.ndarray
    depth: np.ndarray
    n_active: np.ndarray
    n_flux: np.ndarray
    units_transferred: np.ndarray
    failed: np.ndarray
    n_t: int
    profile: LevelProfile
    final_active_codes: np.ndarray
    final_active_loads: np.ndarray
    final_active_charges: np.ndarray = field(default=None)
    outcomes: Optional[list] = None
    state: Optional[LatticeState] = field(default=None, repr=False)


def choice_probabilities(J_slots, beta: float) -> np.ndarray:
    """Logit choice probabilities over a site's downstream slots.

    Overflow-safe: logits are shifted by their maximum before
    exponentiation, which leaves the distribution unchanged.
    """
    J_slots = np.asarray(J_slots, dtype=np.float64)
    if J_slots.size < 1:
        raise ValueError("need at least one slot")
    if not np.all(np.isfinite(J_slots)):
        raise ValueError("non-finite preference weight")
    logits = beta * J_slots
    w = np.exp(logits - logits.max())
    return w / w.sum()


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _sweep_kernel(q, J, nbr, beta, keep_one, per_unit, peak, touched,
                  n_touch0, entry_site, rng):
    """One top-down sweep.  Mutates q, J, peak and the touched-code buffer.

    `peak` records, for every site that distributed, the load it held when
    the sweep reached it (its received charge); sites that never
    distributed keep peak == 0 and their charge is just their final load.

    Returns (units_transferred, failed, n_touch).  The caller pre-seeds
    `touched` with the entry site's code and passes its count as n_touch0.
    Only sites that received units are visited (in ascending site order
    within a level, matching a plain full scan), so the cost scales with
    the worked region, not the lattice volume.
    """
    L_z, n_sites = q.shape
    n_nb = nbr.shape[1]
    w = np.empty(n_nb)
    counts = np.empty(n_nb, np.int64)
    # per-level frontier of candidate sites (at most Q receivers per level)
    cap = n_nb if q[0, entry_site] < n_nb else q[0, entry_site]
    cur = np.empty(cap + 1, np.int64)
    nxt = np.empty(cap + 1, np.int64)
    cur[0] = entry_site
    n_cur = 1
    transferred = 0
    failed = False
    n_touch = n_touch0
    for z in range(L_z):
        cur[:n_cur].sort()
        base = (z + 1) * n_sites
        n_nxt = 0
        for idx in range(n_cur):
            s = cur[idx]
            qs = q[z, s]
            if qs < 2:
                continue
            peak[z, s] = qs
            if z == L_z - 1:
                failed = True  # surplus stuck at the bottom plane
                continue
            surplus = qs - 1 if keep_one else qs
            # softmax weights relative to the running max logit
            m = beta * J[z, s, 0]
            for k in range(1, n_nb):
                bj = beta * J[z, s, k]
                if bj > m:
                    m = bj
            tot = 0.0
            for k in range(n_nb):
                w[k] = np.exp(beta * J[z, s, k] - m)
                tot += w[k]
            eb = np.exp(beta)
            if per_unit:
                for _ in range(surplus):
                    u = rng.random() * tot
                    acc = 0.0
                    kc = n_nb - 1
                    for k in range(n_nb):
                        acc += w[k]
                        if u < acc:
                            kc = k
                            break
                    J[z, s, kc] += 1.0
                    wnew = w[kc] * eb
                    if wnew > _W_RENORM:
                        m = beta * J[z, s, 0]
                        for k in range(1, n_nb):
                            bj = beta * J[z, s, k]
                            if bj > m:
                                m = bj
                        tot = 0.0
                        for k in range(n_nb):
                            w[k] = np.exp(beta * J[z, s, k] - m)
                            tot += w[k]
                    else:
                        tot += wnew - w[kc]
                        w[kc] = wnew
                    j = nbr[s, kc]
                    if q[z + 1, j] == 0:
                        touched[n_touch] = base + j
                        n_touch += 1
                        nxt[n_nxt] = j
                        n_nxt += 1
                    q[z + 1, j] += 1
                    transferred += 1
            else:
                for k in range(n_nb):
                    counts[k] = 0
                for _ in range(surplus):
                    u = rng.random() * tot
                    acc = 0.0
                    kc = n_nb - 1
                    for k in range(n_nb):
                        acc += w[k]
                        if u < acc:
                            kc = k
                            break
                    counts[kc] += 1
                for k in range(n_nb):
                    c = counts[k]
                    if c == 0:
                        continue
                    J[z, s, k] += c
                    j = nbr[s, k]
                    if q[z + 1, j] == 0:
                        touched[n_touch] = base + j
                        n_touch += 1
                        nxt[n_nxt] = j
                        n_nxt += 1
                    q[z + 1, j] += c
                transferred += surplus
            q[z, s] = qs - surplus
        tmp = cur
        cur = nxt
        nxt = tmp
        n_cur = n_nxt
        if n_cur == 0:
            break
    return transferred, failed, n_touch


@njit(cache=True)
def _decay_live_rows(J_rows, live, n_live, keep, mask):
    """Decay only the live (nonzero) J rows; returns (flow, new n_live).

    Rows whose maximum falls below 1e-280 are flushed to exact zero and
    dropped from the live set: the decay is multiplicative, so untouched
    rows only shrink, and 1e-280 is ~270 orders of magnitude below any
    observable.  This keeps the per-iteration decay cost proportional to
    the worked region instead of the lattice volume."""
    n_nb = J_rows.shape[1]
    tot = 0.0
    m = 0
    for i in range(n_live):
        code = live[i]
        row_max = 0.0
        for k in range(n_nb):
            v = J_rows[code, k] * keep
            J_rows[code, k] = v
            tot += v
            if v > row_max:
                row_max = v
        if row_max < 1e-280:
            for k in range(n_nb):
                J_rows[code, k] = 0.0
            mask[code] = False
        else:
            live[m] = code
            m += 1
    return tot, m


class _DecayTracker:
    """Bookkeeping of which (level, site) preference rows are nonzero."""

    def __init__(self, n_rows):
        self.mask = np.zeros(n_rows, dtype=bool)
        self.live = np.empty(256, dtype=np.int64)
        self.n_live = 0

    @classmethod
    def from_state(cls, state):
        n_rows = state.J.shape[0] * state.J.shape[1]
        tracker = cls(n_rows)
        rows = state.J.reshape(n_rows, -1)
        nonzero = np.flatnonzero(rows.any(axis=1))
        tracker.add(nonzero.astype(np.int64))
        return tracker

    def add(self, codes):
        new = codes[~self.mask[codes]]
        if new.size == 0:
            return
        self.mask[new] = True
        needed = self.n_live + new.size
        if needed > self.live.size:
            grown = np.empty(max(needed, 2 * self.live.size), dtype=np.int64)
            grown[:self.n_live] = self.live[:self.n_live]
            self.live = grown
        self.live[self.n_live:needed] = new
        self.n_live = needed

    def decay(self, J, keep):
        J_rows = J.reshape(-1, J.shape[2])
        flow_val, self.n_live = _decay_live_rows(
            J_rows, self.live, self.n_live, keep, self.mask)
        return flow_val


# ---------------------------------------------------------------------------
# pure-Python reference path (oracle; mirrors the kernel's draw order)
# ---------------------------------------------------------------------------

def distribute_site(state, level, site, beta, rng,
                    update_mode=UpdateMode.PER_UNIT,
                    variant=Variant.WORKING_MANAGERS):
    """Distribute one site's surplus to its downstream neighbours.

    Returns the number of units pushed (0 if the site has no surplus).
    Raises FailureAtBottom for a bottom-level site holding surplus.
    Mirrors the compiled kernel operation-for-operation, so with a shared
    Generator both paths make identical choices.
    """
    geom = state.geometry
    qs = int(state.q[level, site])
    if qs < 2:
        return 0
    if level == geom.L_z - 1:
        raise FailureAtBottom(f"site {site} at bottom level holds {qs} units")
    keep_one = variant is Variant.WORKING_MANAGERS
    surplus = qs - 1 if keep_one else qs
    Jrow = state.J[level, site]
    nbrs = geom.downstream_neighbors(site)
    n_nb = geom.n_nb
    logits = beta * Jrow
    m = logits.max()
    w = np.exp(logits - m)
    tot = w.sum()
    eb = math.exp(beta)
    if update_mode is UpdateMode.PER_UNIT:
        for _ in range(surplus):
            u = rng.random() * tot
            acc = 0.0
            kc = n_nb - 1
            for k in range(n_nb):
                acc += w[k]
                if u < acc:
                    kc = k
                    break
            Jrow[kc] += 1.0
            wnew = w[kc] * eb
            if wnew > _W_RENORM:
                logits = beta * Jrow
                m = logits.max()
                w = np.exp(logits - m)
                tot = w.sum()
            else:
                tot += wnew - w[kc]
                w[kc] = wnew
            state.q[level + 1, nbrs[kc]] += 1
    else:
        counts = np.zeros(n_nb, dtype=np.int64)
        for _ in range(surplus):
            u = rng.random() * tot
            acc = 0.0
            kc = n_nb - 1
            for k in range(n_nb):
                acc += w[k]
                if u < acc:
                    kc = k
                    break
            counts[kc] += 1
        Jrow += counts
        # neighbour sites can repeat when L == 2; accumulate, don't assign
        np.add.at(state.q[level + 1], nbrs, counts)
    state.q[level, site] = qs - surplus
    return surplus


def run_iteration_reference(state, config, rng, check_conservation=False):
    """Slow-path run_iteration: plain Python, optional step-by-step
    conservation asserts.  Consumes the RNG identically to the kernel."""
    geom = config.geometry
    n_sites = geom.n_sites_per_level
    keep_one = config.variant is Variant.WORKING_MANAGERS
    state.q[0, geom.center_site()] = config.Q
    transferred = 0
    failed = False
    peak = np.zeros_like(state.q)
    for z in range(geom.L_z):
        for s in range(n_sites):
            if state.q[z, s] < 2:
                continue
            peak[z, s] = state.q[z, s]
            try:
                transferred += distribute_site(
                    state, z, s, config.beta, rng,
                    update_mode=config.update_mode, variant=config.variant)
            except FailureAtBottom:
                failed = True
            if check_conservation:
                assert state.q.sum() == config.Q, "unit conservation violated"
    active_codes = np.flatnonzero(state.q.reshape(-1) >= 1)
    active_loads = state.q.reshape(-1)[active_codes].copy()
    active_charges = np.maximum(peak, state.q).reshape(-1)[active_codes]
    depth = int(active_codes.max() // n_sites)
    flow = _apply_decay(state, config.gamma)
    state.q[:] = 0
    return IterationOutcome(depth=depth, failed=failed,
                            units_transferred=transferred,
                            active_codes=active_codes.astype(np.int64),
                            active_loads=active_loads,
                            active_charges=active_charges, flow=flow)


def _apply_decay(state, gamma):
    state.J *= (1.0 - gamma)
    return float(state.J.sum())


# ---------------------------------------------------------------------------
# fast path
# ---------------------------------------------------------------------------

def _touched_capacity(geom, Q):
    return min(geom.L_z * geom.n_sites_per_level, geom.L_z * Q) + 1


def run_iteration(state, config, rng, nbr_table=None, touched=None,
                  accumulator=None, tracker=None, peak=None):
    """Execute one iteration on `state` and return its IterationOutcome.

    All workloads must be zero on entry; they are zero again on return.
    If an accumulator is given, window profile statistics are recorded
    from the pre-decay state.
    """
    geom = config.geometry
    n_sites = geom.n_sites_per_level
    if nbr_table is None:
        nbr_table = geom.neighbor_table()
    if touched is None:
        touched = np.empty(_touched_capacity(geom, config.Q), dtype=np.int64)
    if tracker is None:
        tracker = _DecayTracker.from_state(state)
    if peak is None:
        peak = np.zeros_like(state.q)
    center = geom.center_site()
    state.q[0, center] = config.Q
    touched[0] = center
    transferred, failed, n_touch = _sweep_kernel(
        state.q, state.J, nbr_table, float(config.beta),
        config.variant is Variant.WORKING_MANAGERS,
        config.update_mode is UpdateMode.PER_UNIT,
        peak, touched, 1, center, rng)
    codes = np.sort(touched[:n_touch].copy())
    q_flat = state.q.reshape(-1)
    peak_flat = peak.reshape(-1)
    loads = q_flat[codes]
    occupied = loads > 0
    active_codes = codes[occupied]
    active_loads = loads[occupied].copy()
    active_charges = np.maximum(peak_flat[codes], loads)[occupied]
    depth = int(active_codes[-1] // n_sites)
    if accumulator is not None:
        accumulator.update(active_codes, active_loads, state.J,
                           charges=active_charges)
    tracker.add(codes)  # any reinforced row this iteration was also touched
    flow = tracker.decay(state.J, 1.0 - config.gamma)
    q_flat[codes] = 0
    peak_flat[codes] = 0
    return IterationOutcome(depth=depth, failed=bool(failed),
                            units_transferred=int(transferred),
                            active_codes=active_codes,
                            active_loads=active_loads,
                            active_charges=active_charges, flow=float(flow))


def run(config: SimConfig, collect_outcomes=False, keep_state=False) -> RunSummary:
    """Run config.iterations iterations from a fresh state.

    Output is bit-identical for identical (config, seed).  Set
    collect_outcomes to retain the full IterationOutcome stream (memory
    grows with iterations x active sites); keep_state to retain the final
    lattice state (for load/preference snapshots).
    """
    config.validate()
    geom = config.geometry
    n_total = geom.L_z * geom.n_sites_per_level
    state = make_state(geom)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    nbr_table = geom.neighbor_table()
    touched = np.empty(_touched_capacity(geom, config.Q), dtype=np.int64)
    tracker = _DecayTracker(geom.L_z * geom.n_sites_per_level)
    peak = np.zeros_like(state.q)

    T = config.iterations
    window = config.effective_window
    win_start = T - window
    acc = ProfileAccumulator(geom)
    flow = np.zeros(T)
    depth = np.zeros(T, dtype=np.int64)
    n_active = np.zeros(T, dtype=np.int64)
    n_flux = np.zeros(T, dtype=np.int64)
    units = np.zeros(T, dtype=np.int64)
    failed = np.zeros(T, dtype=bool)
    ever_active = np.zeros(n_total, dtype=bool)
    prev_codes = np.empty(0, dtype=np.int64)
    outcomes = [] if collect_outcomes else None
    last = None

    for t in range(T):
        out = run_iteration(state, config, rng, nbr_table, touched,
                            accumulator=acc if t >= win_start else None,
                            tracker=tracker, peak=peak)
        flow[t] = out.flow
        depth[t] = out.depth
        n_active[t] = out.active_codes.size
        n_flux[t] = symmetric_difference_size(prev_codes, out.active_codes)
        units[t] = out.units_transferred
        failed[t] = out.failed
        ever_active[out.active_codes] = True
        prev_codes = out.active_codes
        last = out
        if outcomes is not None:
            outcomes.append(out)

    if last is None:
        final_codes = np.empty(0, dtype=np.int64)
        final_loads = np.empty(0, dtype=np.int64)
        final_charges = np.empty(0, dtype=np.int64)
    else:
        final_codes, final_loads = last.active_codes, last.active_loads
        final_charges = last.active_charges
    return RunSummary(config=config, seed=config.seed, window=window,
                      flow=flow, depth=depth, n_active=n_active,
                      n_flux=n_flux, units_transferred=units, failed=failed,
                      n_t=int(ever_active.sum()), profile=acc.finalize(),
                      final_active_codes=final_codes,
                      final_active_loads=final_loads,
                      final_active_charges=final_charges,
                      outcomes=outcomes,
                      state=state if keep_state else None)
