"""Hyper-cubic lattice geometry with helical (periodic) boundaries.

Sites within one hyper-plane of linear size L are addressed by a single
helical index s = sum_k coords[k] * L**k, 0 <= s < L**d.  Every site has
2d+1 downstream neighbours on the level below: the straight-down site plus
the two helical shifts +-L**k along each axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LatticeGeometry:
    """Shape of the (d+1)-dimensional lattice: d in-plane dimensions of
    linear size L, stacked L_z levels deep."""

    d: int
    L: int
    L_z: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.L < 2:
            raise ValueError(f"L must be >= 2, got {self.L}")
        if self.L_z < 1:
            raise ValueError(f"L_z must be >= 1, got {self.L_z}")

    @property
    def n_sites_per_level(self) -> int:
        return self.L ** self.d

    @property
    def n_nb(self) -> int:
        return 2 * self.d + 1

    def site_of_coords(self, coords) -> int:
        """Helical index of a coordinate tuple (length d, entries in [0, L))."""
        coords = tuple(coords)
        if len(coords) != self.d:
            raise ValueError(f"expected {self.d} coordinates, got {len(coords)}")
        for c in coords:
            if not 0 <= c < self.L:
                raise ValueError(f"coordinate {c} out of range [0, {self.L})")
        return sum(int(c) * self.L ** k for k, c in enumerate(coords))

    def coords_of_site(self, site: int):
        """Inverse of site_of_coords."""
        if not 0 <= site < self.n_sites_per_level:
            raise ValueError(f"site {site} out of range [0, {self.n_sites_per_level})")
        return tuple((site // self.L ** k) % self.L for k in range(self.d))

    def center_site(self) -> int:
        """Site with coordinate floor(L/2) along every axis."""
        return self.site_of_coords((self.L // 2,) * self.d)

    def neighbor_offsets(self) -> np.ndarray:
        """Helical index offsets of the 2d+1 downstream slots.

        Slot 0 is straight down (offset 0); then +L**k, -L**k for each axis
        k in ascending order.  This ordering is fixed: preference weights are
        stored per slot and output files reference slots by number.
        """
        n = self.n_sites_per_level
        offsets = [0]
        for k in range(self.d):
            step = self.L ** k
            offsets.append(step % n)
            offsets.append((-step) % n)
        return np.array(offsets, dtype=np.int64)

    def downstream_neighbors(self, site: int) -> np.ndarray:
        """Indices (on the level below) of the 2d+1 downstream neighbours."""
        if not 0 <= site < self.n_sites_per_level:
            raise ValueError(f"site {site} out of range [0, {self.n_sites_per_level})")
        return (site + self.neighbor_offsets()) % self.n_sites_per_level

    def neighbor_table(self) -> np.ndarray:
        """(n_sites_per_level, 2d+1) table of downstream neighbour indices."""
        sites = np.arange(self.n_sites_per_level, dtype=np.int64)[:, None]
        return (sites + self.neighbor_offsets()[None, :]) % self.n_sites_per_level


@dataclass
class LatticeState:
    """Mutable per-run state: integer workloads q per (level, site) and
    preference weights J per directed downstream link (level, site, slot).

    Links out of the bottom level exist for storage regularity but are never
    reinforced; they only decay toward zero.
    """

    geometry: LatticeGeometry
    q: np.ndarray = field(repr=False)  # (L_z, L**d) int64
    J: np.ndarray = field(repr=False)  # (L_z, L**d, 2d+1) float64


def make_state(geometry: LatticeGeometry) -> LatticeState:
    """Fresh all-zero state for one simulation run."""
    n = geometry.n_sites_per_level
    q = np.zeros((geometry.L_z, n), dtype=np.int64)
    J = np.zeros((geometry.L_z, n, geometry.n_nb), dtype=np.float64)
    return LatticeState(geometry=geometry, q=q, J=J)
