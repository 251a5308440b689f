import numpy as np
import pytest
from hypothesis import given, strategies as st

from worklattice import LatticeGeometry, make_state


def test_site_of_coords_1d_identity():
    geom = LatticeGeometry(d=1, L=30, L_z=5)
    assert geom.site_of_coords((7,)) == 7


def test_site_of_coords_2d():
    geom = LatticeGeometry(d=2, L=30, L_z=5)
    assert geom.site_of_coords((3, 2)) == 63


def test_site_of_coords_3d_max_corner():
    geom = LatticeGeometry(d=3, L=5, L_z=5)
    assert geom.site_of_coords((4, 4, 4)) == 124 == geom.n_sites_per_level - 1


def test_site_of_coords_out_of_range():
    geom = LatticeGeometry(d=2, L=4, L_z=3)
    with pytest.raises(ValueError):
        geom.site_of_coords((4, 0))
    with pytest.raises(ValueError):
        geom.site_of_coords((0, -1))


def test_geometry_counts():
    geom = LatticeGeometry(d=3, L=4, L_z=7)
    assert geom.n_sites_per_level == 64
    assert geom.n_nb == 7


def test_neighbors_1d_wrap_left_edge():
    geom = LatticeGeometry(d=1, L=30, L_z=5)
    assert geom.downstream_neighbors(0).tolist() == [0, 1, 29]


def test_neighbors_1d_interior():
    geom = LatticeGeometry(d=1, L=30, L_z=5)
    assert geom.downstream_neighbors(7).tolist() == [7, 8, 6]


def test_neighbors_2d_hand_enumerated():
    # offsets {0, +1, -1, +30, -30} mod 900 applied to site 63
    geom = LatticeGeometry(d=2, L=30, L_z=5)
    assert geom.downstream_neighbors(63).tolist() == [63, 64, 62, 93, 33]


def test_neighbors_distinct_for_L_ge_3():
    for d in (1, 2, 3):
        geom = LatticeGeometry(d=d, L=3, L_z=2)
        for s in range(geom.n_sites_per_level):
            nbrs = geom.downstream_neighbors(s)
            assert len(set(nbrs.tolist())) == geom.n_nb


def test_neighbors_L2_duplicates():
    # with L = 2 the +1 and -1 offsets coincide; duplicates are expected
    geom = LatticeGeometry(d=1, L=2, L_z=2)
    assert geom.downstream_neighbors(0).tolist() == [0, 1, 1]


def test_center_site():
    assert LatticeGeometry(d=1, L=30, L_z=5).center_site() == 15
    assert LatticeGeometry(d=2, L=30, L_z=5).center_site() == 465
    assert LatticeGeometry(d=1, L=3, L_z=5).center_site() == 1


@given(st.integers(1, 3), st.integers(2, 8), st.data())
def test_coords_round_trip(d, L, data):
    geom = LatticeGeometry(d=d, L=L, L_z=2)
    coords = tuple(data.draw(st.integers(0, L - 1)) for _ in range(d))
    assert geom.coords_of_site(geom.site_of_coords(coords)) == coords


@given(st.integers(1, 3), st.integers(3, 8), st.data())
def test_neighbors_translation_invariant(d, L, data):
    geom = LatticeGeometry(d=d, L=L, L_z=2)
    n = geom.n_sites_per_level
    s = data.draw(st.integers(0, n - 1))
    shifted = geom.downstream_neighbors((s + 1) % n)
    expected = (geom.downstream_neighbors(s) + 1) % n
    assert shifted.tolist() == expected.tolist()


def test_neighbor_table_matches_per_site():
    geom = LatticeGeometry(d=2, L=5, L_z=2)
    table = geom.neighbor_table()
    for s in range(geom.n_sites_per_level):
        assert table[s].tolist() == geom.downstream_neighbors(s).tolist()


def test_make_state_shapes_and_zeros():
    geom = LatticeGeometry(d=2, L=4, L_z=6)
    state = make_state(geom)
    assert state.q.shape == (6, 16)
    assert state.J.shape == (6, 16, 5)
    assert not state.q.any()
    assert not state.J.any()


def test_bad_geometry_rejected():
    with pytest.raises(ValueError):
        LatticeGeometry(d=0, L=4, L_z=2)
    with pytest.raises(ValueError):
        LatticeGeometry(d=1, L=1, L_z=2)
    with pytest.raises(ValueError):
        LatticeGeometry(d=1, L=4, L_z=0)
