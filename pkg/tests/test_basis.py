from math import comb

import numpy as np
import pytest

from nhmbl.basis import MAX_SITES, bipartition_shape, build_sector_basis


def test_two_sites():
    basis = build_sector_basis(2)
    assert basis.states.tolist() == [0b01, 0b10]
    assert basis.dim == 2


def test_four_sites_dim():
    assert build_sector_basis(4).dim == 6


def test_sixteen_sites_dim_matches_exact_binomial():
    # brute-force count of 16-bit words with popcount 8
    expected = sum(1 for s in range(1 << 16) if bin(s).count("1") == 8)
    assert expected == comb(16, 8) == 12870
    assert build_sector_basis(16).dim == expected


@pytest.mark.parametrize("n", [2, 4, 6, 8, 10])
def test_states_sorted_half_filled_and_complete(n):
    basis = build_sector_basis(n)
    states = basis.states
    assert np.all(np.diff(states) > 0)
    assert all(bin(int(s)).count("1") == n // 2 for s in states)
    brute = [s for s in range(1 << n) if bin(s).count("1") == n // 2]
    assert states.tolist() == brute


@pytest.mark.parametrize("n", [2, 6, 12])
def test_index_round_trip(n):
    basis = build_sector_basis(n)
    idx = basis.index_of(basis.states)
    assert np.array_equal(idx, np.arange(basis.dim))
    last = basis.dim - 1
    assert basis.index_of(int(basis.states[last])) == last


def test_index_of_rejects_foreign_configuration():
    with pytest.raises(KeyError):
        build_sector_basis(4).index_of(0b0111)


@pytest.mark.parametrize("bad", [0, 1, 3, 7, -2, 22, 2.0])
def test_invalid_sizes(bad):
    with pytest.raises(ValueError):
        build_sector_basis(bad)


def test_cap_is_enforced():
    assert MAX_SITES == 20
    with pytest.raises(ValueError, match="cap"):
        build_sector_basis(22)


def test_states_are_immutable():
    basis = build_sector_basis(4)
    with pytest.raises(ValueError):
        basis.states[0] = 0


def test_occupations_follow_lsb_convention():
    basis = build_sector_basis(4)
    occ = basis.occupations()
    row = basis.index_of(0b0110)
    # sites 2 and 3 up
    assert occ[row].tolist() == [0, 1, 1, 0]


def test_bipartition_two_sites():
    cut = bipartition_shape(build_sector_basis(2))
    basis = build_sector_basis(2)
    i = basis.index_of(0b01)  # site 1 up, site 2 down
    assert (cut.rows[i], cut.cols[i]) == (1, 0)
    assert cut.shape == (2, 2)


def test_bipartition_four_sites():
    basis = build_sector_basis(4)
    cut = bipartition_shape(basis)
    i = basis.index_of(0b0110)
    # A = sites (1, 2) = (down, up); B = sites (3, 4) = (up, down)
    assert cut.rows[i] == 0b10
    assert cut.cols[i] == 0b01


def test_bipartition_six_sites_cell_count():
    basis = build_sector_basis(6)
    cut = bipartition_shape(basis)
    # enumerate by hand: each state gives one (lower 3 bits, upper 3 bits) cell
    cells = {(s & 7, s >> 3) for s in range(64) if bin(s).count("1") == 3}
    assert len(cells) == 20
    assert set(zip(cut.rows.tolist(), cut.cols.tolist())) == cells


@pytest.mark.parametrize("n", [2, 4, 6, 8, 10, 12])
def test_bipartition_reassembles_and_is_complete(n):
    basis = build_sector_basis(n)
    cut = bipartition_shape(basis)
    half = n // 2
    assert np.array_equal(cut.rows | (cut.cols << half), basis.states)
    assert np.all(cut.rows < (1 << half)) and np.all(cut.cols < (1 << (n - half)))
    assert len(set(zip(cut.rows.tolist(), cut.cols.tolist()))) == basis.dim
    # for each A pattern with k up spins there are C(half, half - k) B fillings
    total = sum(comb(half, half - bin(a).count("1")) for a in range(1 << half))
    assert total == basis.dim


def test_bipartition_rejects_bad_cut():
    with pytest.raises(ValueError):
        bipartition_shape(build_sector_basis(4), cut=0)


@pytest.mark.parametrize("n", [4, 8, 14])
def test_occupations_conserve_popcount(n):
    assert np.all(build_sector_basis(n).occupations().sum(axis=1) == n // 2)
