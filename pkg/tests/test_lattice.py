from __future__ import annotations

import itertools

import numpy as np
import pytest

from chamon.lattice import (
    ORIENTATIONS,
    LatticeError,
    build_lattice,
    check_matrix,
    export_check_matrix,
    load_check_matrix,
    stabilizer_support,
)
from chamon.pauli import commutes


def symplectic_gram(h: np.ndarray) -> np.ndarray:
    n = h.shape[1] // 2
    hx, hz = h[:, :n].astype(np.int64), h[:, n:].astype(np.int64)
    return (hx @ hz.T + hz @ hx.T) % 2


@pytest.mark.parametrize("d", [4, 6, 8])
def test_sizes(d):
    lat = build_lattice(d)
    assert lat.n == d**3 // 2
    assert lat.stab_qubits.shape == (lat.n, 6)


@pytest.mark.parametrize("d", [3, 5, 2, 0, -4])
def test_rejects_bad_sizes(d):
    with pytest.raises(LatticeError):
        build_lattice(d)


def test_check_matrix_d4_shape_and_row_weights():
    h = check_matrix(build_lattice(4))
    assert h.shape == (32, 64)
    assert (h[:, :32].sum(axis=1) == 4).all()
    assert (h[:, 32:].sum(axis=1) == 4).all()


@pytest.mark.parametrize("d", [4, 6])
def test_each_qubit_in_six_stabilizers(d):
    lat = build_lattice(d)
    counts = np.bincount(lat.stab_qubits.ravel(), minlength=lat.n)
    assert (counts == 6).all()


@pytest.mark.parametrize("d", [4, 6, 8])
def test_stabilizers_commute(d):
    assert not symplectic_gram(check_matrix(build_lattice(d))).any()


def test_stabilizer_support_pattern():
    lat = build_lattice(4)
    op = stabilizer_support(lat, (2, 2, 2))
    assert op.weight == 6
    names = {lat.qubit_coord(q): "IXYZ"[c] for q, c in enumerate(op.codes()) if c}
    assert names == {
        (3, 2, 2): "X", (1, 2, 2): "X",
        (2, 3, 2): "Y", (2, 1, 2): "Y",
        (2, 2, 3): "Z", (2, 2, 1): "Z",
    }
    other = stabilizer_support(lat, (3, 3, 2))
    assert commutes(op, other)


@pytest.mark.c6
@pytest.mark.parametrize("d", [4, 6, 8])
def test_planes_count_partition_and_product(d):
    lat = build_lattice(d)
    planes = lat.symmetries
    assert len(planes) == 2 * d
    h = check_matrix(lat)
    for r in ORIENTATIONS:
        members = np.concatenate([p.members for p in planes if p.orientation == r])
        assert np.array_equal(np.sort(members), np.arange(lat.n))
    for plane in planes:
        # the product of the plane's stabilizers is the identity
        assert not (h[plane.members].sum(axis=0) % 2).any()


def test_plane_membership_formula():
    lat = build_lattice(6)
    for plane in lat.symmetries:
        for s in plane.members[:5]:
            v = np.array(lat.stab_coord(s))
            assert (v @ np.array(plane.orientation)) % 6 == plane.offset


def test_coordinate_round_trip():
    lat = build_lattice(4)
    for c in itertools.product(range(1, 5), repeat=3):
        if sum(c) % 2:
            assert lat.qubit_coord(lat.qubit_index(c)) == c
            with pytest.raises(LatticeError):
                lat.stab_index(c)
        else:
            assert lat.stab_coord(lat.stab_index(c)) == c
            with pytest.raises(LatticeError):
                lat.qubit_index(c)


def test_coordinates_wrap():
    lat = build_lattice(4)
    assert lat.qubit_index((5, 1, 1)) == lat.qubit_index((1, 1, 1))
    assert lat.stab_index((0, 1, 1)) == lat.stab_index((4, 1, 1))


def test_translations_are_symmetries():
    lat = build_lattice(6)
    h = check_matrix(lat)
    n = lat.n
    perm_q = lat.translate_qubits((1, 1, 0))
    perm_s = lat.translate_stabs((1, 1, 0))
    moved = np.zeros_like(h)
    moved[perm_s[:, None], np.concatenate([perm_q, perm_q + n])[None, :]] = h
    assert np.array_equal(moved, h)
    with pytest.raises(LatticeError):
        lat.translate_qubits((1, 0, 0))


def test_check_matrix_export_round_trip(tmp_path):
    lat = build_lattice(4)
    path = tmp_path / "h.txt"
    export_check_matrix(lat, path)
    assert np.array_equal(load_check_matrix(path), check_matrix(lat))
