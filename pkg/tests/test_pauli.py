from __future__ import annotations

import numpy as np
import pytest

from chamon.lattice import X, Y, Z, build_lattice, check_matrix, stabilizer_support
from chamon.pauli import (
    PauliOp,
    cache_path,
    commutes,
    derive_logicals,
    is_logical_failure,
    logical_basis,
    save_logicals,
    syndrome_of,
    validate_basis,
)


def random_op(rng, n) -> PauliOp:
    return PauliOp.from_codes(rng.integers(0, 4, n))


def test_algebra_basics():
    n = 5
    a = PauliOp.from_paulis(n, [0, 1, 2], [X, Y, Z])
    assert a.weight == 3
    assert (a * a).is_identity()
    assert a.codes().tolist() == [X, Y, Z, 0, 0]
    assert PauliOp.single(n, 3, "Y") == PauliOp.from_paulis(n, [3], [Y])
    # X * Z = Y up to phase
    assert PauliOp.single(n, 0, X) * PauliOp.single(n, 0, Z) == PauliOp.single(n, 0, Y)
    assert not commutes(PauliOp.single(n, 0, X), PauliOp.single(n, 0, Z))
    assert commutes(PauliOp.single(n, 0, X), PauliOp.single(n, 1, Z))
    with pytest.raises(ValueError):
        commutes(PauliOp.identity(3), PauliOp.identity(4))


def test_syndrome_is_linear():
    lat = build_lattice(6)
    rng = np.random.default_rng(1)
    for _ in range(1000):
        p, q = random_op(rng, lat.n), random_op(rng, lat.n)
        assert np.array_equal(syndrome_of(lat, p * q), syndrome_of(lat, p) ^ syndrome_of(lat, q))


def test_syndrome_matches_check_matrix():
    lat = build_lattice(4)
    h = check_matrix(lat).astype(np.int64)
    rng = np.random.default_rng(2)
    for _ in range(50):
        e = random_op(rng, lat.n)
        v = np.concatenate([e.z, e.x]).astype(np.int64)  # symplectic product with [Hx | Hz]
        assert np.array_equal(syndrome_of(lat, e), (h @ v) % 2)


@pytest.mark.c6
@pytest.mark.parametrize("d", [4, 6])
def test_single_paulis_make_four_defects_in_pairs(d):
    lat = build_lattice(d)
    planes = lat.symmetries
    for q in range(lat.n):
        for pauli in (X, Y, Z):
            s = syndrome_of(lat, PauliOp.single(lat.n, q, pauli))
            assert s.sum() == 4
            per_orient: dict = {}
            for plane in planes:
                k = int(s[plane.members].sum())
                assert k in (0, 2)
                if k:
                    per_orient[plane.orientation] = per_orient.get(plane.orientation, 0) + 1
            assert sorted(per_orient.values()) == [2, 2, 2, 2]


@pytest.mark.parametrize("d", [4, 6, 8])
def test_random_errors_have_even_plane_parity(d):
    lat = build_lattice(d)
    rng = np.random.default_rng(d)
    for _ in range(1000):
        s = syndrome_of(lat, random_op(rng, lat.n))
        for plane in lat.symmetries:
            assert s[plane.members].sum() % 2 == 0


@pytest.mark.c6
@pytest.mark.parametrize("d", [4, 6, 8])
def test_logical_basis_symplectic_pairing(d, lattices):
    lat = lattices[d]
    basis = derive_logicals(lat)
    assert basis.k == 2 * d
    assert np.array_equal(basis.pairing_matrix(), np.eye(basis.k, dtype=np.uint8))
    assert validate_basis(lat, basis)
    # a-a and b-b products vanish too
    for ops in ((basis.a_x, basis.a_z), (basis.b_x, basis.b_z)):
        ax, az = ops[0].astype(np.int64), ops[1].astype(np.int64)
        assert not ((ax @ az.T + az @ ax.T) % 2).any()


def test_logicals_are_not_stabilizers(lattices):
    lat = lattices[4]
    basis = derive_logicals(lat)
    h = check_matrix(lat)
    from tests_support import in_row_space

    for op in basis.operators():
        assert not in_row_space(h, np.concatenate([op.x, op.z]))


def test_logical_failure_examples(lattices, bases):
    lat, basis = lattices[6], bases[6]
    assert not is_logical_failure(basis, PauliOp.identity(lat.n), lat)
    assert not is_logical_failure(basis, stabilizer_support(lat, (2, 2, 2)), lat)
    a, b = basis.pairs[3]
    assert is_logical_failure(basis, a, lat)
    assert is_logical_failure(basis, b * stabilizer_support(lat, (4, 2, 2)), lat)
    with pytest.raises(ValueError):
        is_logical_failure(basis, PauliOp.single(lat.n, 0, X), lat)


def test_logical_cache_round_trip_and_recovery(tmp_path, lattices):
    lat = lattices[4]
    first = logical_basis(lat, cache_dir=tmp_path)
    path = cache_path(4, tmp_path)
    assert path.exists()
    again = logical_basis(lat, cache_dir=tmp_path)
    assert np.array_equal(again.a_x, first.a_x) and np.array_equal(again.b_z, first.b_z)
    path.write_bytes(b"not a cache")
    assert validate_basis(lat, logical_basis(lat, cache_dir=tmp_path))
    # a cache for the wrong lattice is rejected and rebuilt
    save_logicals(derive_logicals(lattices[6]), path)
    assert validate_basis(lat, logical_basis(lat, cache_dir=tmp_path))
