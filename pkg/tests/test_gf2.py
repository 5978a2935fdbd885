from __future__ import annotations

import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chamon import gf2


def dense_rank(bits: np.ndarray) -> int:
    """Gaussian elimination with rows held as Python integers."""
    rows = [int("".join("1" if b else "0" for b in row) or "0", 2) for row in bits]
    rank = 0
    while rows:
        pivot = max(rows)
        rows.remove(pivot)
        if pivot == 0:
            break
        rank += 1
        top = pivot.bit_length() - 1
        rows = [r ^ pivot if (r >> top) & 1 else r for r in rows]
    return rank


matrices = st.tuples(st.integers(1, 12), st.integers(1, 140)).flatmap(
    lambda s: arrays(np.bool_, s)
)


@given(matrices)
def test_pack_round_trip(bits):
    assert np.array_equal(gf2.unpack(gf2.pack(bits), bits.shape[1]), bits)


@given(matrices)
def test_rank_matches_dense_oracle(bits):
    assert gf2.rank(gf2.pack(bits), bits.shape[1]) == dense_rank(bits)


@given(matrices)
def test_nullspace_is_kernel_of_full_dimension(bits):
    ncols = bits.shape[1]
    basis = gf2.unpack(gf2.nullspace(gf2.pack(bits), ncols), ncols)
    assert basis.shape[0] == ncols - dense_rank(bits)
    assert not ((bits.astype(np.int64) @ basis.T.astype(np.int64)) % 2).any()
    if basis.shape[0]:
        assert dense_rank(basis) == basis.shape[0]


@given(matrices)
def test_parity_and_popcount(bits):
    words = gf2.pack(bits)
    assert np.array_equal(gf2.popcount(words), bits.sum(axis=1))
    assert np.array_equal(gf2.parity(words), bits.sum(axis=1) % 2)
