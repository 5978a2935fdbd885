"""Bit-packed GF(2) linear algebra on ``uint64`` words.

Rows are packed little-endian within each 64-bit word: column ``c`` lives in word
``c >> 6`` at bit ``c & 63``.
"""

from __future__ import annotations

import numpy as np

_WORD = 64


def n_words(ncols: int) -> int:
    return (ncols + _WORD - 1) // _WORD


def pack(bits: np.ndarray) -> np.ndarray:
    """Pack a ``(..., ncols)`` 0/1 array into ``(..., n_words)`` uint64 words."""
    bits = np.asarray(bits, dtype=bool)
    ncols = bits.shape[-1]
    pad = n_words(ncols) * _WORD - ncols
    if pad:
        bits = np.concatenate([bits, np.zeros(bits.shape[:-1] + (pad,), dtype=bool)], axis=-1)
    as_bytes = np.packbits(bits, axis=-1, bitorder="little")
    return np.ascontiguousarray(as_bytes).view("<u8")


def unpack(words: np.ndarray, ncols: int) -> np.ndarray:
    words = np.ascontiguousarray(words, dtype="<u8")
    bits = np.unpackbits(words.view(np.uint8), axis=-1, bitorder="little")
    return bits[..., :ncols].astype(bool)


def popcount(words: np.ndarray, axis: int = -1) -> np.ndarray:
    return np.bitwise_count(words).sum(axis=axis, dtype=np.int64)


def parity(words: np.ndarray, axis: int = -1) -> np.ndarray:
    return (popcount(words, axis) & 1).astype(np.uint8)


def _column(m: np.ndarray, col: int) -> np.ndarray:
    return ((m[:, col >> 6] >> np.uint64(col & 63)) & np.uint64(1)).astype(bool)


def rref(words: np.ndarray, ncols: int) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form of a packed matrix.

    Returns the reduced matrix (a copy, zero rows last) and the pivot columns in
    row order.
    """
    m = np.array(words, dtype=np.uint64, copy=True)
    nrows = m.shape[0]
    pivots: list[int] = []
    row = 0
    for col in range(ncols):
        if row == nrows:
            break
        bits = _column(m[row:], col)
        hits = np.flatnonzero(bits)
        if hits.size == 0:
            continue
        p = row + hits[0]
        if p != row:
            m[[row, p]] = m[[p, row]]
        mask = _column(m, col)
        mask[row] = False
        m[mask] ^= m[row]
        pivots.append(col)
        row += 1
    return m, pivots


def rank(words: np.ndarray, ncols: int) -> int:
    return len(rref(words, ncols)[1])


def nullspace(words: np.ndarray, ncols: int) -> np.ndarray:
    """Packed basis of ``{v : M v = 0}``, one basis vector per row."""
    r, pivots = rref(words, ncols)
    free = np.setdiff1d(np.arange(ncols), pivots)
    dense = unpack(r[: len(pivots)], ncols)
    basis = np.zeros((free.size, ncols), dtype=bool)
    basis[np.arange(free.size), free] = True
    if pivots:
        basis[:, pivots] = dense[:, free].T
    return pack(basis)
