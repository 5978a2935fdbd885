"""Small oracles shared by the tests."""

from __future__ import annotations

import numpy as np


def in_row_space(h: np.ndarray, v: np.ndarray) -> bool:
    """Whether ``v`` is a GF(2) combination of the rows of ``h`` (dense elimination)."""
    rows = [int("".join("1" if b else "0" for b in r), 2) for r in np.asarray(h, dtype=bool)]
    target = int("".join("1" if b else "0" for b in np.asarray(v, dtype=bool)), 2)
    basis: dict[int, int] = {}
    for r in rows:
        while r:
            top = r.bit_length() - 1
            if top not in basis:
                basis[top] = r
                break
            r ^= basis[top]
    while target:
        top = target.bit_length() - 1
        if top not in basis:
            return False
        target ^= basis[top]
    return True
