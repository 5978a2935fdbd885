"""Cubic Chamon lattice: sites, stabilizers, check matrix and symmetry planes.

Public coordinates are 1-based ``(x, y, z)`` triples with ``1 <= x, y, z <= d``.
Internally everything is 0-based so that periodic wrapping is plain ``% d``.
A vertex whose 1-based coordinate sum is odd holds a qubit; an even vertex
holds a stabilizer ``X X Y Y Z Z`` acting on its x-, y- and z-neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator

import numpy as np

Coord = tuple[int, int, int]

# Pauli labels used across the package; 0 is the identity.
I, X, Y, Z = 0, 1, 2, 3
PAULI_NAMES = "IXYZ"

# Unit steps in neighbour order +x, -x, +y, -y, +z, -z.
_STEPS = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.int64
)
# The Pauli a stabilizer applies on each neighbour, same order as _STEPS.
_STAB_PAULIS = np.array([X, X, Y, Y, Z, Z], dtype=np.int8)

ORIENTATIONS: tuple[Coord, ...] = ((1, 1, 1), (1, 1, -1), (1, -1, 1), (1, -1, -1))


class LatticeError(ValueError):
    """Invalid lattice size or a coordinate of the wrong parity."""


@dataclass(frozen=True)
class SymmetryPlane:
    """Stabilizers ``v`` with ``(r . v) mod d == offset`` (1-based ``v``)."""

    orientation: Coord
    offset: int
    members: np.ndarray  # sorted stabilizer indices

    @property
    def label(self) -> str:
        sign = "".join("+" if c > 0 else "-" for c in self.orientation)
        return f"r={sign} C={self.offset}"


class ChamonLattice:
    """The ``d x d x d`` periodic Chamon lattice with ``n = d**3 / 2`` qubits.

    Qubits and stabilizers are each indexed ``0 .. n-1`` in lexicographic order
    of their coordinates. Instances are immutable after construction.
    """

    def __init__(self, d: int):
        if not isinstance(d, (int, np.integer)) or d < 4 or d % 2:
            raise LatticeError(f"distance must be an even integer >= 4, got {d!r}")
        self.d = int(d)
        d = self.d
        grid = np.indices((d, d, d)).reshape(3, -1).T  # 0-based, lexicographic
        is_qubit = grid.sum(axis=1) % 2 == 0  # 1-based sum = 0-based sum + 3
        self.qubit_coords = grid[is_qubit]
        self.stab_coords = grid[~is_qubit]
        self.n = len(self.qubit_coords)

        site_index = np.empty(d**3, dtype=np.int64)
        site_index[is_qubit] = np.arange(self.n)
        site_index[~is_qubit] = np.arange(self.n)
        self._site_index = site_index.reshape(d, d, d)
        for arr in (self.qubit_coords, self.stab_coords, self._site_index):
            arr.setflags(write=False)

    def __repr__(self) -> str:
        return f"ChamonLattice(d={self.d}, n={self.n})"

    # -- coordinates -------------------------------------------------------

    def index_of(self, coords: np.ndarray) -> np.ndarray:
        """Index of the site(s) at 0-based ``coords`` (wrapped), qubit or stabilizer."""
        c = np.asarray(coords) % self.d
        return self._site_index[c[..., 0], c[..., 1], c[..., 2]]

    @staticmethod
    def parity(c: Coord) -> int:
        return (c[0] + c[1] + c[2]) % 2

    def _to0(self, c: Coord) -> np.ndarray:
        if len(c) != 3:
            raise LatticeError(f"expected a 3-coordinate, got {c!r}")
        return (np.asarray(c, dtype=np.int64) - 1) % self.d

    def qubit_index(self, c: Coord) -> int:
        if self.parity(c) != 1:
            raise LatticeError(f"{c} has even parity and holds a stabilizer, not a qubit")
        return int(self.index_of(self._to0(c)))

    def stab_index(self, c: Coord) -> int:
        if self.parity(c) != 0:
            raise LatticeError(f"{c} has odd parity and holds a qubit, not a stabilizer")
        return int(self.index_of(self._to0(c)))

    def qubit_coord(self, q: int) -> Coord:
        x, y, z = self.qubit_coords[q] + 1
        return int(x), int(y), int(z)

    def stab_coord(self, s: int) -> Coord:
        x, y, z = self.stab_coords[s] + 1
        return int(x), int(y), int(z)

    # -- adjacency ---------------------------------------------------------

    @cached_property
    def stab_qubits(self) -> np.ndarray:
        """``(n, 6)`` qubits of each stabilizer, order +x, -x, +y, -y, +z, -z."""
        nb = self.stab_coords[:, None, :] + _STEPS[None, :, :]
        out = self.index_of(nb)
        out.setflags(write=False)
        return out

    @cached_property
    def flips(self) -> np.ndarray:
        """``(4, n, 4)`` table: ``flips[P, q]`` are the stabilizers flipped by Pauli P on q.

        ``flips[0]`` is unused. X on q anticommutes with the Y and Z terms, i.e. the
        stabilizers at q +- y and q +- z; Y with q +- x, q +- z; Z with q +- x, q +- y.
        """
        qc = self.qubit_coords[:, None, :]
        out = np.zeros((4, self.n, 4), dtype=np.int64)
        out[X] = self.index_of(qc + _STEPS[None, [2, 3, 4, 5]])
        out[Y] = self.index_of(qc + _STEPS[None, [0, 1, 4, 5]])
        out[Z] = self.index_of(qc + _STEPS[None, [0, 1, 2, 3]])
        out.setflags(write=False)
        return out

    @cached_property
    def stab_xz_support(self) -> tuple[np.ndarray, np.ndarray]:
        """Qubits where each stabilizer has an x-bit (X or Y) and a z-bit (Y or Z)."""
        q = self.stab_qubits
        return q[:, [0, 1, 2, 3]].copy(), q[:, [2, 3, 4, 5]].copy()

    # -- symmetries --------------------------------------------------------

    def plane_offsets(self, orientation: Coord) -> np.ndarray:
        """``(r . v) mod d`` for every stabilizer ``v`` (1-based coordinates)."""
        r = np.asarray(orientation, dtype=np.int64)
        return ((self.stab_coords + 1) @ r) % self.d

    @cached_property
    def symmetries(self) -> tuple[SymmetryPlane, ...]:
        return tuple(enumerate_symmetries(self))

    def translate_qubits(self, shift: Coord) -> np.ndarray:
        """Permutation of qubit indices under a parity-preserving lattice translation."""
        if sum(shift) % 2:
            raise LatticeError("translation must preserve parity")
        return self.index_of(self.qubit_coords + np.asarray(shift))

    def translate_stabs(self, shift: Coord) -> np.ndarray:
        if sum(shift) % 2:
            raise LatticeError("translation must preserve parity")
        return self.index_of(self.stab_coords + np.asarray(shift))


def build_lattice(d: int) -> ChamonLattice:
    return ChamonLattice(d)


def stabilizer_support(lattice: ChamonLattice, v: Coord):
    """The stabilizer on even vertex ``v`` as a :class:`~chamon.pauli.PauliOp`."""
    from chamon.pauli import PauliOp

    s = lattice.stab_index(v)
    return PauliOp.from_paulis(lattice.n, lattice.stab_qubits[s], _STAB_PAULIS)


def enumerate_symmetries(lattice: ChamonLattice) -> list[SymmetryPlane]:
    """All ``2d`` symmetry planes: 4 orientations times ``d/2`` even offsets."""
    planes = []
    for r in ORIENTATIONS:
        offsets = lattice.plane_offsets(r)
        for c in range(0, lattice.d, 2):
            members = np.flatnonzero(offsets == c)
            members.setflags(write=False)
            planes.append(SymmetryPlane(r, c, members))
    return planes


def check_matrix(lattice: ChamonLattice) -> np.ndarray:
    """Dense ``n x 2n`` binary matrix ``[H_x | H_z]``; row i is stabilizer i."""
    n = lattice.n
    h = np.zeros((n, 2 * n), dtype=np.uint8)
    rows = np.arange(n)[:, None]
    xs, zs = lattice.stab_xz_support
    h[rows, xs] = 1
    h[rows, n + zs] = 1
    return h


def check_matrix_rows(lattice: ChamonLattice) -> Iterator[list[int]]:
    """Sorted nonzero column indices of each check-matrix row."""
    n = lattice.n
    xs, zs = lattice.stab_xz_support
    for i in range(n):
        yield sorted(xs[i].tolist() + (zs[i] + n).tolist())


def export_check_matrix(lattice: ChamonLattice, path: str | Path) -> None:
    """Write the check matrix as text, one row per line of sorted column indices."""
    with open(path, "w") as fh:
        fh.write(f"# chamon check matrix d={lattice.d} rows={lattice.n} cols={2 * lattice.n}\n")
        for cols in check_matrix_rows(lattice):
            fh.write(" ".join(map(str, cols)) + "\n")


def load_check_matrix(path: str | Path) -> np.ndarray:
    rows: list[list[int]] = []
    ncols = 0
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                ncols = int(line.rsplit("cols=", 1)[1])
                continue
            rows.append([int(t) for t in line.split()])
    h = np.zeros((len(rows), ncols), dtype=np.uint8)
    for i, cols in enumerate(rows):
        h[i, cols] = 1
    return h
