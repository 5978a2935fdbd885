"""Symplectic Pauli algebra, syndromes and logical operators (phases ignored)."""

from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from chamon import gf2
from chamon.lattice import PAULI_NAMES, ChamonLattice, X, Y, Z, check_matrix

log = logging.getLogger(__name__)

CACHE_VERSION = 1


class PauliOp:
    """An n-qubit Pauli as x- and z-bit vectors; Y sets both bits."""

    __slots__ = ("x", "z")

    def __init__(self, x: np.ndarray, z: np.ndarray):
        x = np.asarray(x, dtype=bool)
        z = np.asarray(z, dtype=bool)
        if x.shape != z.shape or x.ndim != 1:
            raise ValueError("x and z parts must be 1-d arrays of equal length")
        self.x = x
        self.z = z

    @classmethod
    def identity(cls, n: int) -> PauliOp:
        return cls(np.zeros(n, dtype=bool), np.zeros(n, dtype=bool))

    @classmethod
    def from_paulis(cls, n: int, qubits, paulis) -> PauliOp:
        """Build from parallel sequences of qubit indices and Pauli codes 1..3.

        Repeated qubits multiply together.
        """
        qubits = np.asarray(qubits, dtype=np.int64)
        paulis = np.asarray(paulis, dtype=np.int64)
        x = np.zeros(n, dtype=bool)
        z = np.zeros(n, dtype=bool)
        np.logical_xor.at(x, qubits, (paulis == X) | (paulis == Y))
        np.logical_xor.at(z, qubits, (paulis == Z) | (paulis == Y))
        return cls(x, z)

    @classmethod
    def single(cls, n: int, qubit: int, pauli: int | str) -> PauliOp:
        if isinstance(pauli, str):
            pauli = PAULI_NAMES.index(pauli)
        return cls.from_paulis(n, [qubit], [pauli])

    @classmethod
    def from_codes(cls, codes: np.ndarray) -> PauliOp:
        """From a per-qubit array of codes 0..3 (I, X, Y, Z)."""
        codes = np.asarray(codes)
        return cls((codes == X) | (codes == Y), (codes == Z) | (codes == Y))

    @property
    def n(self) -> int:
        return self.x.size

    def codes(self) -> np.ndarray:
        """Per-qubit codes 0..3."""
        out = self.x.astype(np.int8)
        out[self.z] = Z
        out[self.x & self.z] = Y
        return out

    def packed(self) -> tuple[np.ndarray, np.ndarray]:
        return gf2.pack(self.x), gf2.pack(self.z)

    @property
    def weight(self) -> int:
        return int(np.count_nonzero(self.x | self.z))

    def __mul__(self, other: PauliOp) -> PauliOp:
        _check_size(self, other)
        return PauliOp(self.x ^ other.x, self.z ^ other.z)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PauliOp):
            return NotImplemented
        return np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z)

    def __hash__(self) -> int:
        return hash((self.x.tobytes(), self.z.tobytes()))

    def is_identity(self) -> bool:
        return not (self.x.any() or self.z.any())

    def copy(self) -> PauliOp:
        return PauliOp(self.x.copy(), self.z.copy())

    def __repr__(self) -> str:
        codes = self.codes()
        support = np.flatnonzero(codes)
        body = " ".join(f"{PAULI_NAMES[codes[q]]}{q}" for q in support[:12])
        if support.size > 12:
            body += " ..."
        return f"PauliOp(n={self.n}, {body or 'I'})"


def _check_size(p: PauliOp, q: PauliOp) -> None:
    if p.n != q.n:
        raise ValueError(f"size mismatch: {p.n} vs {q.n} qubits")


def commutes(p: PauliOp, q: PauliOp) -> bool:
    """True iff the symplectic product of ``p`` and ``q`` vanishes."""
    _check_size(p, q)
    px, pz = p.packed()
    qx, qz = q.packed()
    return not int(gf2.popcount((px & qz) ^ (pz & qx))) & 1


def syndrome_of(lattice: ChamonLattice, error: PauliOp) -> np.ndarray:
    """Length-n 0/1 vector: bit i set iff ``error`` anticommutes with stabilizer i."""
    return syndrome_bits(lattice, error.x, error.z)


def syndrome_bits(lattice: ChamonLattice, ex: np.ndarray, ez: np.ndarray) -> np.ndarray:
    xs, zs = lattice.stab_xz_support
    s = np.count_nonzero(ez[xs], axis=1) + np.count_nonzero(ex[zs], axis=1)
    return (s & 1).astype(np.uint8)


@dataclass(frozen=True)
class LogicalBasis:
    """``k`` symplectic pairs of logical operators.

    ``a_x, a_z, b_x, b_z`` are ``(k, n)`` boolean arrays; pair ``i`` is
    ``(A_i, B_i)`` with ``A_i`` anticommuting only with ``B_i``.
    """

    d: int
    a_x: np.ndarray
    a_z: np.ndarray
    b_x: np.ndarray
    b_z: np.ndarray

    @property
    def k(self) -> int:
        return self.a_x.shape[0]

    @property
    def pairs(self) -> list[tuple[PauliOp, PauliOp]]:
        return [
            (PauliOp(self.a_x[i], self.a_z[i]), PauliOp(self.b_x[i], self.b_z[i]))
            for i in range(self.k)
        ]

    def operators(self) -> list[PauliOp]:
        return [op for pair in self.pairs for op in pair]

    def _stacked(self) -> tuple[np.ndarray, np.ndarray]:
        cached = self.__dict__.get("_stack")
        if cached is None:
            lx = gf2.pack(np.concatenate([self.a_x, self.b_x]))
            lz = gf2.pack(np.concatenate([self.a_z, self.b_z]))
            cached = (lx, lz)
            object.__setattr__(self, "_stack", cached)
        return cached

    def anticommutations(self, residual: PauliOp) -> np.ndarray:
        """0/1 vector over all ``2k`` basis operators (A's then B's)."""
        lx, lz = self._stacked()
        rx, rz = residual.packed()
        return gf2.parity((lx & rz) ^ (lz & rx))

    def pairing_matrix(self) -> np.ndarray:
        """``k x k`` matrix of symplectic products between A's and B's."""
        ax, az = gf2.pack(self.a_x), gf2.pack(self.a_z)
        bx, bz = gf2.pack(self.b_x), gf2.pack(self.b_z)
        return gf2.parity((ax[:, None] & bz[None]) ^ (az[:, None] & bx[None]))


def _symplectic_products(vx, vz, pool_x, pool_z) -> np.ndarray:
    return gf2.parity((pool_x & vz) ^ (pool_z & vx)).astype(bool)


def derive_logicals(lattice: ChamonLattice) -> LogicalBasis:
    """Symplectic basis of the logical operators by elimination over GF(2).

    The normalizer is the kernel of ``[H_z | H_x]``; a symplectic Gram-Schmidt pass
    over it extracts ``k = n - rank(H)`` anticommuting pairs and discards the
    stabilizer part.
    """
    n = lattice.n
    h = check_matrix(lattice).astype(bool)
    swapped = np.concatenate([h[:, n:], h[:, :n]], axis=1)
    packed_h = gf2.pack(h)
    k = n - gf2.rank(packed_h, 2 * n)
    normalizer = gf2.unpack(gf2.nullspace(gf2.pack(swapped), 2 * n), 2 * n)
    pool_x = gf2.pack(normalizer[:, :n])
    pool_z = gf2.pack(normalizer[:, n:])

    pairs_x: list[tuple[np.ndarray, np.ndarray]] = []
    pairs_z: list[tuple[np.ndarray, np.ndarray]] = []
    while len(pairs_x) < k:
        if pool_x.shape[0] < 2:
            raise RuntimeError("symplectic reduction ran out of vectors")
        ax, az = pool_x[0], pool_z[0]
        pool_x, pool_z = pool_x[1:], pool_z[1:]
        hits = np.flatnonzero(_symplectic_products(ax, az, pool_x, pool_z))
        if hits.size == 0:
            continue  # in the stabilizer group (radical of the normalizer)
        j = hits[0]
        bx, bz = pool_x[j].copy(), pool_z[j].copy()
        pool_x = np.delete(pool_x, j, axis=0)
        pool_z = np.delete(pool_z, j, axis=0)
        with_a = _symplectic_products(ax, az, pool_x, pool_z)
        with_b = _symplectic_products(bx, bz, pool_x, pool_z)
        pool_x[with_b] ^= ax
        pool_z[with_b] ^= az
        pool_x[with_a] ^= bx
        pool_z[with_a] ^= bz
        pairs_x.append((ax, bx))
        pairs_z.append((az, bz))

    def stack(items, which):
        if not items:
            return np.zeros((0, n), dtype=bool)
        return gf2.unpack(np.stack([it[which] for it in items]), n)

    return LogicalBasis(
        lattice.d, stack(pairs_x, 0), stack(pairs_z, 0), stack(pairs_x, 1), stack(pairs_z, 1)
    )


def is_logical_failure(basis: LogicalBasis, residual: PauliOp, lattice: ChamonLattice | None = None) -> bool:
    """True iff the zero-syndrome ``residual`` anticommutes with some basis logical.

    When ``lattice`` is given the zero-syndrome precondition is checked.
    """
    if lattice is not None and syndrome_of(lattice, residual).any():
        raise ValueError("residual has a nonzero syndrome; logical class undefined")
    return bool(basis.anticommutations(residual).any())


def validate_basis(lattice: ChamonLattice, basis: LogicalBasis) -> bool:
    if basis.d != lattice.d or basis.a_x.shape[1:] != (lattice.n,):
        return False
    for ox, oz in ((basis.a_x, basis.a_z), (basis.b_x, basis.b_z)):
        for i in range(basis.k):
            if syndrome_bits(lattice, ox[i], oz[i]).any():
                return False
    return np.array_equal(basis.pairing_matrix(), np.eye(basis.k, dtype=np.uint8))


# -- disk cache --------------------------------------------------------------

def default_cache_dir() -> Path:
    env = os.environ.get("CHAMON_CACHE_DIR")
    if env:
        return Path(env)
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "chamon"


def cache_path(d: int, cache_dir: str | Path | None = None) -> Path:
    root = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    return root / f"logicals_v{CACHE_VERSION}_d{d}.npz"


def _digest(arrays: list[np.ndarray]) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()


def save_logicals(basis: LogicalBasis, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    parts = [np.packbits(a, axis=1) for a in (basis.a_x, basis.a_z, basis.b_x, basis.b_z)]
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez_compressed(
            fh,
            version=CACHE_VERSION,
            d=basis.d,
            n=basis.a_x.shape[1],
            a_x=parts[0], a_z=parts[1], b_x=parts[2], b_z=parts[3],
            digest=_digest(parts),
        )
    os.replace(tmp, path)


def load_logicals(path: str | Path) -> LogicalBasis:
    """Read a cached basis; raises ``ValueError`` on any inconsistency."""
    try:
        with np.load(path, allow_pickle=False) as f:
            if int(f["version"]) != CACHE_VERSION:
                raise ValueError("cache version mismatch")
            n = int(f["n"])
            parts = [f[key] for key in ("a_x", "a_z", "b_x", "b_z")]
            if str(f["digest"]) != _digest(parts):
                raise ValueError("cache digest mismatch")
            arrays = [np.unpackbits(p, axis=1, count=n).astype(bool) for p in parts]
            return LogicalBasis(int(f["d"]), *arrays)
    except (OSError, KeyError, EOFError) as exc:
        raise ValueError(f"unreadable logical cache {path}: {exc}") from exc
    except Exception as exc:  # zipfile / numpy format errors
        if isinstance(exc, ValueError):
            raise
        raise ValueError(f"unreadable logical cache {path}: {exc}") from exc


def logical_basis(
    lattice: ChamonLattice, cache_dir: str | Path | None = None, use_cache: bool = True
) -> LogicalBasis:
    """Cached :func:`derive_logicals`; a missing or corrupt cache is rebuilt."""
    if not use_cache:
        return derive_logicals(lattice)
    path = cache_path(lattice.d, cache_dir)
    if path.exists():
        try:
            basis = load_logicals(path)
            if validate_basis(lattice, basis):
                return basis
            log.warning("logical cache %s failed validation; recomputing", path)
        except ValueError as exc:
            log.warning("%s; recomputing", exc)
    basis = derive_logicals(lattice)
    try:
        save_logicals(basis, path)
    except OSError as exc:
        log.warning("could not write logical cache %s: %s", path, exc)
    return basis
