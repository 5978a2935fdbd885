"""Per-plane decoding graphs and exact minimum-weight perfect matching of defects.

Every single-qubit Pauli ``(q, P)`` flips four stabilizers; on each symmetry
plane that sees it, exactly two of them lie in the plane, so ``(q, P)`` is an
ordinary edge of that plane's graph. Sources producing the same node pair are
merged into one edge whose weight is the cheapest source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Mapping

import numpy as np

from chamon import _kernels
from chamon.lattice import ORIENTATIONS, PAULI_NAMES, ChamonLattice, SymmetryPlane

# Float weights are quantised to integers so that shortest paths and the blossom
# duals are computed exactly.
WEIGHT_SCALE = 1 << 20
PROB_CLAMP = 1e-6

# The three ways to split four items into two pairs.
_PAIRINGS = ((0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2))


def source_id(qubit: int, pauli: int) -> int:
    return 3 * qubit + (pauli - 1)


@dataclass
class PlaneGraph:
    """One symmetry plane's matching graph.

    ``edges`` holds ``(stab_a, stab_b, weight, sources)`` with global stabilizer
    indices and ``sources`` a list of ``(qubit, pauli)``.
    """

    plane: SymmetryPlane
    nodes: np.ndarray
    edges: list[tuple[int, int, float, list[tuple[int, int]]]]

    def dump(self) -> str:
        lines = [f"plane {self.plane.label} nodes={len(self.nodes)} edges={len(self.edges)}"]
        lines.append("nodes " + " ".join(map(str, self.nodes.tolist())))
        for a, b, w, src in self.edges:
            srcs = ",".join(f"{PAULI_NAMES[p]}{q}" for q, p in src)
            lines.append(f"edge {a} {b} {w:.6g} {srcs}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class MatchingResult:
    pairs: list[tuple[int, int]]
    total_weight: float


class PlaneGraphSet:
    """Static edge structure of all ``2d`` plane graphs of a lattice.

    Per-trial weights only change the arrays handed to the kernels, so this is
    built once per distance and shared.
    """

    def __init__(self, lattice: ChamonLattice):
        self.lattice = lattice
        self.planes = lattice.symmetries
        d, n = lattice.d, lattice.n
        per_orient = d // 2
        # plane id and local node index of every stabilizer, per orientation
        self.plane_of = np.empty((4, n), dtype=np.int64)
        self.local_of = np.empty((4, n), dtype=np.int64)
        for pid, plane in enumerate(self.planes):
            o = pid // per_orient
            self.plane_of[o, plane.members] = pid
            self.local_of[o, plane.members] = np.arange(plane.members.size)

        flips = lattice.flips[1:].transpose(1, 0, 2).reshape(3 * n, 4)  # row = source id
        src = np.arange(3 * n)
        rows = []
        for o in range(4):
            pl = self.plane_of[o][flips]
            found = np.zeros(3 * n, dtype=bool)
            for a, b, c, e in _PAIRINGS:
                ok = (pl[:, a] == pl[:, b]) & (pl[:, c] == pl[:, e]) & (pl[:, a] != pl[:, c]) & ~found
                found |= ok
                for i, j in ((a, b), (c, e)):
                    s0 = flips[ok, i]
                    s1 = flips[ok, j]
                    rows.append(np.stack([pl[ok, i], np.minimum(s0, s1), np.maximum(s0, s1), src[ok]], axis=1))
            if not found.all():
                raise RuntimeError("a single-qubit error is not a pair of defects on some plane")
        table = np.concatenate(rows)
        order = np.lexsort((table[:, 3], table[:, 2], table[:, 1], table[:, 0]))
        table = table[order]
        key = table[:, :3]
        new = np.ones(len(table), dtype=bool)
        new[1:] = (key[1:] != key[:-1]).any(axis=1)
        starts = np.flatnonzero(new)
        self.edge_plane = key[starts, 0]
        self.edge_a = key[starts, 1]  # global stabilizer indices
        self.edge_b = key[starts, 2]
        self.edge_src_ptr = np.append(starts, len(table))
        self.edge_src = table[:, 3]
        self.n_edges = starts.size

        # CSR adjacency per plane in local node indices; adj_edge maps to edge ids
        self.plane_edge_ptr = np.searchsorted(self.edge_plane, np.arange(len(self.planes) + 1))
        self.adj: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        for pid, plane in enumerate(self.planes):
            o = pid // per_orient
            lo, hi = self.plane_edge_ptr[pid], self.plane_edge_ptr[pid + 1]
            eids = np.arange(lo, hi)
            la = self.local_of[o, self.edge_a[lo:hi]]
            lb = self.local_of[o, self.edge_b[lo:hi]]
            owner = np.concatenate([la, lb])
            nbr = np.concatenate([lb, la])
            eid = np.concatenate([eids, eids])
            order = np.lexsort((nbr, owner))
            indptr = np.zeros(plane.members.size + 1, dtype=np.int64)
            np.cumsum(np.bincount(owner, minlength=plane.members.size), out=indptr[1:])
            self.adj.append((indptr, nbr[order].astype(np.int64), eid[order]))

        # the same adjacency concatenated over planes, for the all-planes kernel
        sizes = np.array([pl.members.size for pl in self.planes])
        self.node_ptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        self.members_all = np.concatenate([pl.members for pl in self.planes]).astype(np.int64)
        adj_sizes = np.array([a[1].size for a in self.adj])
        adj_off = np.concatenate([[0], np.cumsum(adj_sizes)])
        self.indptr_all = np.concatenate(
            [a[0][:-1] + off for a, off in zip(self.adj, adj_off)] + [[adj_off[-1]]]
        ).astype(np.int64)
        self.nbr_all = np.concatenate([a[1] for a in self.adj])
        self.adj_eid_all = np.concatenate([a[2] for a in self.adj])

    def orientation_of(self, pid: int) -> int:
        return pid // (self.lattice.d // 2)

    def edge_weights(self, source_weights: np.ndarray | None) -> np.ndarray:
        """Per-edge float weights: the minimum over each edge's merged sources.

        ``source_weights`` is indexed by :func:`source_id`; ``None`` means uniform 1.
        Planes containing negative weights are shifted so their minimum is zero.
        """
        if source_weights is None:
            return np.ones(self.n_edges)
        w = np.minimum.reduceat(np.asarray(source_weights, dtype=np.float64)[self.edge_src], self.edge_src_ptr[:-1])
        mins = np.minimum.reduceat(w, self.plane_edge_ptr[:-1])
        if (mins < 0).any():
            shift = np.where(mins < 0, -mins, 0.0)
            w = w + np.repeat(shift, np.diff(self.plane_edge_ptr))
        return w

    def plane_graph(self, pid: int, edge_w: np.ndarray | None = None) -> PlaneGraph:
        if edge_w is None:
            edge_w = np.ones(self.n_edges)
        lo, hi = self.plane_edge_ptr[pid], self.plane_edge_ptr[pid + 1]
        edges = []
        for e in range(lo, hi):
            srcs = self.edge_src[self.edge_src_ptr[e] : self.edge_src_ptr[e + 1]]
            edges.append(
                (int(self.edge_a[e]), int(self.edge_b[e]), float(edge_w[e]),
                 [(int(s) // 3, int(s) % 3 + 1) for s in srcs])
            )
        return PlaneGraph(self.planes[pid], self.planes[pid].members, edges)


@lru_cache(maxsize=8)
def plane_graph_set(d: int) -> PlaneGraphSet:
    from chamon.lattice import build_lattice

    return PlaneGraphSet(build_lattice(d))


def graph_set_for(lattice: ChamonLattice) -> PlaneGraphSet:
    cached = lattice.__dict__.get("_graph_set")
    if cached is None:
        cached = PlaneGraphSet(lattice)
        lattice.__dict__["_graph_set"] = cached
    return cached


def probability_to_weight(p: np.ndarray) -> np.ndarray:
    """Log-likelihood weight ``-ln(p / (1 - p))`` with ``p`` clamped away from 0 and 1."""
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -np.log(p / (1.0 - p))


def quantize(w: np.ndarray) -> np.ndarray:
    return np.maximum(np.rint(np.asarray(w) * WEIGHT_SCALE), 1).astype(np.int64)


def build_plane_graph(
    lattice: ChamonLattice,
    plane: SymmetryPlane | int,
    qubit_weights: Mapping[tuple[int, int], float] | None = None,
) -> PlaneGraph:
    """Plane graph with weights from a ``(qubit, pauli) -> weight`` map (default 1.0)."""
    gs = graph_set_for(lattice)
    pid = plane if isinstance(plane, int) else _plane_id(gs, plane)
    src_w = None
    if qubit_weights:
        src_w = np.ones(3 * lattice.n)
        for (q, p), w in qubit_weights.items():
            src_w[source_id(q, p)] = w
    return gs.plane_graph(pid, gs.edge_weights(src_w))


def _plane_id(gs: PlaneGraphSet, plane: SymmetryPlane) -> int:
    for pid, other in enumerate(gs.planes):
        if other.orientation == plane.orientation and other.offset == plane.offset:
            return pid
    raise KeyError(plane.label)


def _local_csr(graph: PlaneGraph):
    index = {int(s): i for i, s in enumerate(graph.nodes.tolist())}
    nv = len(index)
    owner, nbr, w = [], [], []
    for a, b, wt, _ in graph.edges:
        for u, v in ((a, b), (b, a)):
            owner.append(index[u])
            nbr.append(index[v])
            w.append(wt)
    owner = np.asarray(owner, dtype=np.int64)
    order = np.lexsort((np.asarray(nbr), owner))
    indptr = np.zeros(nv + 1, dtype=np.int64)
    np.cumsum(np.bincount(owner, minlength=nv), out=indptr[1:])
    return index, indptr, np.asarray(nbr, dtype=np.int64)[order], np.asarray(w)[order]


@dataclass(frozen=True)
class DefectDistances:
    defects: list[int]
    dist: np.ndarray  # float, k x k
    _pred: np.ndarray
    _nodes: np.ndarray

    def path(self, i: int, j: int) -> list[int]:
        """Global stabilizer indices along the geodesic from defect i to defect j."""
        row = self._pred[i]
        src = self._nodes.tolist().index(self.defects[i])
        node = self._nodes.tolist().index(self.defects[j])
        out = [node]
        while node != src:
            node = int(row[node])
            out.append(node)
        return [int(self._nodes[v]) for v in reversed(out)]


def defect_distances(graph: PlaneGraph, defects) -> DefectDistances:
    """Shortest weighted paths between all pairs of ``defects`` within the plane."""
    index, indptr, nbr, w = _local_csr(graph)
    try:
        local = np.asarray([index[int(s)] for s in defects], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"defect {exc.args[0]} is not a node of plane {graph.plane.label}") from None
    dist, pred = _kernels.plane_distances(indptr, nbr, quantize(w), local)
    return DefectDistances([int(s) for s in defects], dist / WEIGHT_SCALE, pred, graph.nodes)


def min_weight_perfect_matching(weights: np.ndarray, labels=None) -> MatchingResult:
    """Exact minimum-weight perfect matching of a complete graph.

    ``weights`` is a symmetric matrix over ``2m`` vertices; ``labels`` names the
    vertices in the returned pairs (default ``0..2m-1``).
    """
    weights = np.asarray(weights, dtype=np.float64)
    k = weights.shape[0]
    if k % 2:
        raise AssertionError(f"odd number of defects ({k}); plane parity violated upstream")
    labels = list(range(k)) if labels is None else list(labels)
    mate = _kernels.mwpm_dense(quantize(weights) if k else np.zeros((0, 0), dtype=np.int64))
    pairs = [(labels[i], labels[int(mate[i])]) for i in range(k) if mate[i] > i]
    total = float(sum(weights[i, mate[i]] for i in range(k) if mate[i] > i))
    return MatchingResult(pairs, total)


def match_planes(gs: PlaneGraphSet, syndrome: np.ndarray, int_edge_w: np.ndarray):
    """Run matching on every plane.

    Returns the matched pairs (global stabilizer indices, ``(m, 2)``) and the
    flattened geodesic node lists as ``(path_ptr, path_nodes)``.
    """
    defects = np.flatnonzero(syndrome)
    pids = gs.plane_of[:, defects].ravel()
    local = gs.local_of[:, defects].ravel()
    order = np.argsort(pids, kind="stable")
    def_ptr = np.searchsorted(pids[order], np.arange(len(gs.planes) + 1))
    return _kernels.match_all(
        gs.node_ptr, gs.members_all, gs.indptr_all, gs.nbr_all,
        np.asarray(int_edge_w, dtype=np.int64)[gs.adj_eid_all], def_ptr, local[order],
    )


def write_plane_dump(graph: PlaneGraph, path: str | Path) -> None:
    Path(path).write_text(graph.dump())
