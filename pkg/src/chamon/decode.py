"""Matching-on-symmetries decoders: basic, greedy and belief matching.

All three share the same back end. Defect pairs returned by the per-plane
matchings are joined into a defect graph, whose connected components
(clusters) are enclosed in boxes and then cleared one by one by a sweep
corrector that pushes defects down in z and then in x.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from chamon import _kernels
from chamon.bp import bp_decode, depolarizing_prior, tanner_graph
from chamon.lattice import ChamonLattice, X, Y, Z
from chamon.matchgraph import PROB_CLAMP, graph_set_for, match_planes, probability_to_weight, quantize
from chamon.pauli import PauliOp, syndrome_bits

CORRECTED = "corrected"
SWEEP_RESIDUAL_FAILURE = "sweep_residual_failure"
NO_BOX_FAILURE_GUESS = "no_box_failure_guess"

DECODERS = ("basic", "greedy", "belief")


@dataclass(frozen=True)
class Box:
    """Per-axis arcs on the torus: positions ``lo[a] .. lo[a] + extent[a]`` (mod d), 0-based."""

    lo: tuple[int, int, int]
    extent: tuple[int, int, int]
    d: int

    def local(self, axis: int, c):
        """Offset of coordinate(s) ``c`` from the arc start; outside positions map to
        small negatives or values above ``extent`` on the nearer side."""
        pad = (self.d - 1 - self.extent[axis]) // 2
        return (np.asarray(c) - self.lo[axis] + pad) % self.d - pad

    def contains(self, axis: int, c) -> bool:
        v = self.local(axis, c)
        return bool(np.all((v >= 0) & (v <= self.extent[axis])))


@dataclass
class DefectGraph:
    vertices: np.ndarray  # defect stabilizer indices, ascending
    edges: np.ndarray  # (m, 2) matched pairs, global stabilizer indices
    path_ptr: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64))
    path_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


@dataclass
class Cluster:
    defects: np.ndarray
    edges: np.ndarray
    path_nodes: np.ndarray
    box: Box | None = None
    guessed_box: bool = False


@dataclass
class DecodeOutcome:
    correction: PauliOp
    status: str
    diagnostics: dict

    @property
    def corrected(self) -> bool:
        return self.status == CORRECTED


class SweepSpill(AssertionError):
    """A sweep move created a defect outside the cluster's box."""


# -- clustering --------------------------------------------------------------

def cluster_defects(graph: DefectGraph) -> list[Cluster]:
    """Connected components of the defect graph, ordered by smallest member."""
    verts = np.asarray(graph.vertices, dtype=np.int64)
    k = verts.size
    if k == 0:
        return []
    pos = {int(v): i for i, v in enumerate(verts.tolist())}
    edges = np.asarray(graph.edges, dtype=np.int64).reshape(-1, 2)
    a = np.fromiter((pos[int(v)] for v in edges[:, 0]), dtype=np.int64, count=len(edges))
    b = np.fromiter((pos[int(v)] for v in edges[:, 1]), dtype=np.int64, count=len(edges))
    adj = coo_matrix((np.ones(len(edges)), (a, b)), shape=(k, k))
    ncomp, labels = connected_components(adj, directed=False)
    # labels are assigned in order of first vertex, and vertices are ascending
    edge_label = labels[a] if len(edges) else np.zeros(0, dtype=np.int64)
    clusters = []
    for c in range(ncomp):
        sel = np.flatnonzero(edge_label == c)
        nodes = [graph.path_nodes[graph.path_ptr[e] : graph.path_ptr[e + 1]] for e in sel]
        clusters.append(
            Cluster(
                verts[labels == c],
                edges[sel],
                np.concatenate(nodes) if nodes else np.zeros(0, dtype=np.int64),
            )
        )
    return clusters


def _covering_arc(positions: np.ndarray, d: int) -> tuple[int, int] | None:
    """Smallest arc ``(start, extent)`` of the d-cycle covering ``positions``, or None."""
    occ = np.zeros(d, dtype=bool)
    occ[np.asarray(positions) % d] = True
    if occ.all():
        return None
    # longest circular run of empty positions; the arc starts right after it
    best_len, best_end = -1, 0
    start = int(np.flatnonzero(occ)[0])
    run = 0
    for step in range(1, d + 1):
        i = (start + step) % d
        if occ[i]:
            if run > best_len:
                best_len, best_end = run, i
            run = 0
        else:
            run += 1
    return best_end, d - best_len - 1


def bounding_box(lattice: ChamonLattice, cluster: Cluster) -> Box | None:
    """Per-axis minimal covering arcs of the cluster's defects and matched geodesics.

    Returns ``None`` (no box exists) when some axis needs the whole circle.
    """
    sites = np.concatenate([cluster.defects, cluster.path_nodes]).astype(np.int64)
    coords = lattice.stab_coords[sites]
    lo, ext = [], []
    for axis in range(3):
        arc = _covering_arc(coords[:, axis], lattice.d)
        if arc is None:
            return None
        lo.append(arc[0])
        ext.append(arc[1])
    return Box(tuple(lo), tuple(ext), lattice.d)


def guess_box(lattice: ChamonLattice, cluster: Cluster, rng: np.random.Generator) -> Box:
    """Random box for a cluster that wraps the torus.

    Axes that fit keep their covering arc; each wrapping axis gets a uniformly
    random start and spans the whole circle.
    """
    sites = np.concatenate([cluster.defects, cluster.path_nodes]).astype(np.int64)
    coords = lattice.stab_coords[sites]
    d = lattice.d
    lo, ext = [], []
    for axis in range(3):
        arc = _covering_arc(coords[:, axis], d)
        if arc is None:
            arc = (int(rng.integers(d)), d - 1)
        lo.append(arc[0])
        ext.append(arc[1])
    return Box(tuple(lo), tuple(ext), d)


# -- sweep -------------------------------------------------------------------

class _Sweeper:
    """Mutable defect set of one cluster plus the moves applied to it."""

    def __init__(self, lattice: ChamonLattice, box: Box, defects, check_box: bool):
        self.lat = lattice
        self.d = lattice.d
        self.box = box
        self.check_box = check_box
        self.defects: set[tuple[int, int, int]] = {
            tuple(int(v) for v in lattice.stab_coords[s]) for s in defects
        }
        self.moves: list[tuple[int, int]] = []
        self.spills = 0

    def inside(self, axis: int, c: int) -> bool:
        v = (c - self.box.lo[axis] + (self.d - 1 - self.box.extent[axis]) // 2) % self.d
        v -= (self.d - 1 - self.box.extent[axis]) // 2
        return 0 <= v <= self.box.extent[axis]

    def loc(self, axis: int, c: int) -> int:
        pad = (self.d - 1 - self.box.extent[axis]) // 2
        return (c - self.box.lo[axis] + pad) % self.d - pad

    def toggle(self, c):
        d = self.d
        c = (c[0] % d, c[1] % d, c[2] % d)
        if c in self.defects:
            self.defects.remove(c)
        else:
            self.defects.add(c)
            if not (self.inside(0, c[0]) and self.inside(1, c[1]) and self.inside(2, c[2])):
                self.spills += 1
                if self.check_box:
                    raise SweepSpill(f"sweep pushed a defect to {c}, outside {self.box}")

    def apply(self, q, pauli: int):
        qx, qy, qz = q
        if pauli == X:
            flips = ((qx, qy + 1, qz), (qx, qy - 1, qz), (qx, qy, qz + 1), (qx, qy, qz - 1))
        elif pauli == Y:
            flips = ((qx + 1, qy, qz), (qx - 1, qy, qz), (qx, qy, qz + 1), (qx, qy, qz - 1))
        else:
            flips = ((qx + 1, qy, qz), (qx - 1, qy, qz), (qx, qy + 1, qz), (qx, qy - 1, qz))
        d = self.d
        self.moves.append((int(self.lat.index_of(np.array([qx % d, qy % d, qz % d]))), pauli))
        for c in flips:
            self.toggle(c)

    def sweep_z(self):
        """Push every defect above the bottom two z-layers downwards."""
        for layer in range(self.box.extent[2], 1, -1):
            row = sorted(
                (u for u in self.defects if self.loc(2, u[2]) == layer),
                key=lambda u: (self.loc(0, u[0]), self.loc(1, u[1])),
            )
            for u in row:
                q = (u[0], u[1], u[2] - 1)
                x_fits = self.inside(1, q[1] - 1) and self.inside(1, q[1] + 1) and self.inside(0, q[0])
                y_fits = self.inside(0, q[0] - 1) and self.inside(0, q[0] + 1) and self.inside(1, q[1])
                self.apply(q, Y if (y_fits and not x_fits) else X)

    def sweep_x(self):
        """Push every defect above the bottom two x-layers towards lower x."""
        for layer in range(self.box.extent[0], 1, -1):
            row = sorted(
                (u for u in self.defects if self.loc(0, u[0]) == layer),
                key=lambda u: (self.loc(1, u[1]), self.loc(2, u[2])),
            )
            for u in row:
                q = (u[0] - 1, u[1], u[2])
                z_fits = self.inside(1, q[1] - 1) and self.inside(1, q[1] + 1) and self.inside(2, q[2])
                y_fits = self.inside(2, q[2] - 1) and self.inside(2, q[2] + 1) and self.inside(1, q[1])
                self.apply(q, Y if (y_fits and not z_fits) else Z)


def sweep_correct(
    lattice: ChamonLattice, cluster: Cluster, box: Box, check_box: bool = False
) -> tuple[PauliOp, np.ndarray, dict]:
    """Sweep the cluster's defects out of its box.

    Returns the partial correction, the residual syndrome (all zeros on success)
    and counters. With ``check_box`` a move that puts a defect outside the box
    raises :class:`SweepSpill`.
    """
    sw = _Sweeper(lattice, box, cluster.defects, check_box)
    if sw.defects:
        sw.sweep_z()
        sw.sweep_x()
    qubits = [m[0] for m in sw.moves]
    paulis = [m[1] for m in sw.moves]
    correction = PauliOp.from_paulis(lattice.n, qubits, paulis)
    residual = np.zeros(lattice.n, dtype=np.uint8)
    if sw.defects:
        residual[lattice.index_of(np.array(sorted(sw.defects)))] = 1
    return correction, residual, {"moves": len(sw.moves), "spills": sw.spills}


# -- pipelines ---------------------------------------------------------------

def _clear_python(lattice, syndrome, pairs, ptr, nodes, rng, cx, cz):
    """Reference back end: cluster, box and sweep one cluster at a time."""
    graph = DefectGraph(np.flatnonzero(syndrome), pairs, ptr, nodes)
    clusters = cluster_defects(graph)
    status = CORRECTED
    guessed = spills = 0
    for cl in clusters:
        box = bounding_box(lattice, cl)
        if box is None:
            box = guess_box(lattice, cl, rng)
            cl.guessed_box = True
            guessed += 1
        cl.box = box
        corr, residual, info = sweep_correct(lattice, cl, box)
        spills += info["spills"]
        cx ^= corr.x
        cz ^= corr.z
        if residual.any():
            if cl.guessed_box:
                status = NO_BOX_FAILURE_GUESS
            elif status == CORRECTED:
                status = SWEEP_RESIDUAL_FAILURE
    return status, len(clusters), guessed, spills


def _clear_compiled(lattice, syndrome, pairs, ptr, nodes, rng, cx, cz):
    """Same moves as :func:`_clear_python`, done by the compiled kernels."""
    d, n = lattice.d, lattice.n
    def_ptr, def_sites, site_ptr, sites = _kernels.cluster_sites(n, np.flatnonzero(syndrome), pairs, ptr, nodes)
    lo, ext = _kernels.covering_boxes(d, lattice.stab_coords, site_ptr, sites)
    wrap = ext < 0
    guessed = wrap.any(axis=1)
    for c in np.flatnonzero(guessed):
        for axis in range(3):
            if wrap[c, axis]:
                lo[c, axis] = int(rng.integers(d))
                ext[c, axis] = d - 1
    mq, mp, res_ptr, _, spills = _kernels.sweep_clusters(
        d, lattice._site_index, lattice.stab_coords, def_ptr, def_sites, lo, ext
    )
    cx ^= (np.bincount(mq[(mp == X) | (mp == Y)], minlength=n) & 1).astype(bool)
    cz ^= (np.bincount(mq[(mp == Z) | (mp == Y)], minlength=n) & 1).astype(bool)
    leftover = np.diff(res_ptr) > 0
    if (leftover & guessed).any():
        status = NO_BOX_FAILURE_GUESS
    elif leftover.any():
        status = SWEEP_RESIDUAL_FAILURE
    else:
        status = CORRECTED
    return status, len(def_ptr) - 1, int(guessed.sum()), int(spills.sum())


def _finish(lattice, syndrome, int_edge_w, rng, diag, base_x=None, base_z=None):
    gs = graph_set_for(lattice)
    t0 = time.perf_counter_ns()
    pairs, ptr, nodes = match_planes(gs, syndrome, int_edge_w)
    t1 = time.perf_counter_ns()
    n = lattice.n
    cx = np.zeros(n, dtype=bool) if base_x is None else base_x.copy()
    cz = np.zeros(n, dtype=bool) if base_z is None else base_z.copy()
    if rng is None:
        rng = np.random.default_rng(0)
    clear = _clear_compiled if _kernels.BACKEND == "cython" else _clear_python
    status, nclusters, guessed, spills = clear(lattice, syndrome, pairs, ptr, nodes, rng, cx, cz)
    t2 = time.perf_counter_ns()
    diag.update(
        defects=int(np.count_nonzero(syndrome)),
        matched_pairs=int(len(pairs)),
        clusters=nclusters,
        guessed_boxes=guessed,
        spills=spills,
        t_match_ns=t1 - t0,
        t_sweep_ns=t2 - t1,
    )
    return DecodeOutcome(PauliOp(cx, cz), status, diag)


def _uniform_weights(lattice: ChamonLattice) -> np.ndarray:
    cached = lattice.__dict__.get("_uniform_w")
    if cached is None:
        gs = graph_set_for(lattice)
        cached = quantize(gs.edge_weights(None))
        lattice.__dict__["_uniform_w"] = cached
    return cached


def decode_basic(lattice: ChamonLattice, syndrome, rng: np.random.Generator | None = None) -> DecodeOutcome:
    """Matching on all planes with unit edge weights, then clustering and sweeping."""
    syndrome = np.asarray(syndrome, dtype=np.uint8)
    return _finish(lattice, syndrome, _uniform_weights(lattice), rng, {})


def greedy_flips(lattice: ChamonLattice, syndrome) -> tuple[np.ndarray, np.ndarray]:
    """x/z bits of every single-qubit Pauli whose whole diamond is lit in ``syndrome``."""
    s = np.asarray(syndrome, dtype=bool)
    fl = lattice.flips
    fire_x = s[fl[X]].all(axis=1)
    fire_y = s[fl[Y]].all(axis=1)
    fire_z = s[fl[Z]].all(axis=1)
    return fire_x ^ fire_y, fire_z ^ fire_y


def decode_greedy(lattice: ChamonLattice, syndrome, rng: np.random.Generator | None = None) -> DecodeOutcome:
    """Flip every diamond found in the input syndrome, then run the basic decoder."""
    syndrome = np.asarray(syndrome, dtype=np.uint8)
    gx, gz = greedy_flips(lattice, syndrome)
    remaining = syndrome ^ syndrome_bits(lattice, gx, gz)
    diag = {"greedy_flips": int(np.count_nonzero(gx | gz))}
    return _finish(lattice, remaining, _uniform_weights(lattice), rng, diag, gx, gz)


def belief_weights(lattice: ChamonLattice, soft: np.ndarray) -> np.ndarray:
    """Quantised edge weights for all planes from per-qubit ``(p_I, p_X, p_Y, p_Z)``."""
    src = probability_to_weight(soft[:, 1:]).ravel()  # source id 3q + (P-1)
    return quantize(graph_set_for(lattice).edge_weights(src))


def decode_belief(
    lattice: ChamonLattice,
    syndrome,
    p: float,
    rng: np.random.Generator | None = None,
    max_iters: int | None = None,
) -> DecodeOutcome:
    """BP over the full syndrome, then matching with BP-derived edge weights."""
    syndrome = np.asarray(syndrome, dtype=np.uint8)
    iters = 10 * lattice.d if max_iters is None else max_iters
    t0 = time.perf_counter_ns()
    prior = min(max(depolarizing_prior(p), PROB_CLAMP), 1.0 - PROB_CLAMP)
    res = bp_decode(tanner_graph(lattice), syndrome, prior, iters)
    w = belief_weights(lattice, res.soft)
    diag = {
        "bp_iterations": res.iterations,
        "bp_converged": res.converged,
        "t_bp_ns": time.perf_counter_ns() - t0,
    }
    return _finish(lattice, syndrome, w, rng, diag)


def decode(kind: str, lattice: ChamonLattice, syndrome, p: float, rng=None) -> DecodeOutcome:
    if kind == "basic":
        return decode_basic(lattice, syndrome, rng)
    if kind == "greedy":
        return decode_greedy(lattice, syndrome, rng)
    if kind == "belief":
        return decode_belief(lattice, syndrome, p, rng)
    raise ValueError(f"unknown decoder {kind!r}; expected one of {DECODERS}")
