from __future__ import annotations

import importlib.util
from functools import lru_cache

import networkx as nx
import numpy as np
import pytest

from chamon import _kernels, _pykernels
from chamon.lattice import X, Y, Z, build_lattice
from chamon.matchgraph import (
    PROB_CLAMP,
    WEIGHT_SCALE,
    build_plane_graph,
    defect_distances,
    graph_set_for,
    match_planes,
    min_weight_perfect_matching,
    probability_to_weight,
    quantize,
    write_plane_dump,
)
from chamon.noise import DepolarizingChannel
from chamon.pauli import PauliOp, syndrome_of

HAVE_C = importlib.util.find_spec("chamon._ckernels") is not None
if HAVE_C:
    from chamon import _ckernels


def brute_force_min(w: np.ndarray) -> float:
    @lru_cache(maxsize=None)
    def best(mask: int) -> float:
        free = [i for i in range(w.shape[0]) if not mask >> i & 1]
        if not free:
            return 0.0
        i = free[0]
        return min(w[i, j] + best(mask | 1 << i | 1 << j) for j in free[1:])

    return best(0)


def random_instance(rng, k):
    w = rng.uniform(0, 1, (k, k))
    w = 1.0 - w  # values in (0, 1]
    w = np.triu(w, 1)
    return w + w.T


@pytest.mark.c6
def test_mwpm_equals_brute_force():
    rng = np.random.default_rng(123)
    for trial in range(1000):
        k = 2 * int(rng.integers(1, 5))
        w = random_instance(rng, k)
        res = min_weight_perfect_matching(w)
        assert sorted(x for pair in res.pairs for x in pair) == list(range(k))
        assert res.total_weight == pytest.approx(brute_force_min(w), abs=k * 1e-6)


@pytest.mark.parametrize("backend", ["python", "cython"])
def test_dense_backends_against_brute_force(backend):
    if backend == "cython" and not HAVE_C:
        pytest.skip("extension not built")
    impl = _ckernels if backend == "cython" else _pykernels
    rng = np.random.default_rng(7)
    for _ in range(200):
        k = 2 * int(rng.integers(1, 6))
        cost = np.triu(rng.integers(1, 30, (k, k)), 1)
        cost = cost + cost.T
        mate = impl.mwpm_dense(cost)
        assert np.array_equal(mate[mate], np.arange(k))
        total = sum(cost[i, mate[i]] for i in range(k)) // 2
        assert total == brute_force_min(cost.astype(float))


def test_matching_edge_cases():
    assert min_weight_perfect_matching(np.zeros((0, 0))).pairs == []
    res = min_weight_perfect_matching(np.array([[0, 0.4], [0.4, 0]]), labels=[10, 20])
    assert res.pairs == [(10, 20)] and res.total_weight == pytest.approx(0.4)
    with pytest.raises(AssertionError):
        min_weight_perfect_matching(np.zeros((3, 3)))


def test_matching_beats_random_alternatives():
    rng = np.random.default_rng(9)
    for _ in range(20):
        k = 12
        w = random_instance(rng, k)
        best = min_weight_perfect_matching(w).total_weight
        for _ in range(1000):
            perm = rng.permutation(k)
            alt = sum(w[perm[i], perm[i + 1]] for i in range(0, k, 2))
            assert best <= alt + 1e-9


def test_pairing_is_scale_invariant():
    rng = np.random.default_rng(4)
    for _ in range(50):
        w = random_instance(rng, 10)
        base = min_weight_perfect_matching(w).pairs
        for lam in (0.5, 3.0, 17.0):
            assert min_weight_perfect_matching(w * lam).pairs == base


@pytest.mark.parametrize("d", [4, 6, 8])
def test_edges_are_single_qubit_paulis(d):
    lat = build_lattice(d)
    gs = graph_set_for(lat)
    seen = np.zeros(3 * lat.n, dtype=np.int64)
    for e in range(gs.n_edges):
        srcs = gs.edge_src[gs.edge_src_ptr[e] : gs.edge_src_ptr[e + 1]]
        for s in srcs:
            q, pauli = int(s) // 3, int(s) % 3 + 1
            defects = np.flatnonzero(syndrome_of(lat, PauliOp.single(lat.n, q, pauli)))
            plane = gs.planes[gs.edge_plane[e]]
            inside = np.intersect1d(defects, plane.members)
            assert inside.tolist() == sorted([int(gs.edge_a[e]), int(gs.edge_b[e])])
        seen[srcs] += 1
    # each source is an edge in two planes of each of the four orientations
    assert (seen == 8).all()


def test_plane_graphs_are_ordinary_graphs():
    lat = build_lattice(8)
    gs = graph_set_for(lat)
    for pid in range(len(gs.planes)):
        g = gs.plane_graph(pid)
        for a, b, _, _ in g.edges:
            assert a != b
        nxg = nx.Graph([(a, b) for a, b, _, _ in g.edges])
        assert nx.is_connected(nxg)
        assert set(nxg.nodes) == set(g.nodes.tolist())


def test_distances_match_networkx():
    lat = build_lattice(6)
    rng = np.random.default_rng(5)
    weights = {(q, p): float(rng.uniform(0.1, 3.0)) for q in range(lat.n) for p in (X, Y, Z)}
    for pid in (0, 4, 9):
        g = build_plane_graph(lat, pid, weights)
        nxg = nx.Graph()
        for a, b, w, _ in g.edges:
            nxg.add_edge(a, b, weight=quantize(np.array([w]))[0])
        defects = rng.choice(g.nodes, 6, replace=False)
        dd = defect_distances(g, defects)
        for i, a in enumerate(defects):
            lengths = nx.single_source_dijkstra_path_length(nxg, int(a))
            for j, b in enumerate(defects):
                assert dd.dist[i, j] * WEIGHT_SCALE == pytest.approx(lengths[int(b)])
            path = dd.path(i, (i + 1) % 6)
            assert path[0] == a and path[-1] == defects[(i + 1) % 6]
            cost = sum(nxg[u][v]["weight"] for u, v in zip(path, path[1:]))
            assert cost == pytest.approx(dd.dist[i, (i + 1) % 6] * WEIGHT_SCALE)


def test_parallel_sources_merge_by_minimum():
    lat = build_lattice(4)
    gs = graph_set_for(lat)
    multi = np.flatnonzero(np.diff(gs.edge_src_ptr) > 1)
    assert multi.size  # d=4 has merged sources
    e = multi[0]
    srcs = gs.edge_src[gs.edge_src_ptr[e] : gs.edge_src_ptr[e + 1]]
    w = np.full(3 * lat.n, 5.0)
    w[srcs[0]] = 2.0
    w[srcs[1]] = 0.5
    assert gs.edge_weights(w)[e] == 0.5


def test_negative_weights_shift_per_plane():
    lat = build_lattice(4)
    gs = graph_set_for(lat)
    w = np.ones(3 * lat.n)
    w[0] = -2.0
    ew = gs.edge_weights(w)
    for pid in range(len(gs.planes)):
        seg = ew[gs.plane_edge_ptr[pid] : gs.plane_edge_ptr[pid + 1]]
        assert seg.min() >= 0
    assert ew.min() == 0


def test_probability_to_weight():
    assert probability_to_weight(np.array([0.5]))[0] == pytest.approx(0.0)
    lo = probability_to_weight(np.array([0.0]))[0]
    assert lo == pytest.approx(-np.log(PROB_CLAMP / (1 - PROB_CLAMP)))
    assert probability_to_weight(np.array([1.0]))[0] == pytest.approx(-lo)
    assert quantize(np.array([0.0, 1.0]))[0] == 1
    assert quantize(np.array([1.0]))[0] == WEIGHT_SCALE


def _plane_instances(d, p, trials, wmax, seed):
    lat = build_lattice(d)
    gs = graph_set_for(lat)
    rng = np.random.default_rng(seed)
    for t in range(trials):
        s = syndrome_of(lat, DepolarizingChannel(p, seed).sample(lat, t))
        w = rng.integers(1, wmax + 1, gs.n_edges)
        defects = np.flatnonzero(s)
        for pid in range(len(gs.planes)):
            o = gs.orientation_of(pid)
            mine = defects[gs.plane_of[o, defects] == pid]
            if mine.size:
                indptr, nbr, eid = gs.adj[pid]
                yield indptr, nbr, w[eid], gs.local_of[o, mine]


def _path_cost(indptr, nbr, w, path):
    total = 0
    for a, b in zip(path[:-1], path[1:]):
        hits = [w[k] for k in range(indptr[a], indptr[a + 1]) if nbr[k] == b]
        assert hits, "path uses a non-edge"
        total += min(hits)
    return total


def _check_plane_matching(impl, indptr, nbr, w, local):
    dist, _ = _pykernels.plane_distances(indptr, nbr, w, local)
    mate = _pykernels.mwpm_dense(dist)
    optimum = sum(dist[i, mate[i]] for i in range(len(local))) // 2
    pairs, ptr, nodes = impl.match_plane(indptr, nbr, w, local)
    assert sorted(pairs.ravel().tolist()) == sorted(local.tolist())
    total = 0
    for i, (a, b) in enumerate(pairs):
        path = nodes[ptr[i] : ptr[i + 1]]
        assert {path[0], path[-1]} == {a, b}
        total += _path_cost(indptr, nbr, w, path)
    assert total == optimum


@pytest.mark.parametrize("d,p,wmax", [(4, 0.1, 50), (6, 0.15, 1), (8, 0.1, 1000), (8, 0.05, 1 << 20)])
def test_plane_matching_is_optimal_python(d, p, wmax):
    for inst in _plane_instances(d, p, 10, wmax, seed=d):
        _check_plane_matching(_pykernels, *inst)


@pytest.mark.skipif(not HAVE_C, reason="extension not built")
@pytest.mark.parametrize("limit", [1, 2, 6, 1000])
@pytest.mark.parametrize("d,p,wmax", [(6, 0.12, 50), (8, 0.1, 1), (12, 0.1, 1 << 20)])
def test_plane_matching_is_optimal_compiled(limit, d, p, wmax):
    # small candidate limits force the certification rounds and the fallback
    old = _ckernels.set_candidate_limit(limit)
    try:
        for inst in _plane_instances(d, p, 2 if d >= 12 else 4, wmax, seed=d + limit):
            _check_plane_matching(_ckernels, *inst)
    finally:
        _ckernels.set_candidate_limit(old)


def test_match_planes_pairs_lie_in_planes():
    lat = build_lattice(8)
    gs = graph_set_for(lat)
    w = quantize(gs.edge_weights(None))
    for t in range(20):
        s = syndrome_of(lat, DepolarizingChannel(0.08, 1).sample(lat, t))
        pairs, ptr, nodes = match_planes(gs, s, w)
        defects = set(np.flatnonzero(s).tolist())
        # every defect is matched once in each of its four planes
        counts = np.bincount(pairs.ravel(), minlength=lat.n)
        assert all(counts[v] == 4 for v in defects)
        assert counts.sum() == 4 * len(defects)
        for i, (a, b) in enumerate(pairs):
            o_planes = [gs.plane_of[o, a] for o in range(4)]
            assert any(gs.plane_of[o, b] == o_planes[o] for o in range(4))
            path = nodes[ptr[i] : ptr[i + 1]]
            assert path[0] in (a, b) and path[-1] in (a, b)


def test_odd_defects_in_a_plane_is_fatal():
    lat = build_lattice(4)
    gs = graph_set_for(lat)
    s = np.zeros(lat.n, dtype=np.uint8)
    s[0] = 1
    with pytest.raises(AssertionError):
        match_planes(gs, s, quantize(gs.edge_weights(None)))


def test_plane_dump(tmp_path):
    lat = build_lattice(4)
    g = build_plane_graph(lat, 0)
    path = tmp_path / "plane.txt"
    write_plane_dump(g, path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("plane r=+++ C=0")
    assert sum(line.startswith("edge ") for line in lines) == len(g.edges)
