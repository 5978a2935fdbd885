"""Pure-Python/numpy implementations of the hot kernels.

Selected at import when the compiled extension is unavailable (or when
``CHAMON_PURE_PYTHON=1``). Shortest paths come from scipy and the blossom
matching from networkx, so these routines double as independent oracles for
the compiled versions.
"""

from __future__ import annotations

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

LLR_CLIP = 30.0
_TANH_CLIP = np.tanh(LLR_CLIP / 2)


def plane_distances(indptr, nbr, weight, defects):
    """All-pairs shortest distances between ``defects`` and predecessor trees.

    Returns ``dist`` (k x k, int64) and ``pred`` (k x V, int32, -1 at roots and
    unreached nodes).
    """
    defects = np.asarray(defects, dtype=np.int64)
    nv = len(indptr) - 1
    if defects.size == 0:
        return np.zeros((0, 0), dtype=np.int64), np.zeros((0, nv), dtype=np.int32)
    graph = csr_matrix(
        (np.asarray(weight, dtype=np.float64), np.asarray(nbr), np.asarray(indptr)), shape=(nv, nv)
    )
    dist, pred = dijkstra(graph, directed=True, indices=defects, return_predecessors=True)
    sub = dist[:, defects]
    if not np.isfinite(sub).all():
        raise ValueError("plane graph is disconnected between defects")
    pred = np.where(pred < 0, -1, pred).astype(np.int32)
    return np.rint(sub).astype(np.int64), pred


def mwpm_dense(cost):
    """Minimum-weight perfect matching of a complete graph given a symmetric cost matrix.

    Returns ``mate`` with ``mate[i]`` the partner of vertex ``i``.
    """
    cost = np.asarray(cost, dtype=np.int64)
    k = cost.shape[0]
    if k % 2:
        raise AssertionError(f"odd number of defects ({k}) cannot be perfectly matched")
    mate = np.full(k, -1, dtype=np.int64)
    if k == 0:
        return mate
    top = int(cost.max()) + 1
    g = nx.Graph()
    g.add_nodes_from(range(k))
    iu, ju = np.triu_indices(k, 1)
    g.add_weighted_edges_from(zip(iu.tolist(), ju.tolist(), (top - cost[iu, ju]).tolist()))
    for a, b in nx.max_weight_matching(g, maxcardinality=True):
        mate[a] = b
        mate[b] = a
    if (mate < 0).any():
        raise AssertionError("matching is not perfect")
    return mate


def _trace(pred_row, src, dst):
    path = [dst]
    node = dst
    while node != src:
        node = int(pred_row[node])
        if node < 0:
            raise ValueError("broken predecessor chain")
        path.append(node)
    path.reverse()
    return path


def match_plane(indptr, nbr, weight, defects):
    """Match ``defects`` (local node ids) on one plane graph.

    Returns ``pairs`` (m x 2 local ids, first < second, sorted) plus the geodesic
    of each pair as a flattened ``(path_ptr, path_nodes)`` CSR.
    """
    defects = np.asarray(defects, dtype=np.int64)
    dist, pred = plane_distances(indptr, nbr, weight, defects)
    mate = mwpm_dense(dist)
    pairs = []
    ptr = [0]
    nodes: list[int] = []
    for i in range(defects.size):
        j = int(mate[i])
        if j < i:
            continue
        pairs.append((defects[i], defects[j]))
        nodes.extend(_trace(pred[i], int(defects[i]), int(defects[j])))
        ptr.append(len(nodes))
    return (
        np.asarray(pairs, dtype=np.int64).reshape(-1, 2),
        np.asarray(ptr, dtype=np.int64),
        np.asarray(nodes, dtype=np.int64),
    )


def match_all(node_ptr, members, indptr, nbr, weight, def_ptr, def_local):
    """Match the defects of every plane; see the compiled kernel for the layout."""
    pairs_out, ptr_out, nodes_out = [], [np.zeros(1, dtype=np.int64)], []
    offset = 0
    for p in range(len(node_ptr) - 1):
        if def_ptr[p + 1] == def_ptr[p]:
            continue
        base, top = node_ptr[p], node_ptr[p + 1]
        rows = indptr[base : top + 1]
        lo = rows[0]
        pairs, ptr, nodes = match_plane(
            rows - lo, nbr[lo : rows[-1]], weight[lo : rows[-1]], def_local[def_ptr[p] : def_ptr[p + 1]]
        )
        mem = members[base:top]
        pairs_out.append(mem[pairs])
        nodes_out.append(mem[nodes])
        ptr_out.append(ptr[1:] + offset)
        offset += nodes.size
    if not pairs_out:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(pairs_out), np.concatenate(ptr_out), np.concatenate(nodes_out)


def bp_flood(check_vars, var_edges, syndrome, prior_llr, max_iters):
    """Flooding sum-product decoding in the log domain.

    ``check_vars`` is ``(m, deg_c)``; ``var_edges`` maps each variable to its
    edge ids ``check * deg_c + slot``. Returns posterior LLRs, the hard decision,
    the convergence flag and the number of iterations run.
    """
    check_vars = np.asarray(check_vars)
    m, deg = check_vars.shape
    prior = np.asarray(prior_llr, dtype=np.float64)
    sign = 1.0 - 2.0 * np.asarray(syndrome, dtype=np.float64)
    v2c = prior[check_vars].copy()
    post = prior.copy()
    hard = np.zeros(prior.size, dtype=np.uint8)
    target = np.asarray(syndrome, dtype=np.uint8)
    for it in range(1, max_iters + 1):
        t = np.tanh(0.5 * v2c)
        prefix = np.ones((m, deg + 1))
        suffix = np.ones((m, deg + 1))
        np.cumprod(t, axis=1, out=prefix[:, 1:])
        np.cumprod(t[:, ::-1], axis=1, out=suffix[:, 1:])
        excl = prefix[:, :deg] * suffix[:, ::-1][:, 1:]
        excl = np.clip(excl * sign[:, None], -_TANH_CLIP, _TANH_CLIP)
        c2v = np.clip(2.0 * np.arctanh(excl), -LLR_CLIP, LLR_CLIP).ravel()
        incoming = c2v[var_edges]
        post = prior + incoming.sum(axis=1)
        hard = (post < 0).astype(np.uint8)
        if np.array_equal(hard[check_vars].sum(axis=1) & 1, target):
            return post, hard, True, it
        v2c_flat = np.clip(post[:, None] - incoming, -LLR_CLIP, LLR_CLIP)
        v2c = np.empty(m * deg)
        v2c[var_edges.ravel()] = v2c_flat.ravel()
        v2c = v2c.reshape(m, deg)
    return post, hard, False, max_iters
