# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: plane shortest paths, exact blossom matching, flooding BP.

Signatures and return conventions mirror :mod:`chamon._pykernels`.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport tanh, exp
from libc.stdlib cimport malloc, calloc, free, realloc, abort

cnp.import_array()

ctypedef long long i64

cdef double LLR_CLIP = 30.0
cdef i64 INF = 1LL << 62


# ---------------------------------------------------------------------------
# Dijkstra on a CSR plane graph

cdef struct HeapItem:
    i64 key
    int node


cdef inline bint _less(HeapItem a, HeapItem b) noexcept nogil:
    return a.key < b.key or (a.key == b.key and a.node < b.node)


cdef inline void _push(HeapItem* h, int* size, i64 key, int node) noexcept nogil:
    cdef int i = size[0]
    cdef int parent
    cdef HeapItem item
    item.key = key
    item.node = node
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if not _less(item, h[parent]):
            break
        h[i] = h[parent]
        i = parent
    h[i] = item


cdef inline HeapItem _pop(HeapItem* h, int* size) noexcept nogil:
    cdef HeapItem top = h[0]
    cdef HeapItem last
    cdef int n, i, c
    size[0] -= 1
    n = size[0]
    if n == 0:
        return top
    last = h[n]
    i = 0
    while True:
        c = 2 * i + 1
        if c >= n:
            break
        if c + 1 < n and _less(h[c + 1], h[c]):
            c += 1
        if not _less(h[c], last):
            break
        h[i] = h[c]
        i = c
    h[i] = last
    return top


cdef int _dijkstra_many(const i64[::1] indptr, const i64[::1] nbr, const i64[::1] w,
                        const i64[::1] defects, i64[:, ::1] dist, int[:, ::1] pred) noexcept nogil:
    cdef int nv = indptr.shape[0] - 1
    cdef int k = defects.shape[0]
    cdef int cap = nbr.shape[0] + 2
    cdef HeapItem* heap
    cdef i64* d
    cdef char* settled
    cdef int* pos
    cdef int s, v, u, remaining, size
    cdef i64 e, nd
    cdef HeapItem item
    cdef int status = 0
    heap = <HeapItem*> malloc(cap * sizeof(HeapItem))
    d = <i64*> malloc(nv * sizeof(i64))
    settled = <char*> malloc(nv)
    pos = <int*> malloc(nv * sizeof(int))
    for v in range(nv):
        pos[v] = -1
    for s in range(k):
        pos[defects[s]] = s
    for s in range(k):
        for v in range(nv):
            d[v] = INF
            settled[v] = 0
            pred[s, v] = -1
        size = 0
        d[defects[s]] = 0
        _push(heap, &size, 0, <int> defects[s])
        remaining = k
        while size > 0 and remaining > 0:
            item = _pop(heap, &size)
            u = item.node
            if settled[u] or item.key > d[u]:
                continue
            settled[u] = 1
            if pos[u] >= 0:
                dist[s, pos[u]] = d[u]
                remaining -= 1
            for e in range(indptr[u], indptr[u + 1]):
                v = <int> nbr[e]
                nd = d[u] + w[e]
                if nd < d[v]:
                    d[v] = nd
                    pred[s, v] = u
                    if size >= cap:
                        status = -2
                        break
                    _push(heap, &size, nd, v)
            if status:
                break
        if status:
            break
        if remaining > 0:
            status = -1
            break
    free(heap)
    free(d)
    free(settled)
    free(pos)
    return status


def plane_distances(indptr, nbr, weight, defects):
    cdef const i64[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const i64[::1] nb = np.ascontiguousarray(nbr, dtype=np.int64)
    cdef const i64[::1] ww = np.ascontiguousarray(weight, dtype=np.int64)
    cdef const i64[::1] df = np.ascontiguousarray(defects, dtype=np.int64)
    cdef int k = df.shape[0]
    cdef int nv = ip.shape[0] - 1
    dist = np.zeros((k, k), dtype=np.int64)
    pred = np.full((k, nv), -1, dtype=np.int32)
    cdef i64[:, ::1] dv = dist
    cdef int[:, ::1] pv = pred
    cdef int status
    if k == 0:
        return dist, pred
    with nogil:
        status = _dijkstra_many(ip, nb, ww, df, dv, pv)
    if status == -1:
        raise ValueError("plane graph is disconnected between defects")
    if status:
        raise RuntimeError("heap overflow in shortest-path search")
    return dist, pred


# ---------------------------------------------------------------------------
# Maximum-weight matching on a complete graph: the O(V^3) primal-dual blossom
# algorithm with integer weights.  Vertices are 0..nv-1, blossoms nv..2nv-1;
# endpoint p belongs to edge p >> 1 and sits at vertex endpoint[p].  All state
# lives in flat C arrays; blossom child lists are rows of width nv.

cdef inline int _pmod(int a, int n) noexcept nogil:
    cdef int r = a % n
    return r + n if r < 0 else r


cdef struct BState:
    int nv
    int ne
    i64* ew
    int* endpoint
    int* nb_ptr
    int* nb_end
    int* mate
    int* label
    int* labelend
    int* inblossom
    int* bparent
    int* bbase
    int* bestedge
    i64* dualvar
    char* allowedge
    int* queue
    int qlen
    int qcap
    int* childs
    int* endps
    int* nchilds
    int* bbest
    int* nbbest
    int* unused
    int nunused
    int* leafbuf
    int* scratch
    int* bestedgeto


cdef inline i64 _slack(BState* s, int k) noexcept nogil:
    return s.dualvar[s.endpoint[2 * k]] + s.dualvar[s.endpoint[2 * k + 1]] - 2 * s.ew[k]


cdef int _leaves(BState* s, int b, int pos) noexcept nogil:
    cdef int i
    if b < s.nv:
        s.leafbuf[pos] = b
        return pos + 1
    for i in range(s.nchilds[b]):
        pos = _leaves(s, s.childs[b * s.nv + i], pos)
    return pos


cdef inline void _enqueue(BState* s, int v) noexcept nogil:
    cdef int* grown
    if s.qlen == s.qcap:
        grown = <int*> realloc(s.queue, 2 * s.qcap * sizeof(int))
        if grown == NULL:
            abort()
        s.queue = grown
        s.qcap *= 2
    s.queue[s.qlen] = v
    s.qlen += 1


cdef void _assign_label(BState* s, int w, int t, int p) noexcept nogil:
    cdef int b = s.inblossom[w]
    cdef int base, nl, i
    s.label[w] = t
    s.label[b] = t
    s.labelend[w] = p
    s.labelend[b] = p
    s.bestedge[w] = -1
    s.bestedge[b] = -1
    if t == 1:
        nl = _leaves(s, b, 0)
        for i in range(nl):
            _enqueue(s, s.leafbuf[i])
    elif t == 2:
        base = s.bbase[b]
        _assign_label(s, s.endpoint[s.mate[base]], 1, s.mate[base] ^ 1)


cdef int _scan_blossom(BState* s, int v, int w) noexcept nogil:
    cdef int npath = 0
    cdef int base = -1
    cdef int b, tmp, i
    while v != -1 or w != -1:
        b = s.inblossom[v]
        if s.label[b] & 4:
            base = s.bbase[b]
            break
        s.scratch[npath] = b
        npath += 1
        s.label[b] = 5
        if s.labelend[b] == -1:
            v = -1
        else:
            v = s.endpoint[s.labelend[b]]
            b = s.inblossom[v]
            v = s.endpoint[s.labelend[b]]
        if w != -1:
            tmp = v
            v = w
            w = tmp
    for i in range(npath):
        s.label[s.scratch[i]] = 1
    return base


cdef inline void _consider(BState* s, int b, int kk) noexcept nogil:
    cdef int i = s.endpoint[2 * kk]
    cdef int j = s.endpoint[2 * kk + 1]
    cdef int bj
    if s.inblossom[j] == b:
        j = i
    bj = s.inblossom[j]
    if bj != b and s.label[bj] == 1 and (
            s.bestedgeto[bj] == -1 or _slack(s, kk) < _slack(s, s.bestedgeto[bj])):
        s.bestedgeto[bj] = kk


cdef void _add_blossom(BState* s, int base, int k) noexcept nogil:
    cdef int nv = s.nv
    cdef int v = s.endpoint[2 * k]
    cdef int w = s.endpoint[2 * k + 1]
    cdef int bb = s.inblossom[base]
    cdef int bv = s.inblossom[v]
    cdef int bw = s.inblossom[w]
    cdef int b, cnt, nend, i, tmp, nl, leaf, ci, p, kk, cnt2
    cdef int* C
    cdef int* E
    cdef int* BB
    s.nunused -= 1
    b = s.unused[s.nunused]
    s.bbase[b] = base
    s.bparent[b] = -1
    s.bparent[bb] = b
    C = s.childs + b * nv
    E = s.endps + b * nv
    cnt = 0
    while bv != bb:
        s.bparent[bv] = b
        C[cnt] = bv
        E[cnt] = s.labelend[bv]
        cnt += 1
        v = s.endpoint[s.labelend[bv]]
        bv = s.inblossom[v]
    nend = cnt
    C[cnt] = bb
    cnt += 1
    for i in range(cnt // 2):
        tmp = C[i]
        C[i] = C[cnt - 1 - i]
        C[cnt - 1 - i] = tmp
    for i in range(nend // 2):
        tmp = E[i]
        E[i] = E[nend - 1 - i]
        E[nend - 1 - i] = tmp
    E[nend] = 2 * k
    nend += 1
    while bw != bb:
        s.bparent[bw] = b
        C[cnt] = bw
        cnt += 1
        E[nend] = s.labelend[bw] ^ 1
        nend += 1
        w = s.endpoint[s.labelend[bw]]
        bw = s.inblossom[w]
    s.nchilds[b] = cnt
    s.label[b] = 1
    s.labelend[b] = s.labelend[bb]
    s.dualvar[b] = 0
    nl = _leaves(s, b, 0)
    for i in range(nl):
        leaf = s.leafbuf[i]
        if s.label[s.inblossom[leaf]] == 2:
            _enqueue(s, leaf)
        s.inblossom[leaf] = b
    for i in range(2 * nv):
        s.bestedgeto[i] = -1
    for ci in range(cnt):
        bv = C[ci]
        if s.nbbest[bv] == -1:
            nl = _leaves(s, bv, 0)
            for i in range(nl):
                leaf = s.leafbuf[i]
                for p in range(s.nb_ptr[leaf], s.nb_ptr[leaf + 1]):
                    _consider(s, b, s.nb_end[p] >> 1)
        else:
            BB = s.bbest + bv * 2 * nv
            for i in range(s.nbbest[bv]):
                _consider(s, b, BB[i])
        s.nbbest[bv] = -1
        s.bestedge[bv] = -1
    BB = s.bbest + b * 2 * nv
    cnt2 = 0
    for i in range(2 * nv):
        if s.bestedgeto[i] != -1:
            BB[cnt2] = s.bestedgeto[i]
            cnt2 += 1
    s.nbbest[b] = cnt2
    s.bestedge[b] = -1
    for i in range(cnt2):
        kk = BB[i]
        if s.bestedge[b] == -1 or _slack(s, kk) < _slack(s, s.bestedge[b]):
            s.bestedge[b] = kk


cdef void _expand_blossom(BState* s, int b, bint endstage) noexcept nogil:
    cdef int nv = s.nv
    cdef int* C = s.childs + b * nv
    cdef int* E = s.endps + b * nv
    cdef int nc = s.nchilds[b]
    cdef int ci, sb, nl, i, j, jstep, endptrick, p, bv, entrychild, found, v
    for ci in range(nc):
        sb = C[ci]
        s.bparent[sb] = -1
        if sb < nv:
            s.inblossom[sb] = sb
        elif endstage and s.dualvar[sb] == 0:
            _expand_blossom(s, sb, endstage)
        else:
            nl = _leaves(s, sb, 0)
            for i in range(nl):
                s.inblossom[s.leafbuf[i]] = sb
    if (not endstage) and s.label[b] == 2:
        entrychild = s.inblossom[s.endpoint[s.labelend[b] ^ 1]]
        j = 0
        while C[j] != entrychild:
            j += 1
        if j & 1:
            j -= nc
            jstep = 1
            endptrick = 0
        else:
            jstep = -1
            endptrick = 1
        p = s.labelend[b]
        while j != 0:
            s.label[s.endpoint[p ^ 1]] = 0
            s.label[s.endpoint[E[_pmod(j - endptrick, nc)] ^ endptrick ^ 1]] = 0
            _assign_label(s, s.endpoint[p ^ 1], 2, p)
            s.allowedge[E[_pmod(j - endptrick, nc)] >> 1] = 1
            j += jstep
            p = E[_pmod(j - endptrick, nc)] ^ endptrick
            s.allowedge[p >> 1] = 1
            j += jstep
        bv = C[_pmod(j, nc)]
        s.label[s.endpoint[p ^ 1]] = 2
        s.label[bv] = 2
        s.labelend[s.endpoint[p ^ 1]] = p
        s.labelend[bv] = p
        s.bestedge[bv] = -1
        j += jstep
        while C[_pmod(j, nc)] != entrychild:
            bv = C[_pmod(j, nc)]
            if s.label[bv] == 1:
                j += jstep
                continue
            nl = _leaves(s, bv, 0)
            found = -1
            for i in range(nl):
                v = s.leafbuf[i]
                if s.label[v] != 0:
                    found = v
                    break
            if found >= 0:
                s.label[found] = 0
                s.label[s.endpoint[s.mate[s.bbase[bv]]]] = 0
                _assign_label(s, found, 2, s.labelend[found])
            j += jstep
    s.label[b] = -1
    s.labelend[b] = -1
    s.nchilds[b] = 0
    s.bbase[b] = -1
    s.nbbest[b] = -1
    s.bestedge[b] = -1
    s.unused[s.nunused] = b
    s.nunused += 1


cdef void _augment_blossom(BState* s, int b, int v) noexcept nogil:
    cdef int nv = s.nv
    cdef int t = v
    cdef int* C
    cdef int* E
    cdef int nc, i, j, jstep, endptrick, p
    while s.bparent[t] != b:
        t = s.bparent[t]
    if t >= nv:
        _augment_blossom(s, t, v)
    C = s.childs + b * nv
    E = s.endps + b * nv
    nc = s.nchilds[b]
    i = 0
    while C[i] != t:
        i += 1
    j = i
    if i & 1:
        j -= nc
        jstep = 1
        endptrick = 0
    else:
        jstep = -1
        endptrick = 1
    while j != 0:
        j += jstep
        t = C[_pmod(j, nc)]
        p = E[_pmod(j - endptrick, nc)] ^ endptrick
        if t >= nv:
            _augment_blossom(s, t, s.endpoint[p])
        j += jstep
        t = C[_pmod(j, nc)]
        if t >= nv:
            _augment_blossom(s, t, s.endpoint[p ^ 1])
        s.mate[s.endpoint[p]] = p ^ 1
        s.mate[s.endpoint[p ^ 1]] = p
    if i:
        for j in range(nc):
            s.scratch[j] = C[(j + i) % nc]
        for j in range(nc):
            C[j] = s.scratch[j]
        for j in range(nc):
            s.scratch[j] = E[(j + i) % nc]
        for j in range(nc):
            E[j] = s.scratch[j]
    s.bbase[b] = s.bbase[C[0]]


cdef void _augment_matching(BState* s, int k) noexcept nogil:
    cdef int sv, p, bs, t, bt, j, side
    for side in range(2):
        if side == 0:
            sv = s.endpoint[2 * k]
            p = 2 * k + 1
        else:
            sv = s.endpoint[2 * k + 1]
            p = 2 * k
        while True:
            bs = s.inblossom[sv]
            if bs >= s.nv:
                _augment_blossom(s, bs, sv)
            s.mate[sv] = p
            if s.labelend[bs] == -1:
                break
            t = s.endpoint[s.labelend[bs]]
            bt = s.inblossom[t]
            sv = s.endpoint[s.labelend[bt]]
            j = s.endpoint[s.labelend[bt] ^ 1]
            if bt >= s.nv:
                _augment_blossom(s, bt, j)
            s.mate[j] = s.labelend[bt]
            p = s.labelend[bt] ^ 1


cdef void _solve(BState* s) noexcept nogil:
    cdef int nv = s.nv
    cdef int t, v, w, p, k, b, base, deltatype, deltaedge, deltablossom, i, j
    cdef bint augmented
    cdef i64 kslack, delta, dd
    for t in range(nv):
        for i in range(2 * nv):
            s.label[i] = 0
            s.bestedge[i] = -1
        for b in range(nv, 2 * nv):
            s.nbbest[b] = -1
        for i in range(s.ne):
            s.allowedge[i] = 0
        s.qlen = 0
        for v in range(nv):
            if s.mate[v] == -1 and s.label[s.inblossom[v]] == 0:
                _assign_label(s, v, 1, -1)
        augmented = False
        while True:
            while s.qlen > 0 and not augmented:
                s.qlen -= 1
                v = s.queue[s.qlen]
                for i in range(s.nb_ptr[v], s.nb_ptr[v + 1]):
                    p = s.nb_end[i]
                    k = p >> 1
                    w = s.endpoint[p]
                    if s.inblossom[v] == s.inblossom[w]:
                        continue
                    kslack = 0
                    if not s.allowedge[k]:
                        kslack = _slack(s, k)
                        if kslack <= 0:
                            s.allowedge[k] = 1
                    if s.allowedge[k]:
                        if s.label[s.inblossom[w]] == 0:
                            _assign_label(s, w, 2, p ^ 1)
                        elif s.label[s.inblossom[w]] == 1:
                            base = _scan_blossom(s, v, w)
                            if base >= 0:
                                _add_blossom(s, base, k)
                            else:
                                _augment_matching(s, k)
                                augmented = True
                                break
                        elif s.label[w] == 0:
                            s.label[w] = 2
                            s.labelend[w] = p ^ 1
                    elif s.label[s.inblossom[w]] == 1:
                        b = s.inblossom[v]
                        if s.bestedge[b] == -1 or kslack < _slack(s, s.bestedge[b]):
                            s.bestedge[b] = k
                    elif s.label[w] == 0:
                        if s.bestedge[w] == -1 or kslack < _slack(s, s.bestedge[w]):
                            s.bestedge[w] = k
            if augmented:
                break
            deltatype = 1
            deltaedge = -1
            deltablossom = -1
            delta = s.dualvar[0]
            for v in range(1, nv):
                if s.dualvar[v] < delta:
                    delta = s.dualvar[v]
            for v in range(nv):
                if s.label[s.inblossom[v]] == 0 and s.bestedge[v] != -1:
                    dd = _slack(s, s.bestedge[v])
                    if dd < delta:
                        delta = dd
                        deltatype = 2
                        deltaedge = s.bestedge[v]
            for b in range(2 * nv):
                if s.bparent[b] == -1 and s.label[b] == 1 and s.bestedge[b] != -1:
                    dd = _slack(s, s.bestedge[b]) // 2
                    if dd < delta:
                        delta = dd
                        deltatype = 3
                        deltaedge = s.bestedge[b]
            for b in range(nv, 2 * nv):
                if (s.bbase[b] >= 0 and s.bparent[b] == -1
                        and s.label[b] == 2 and s.dualvar[b] < delta):
                    delta = s.dualvar[b]
                    deltatype = 4
                    deltablossom = b
            for v in range(nv):
                if s.label[s.inblossom[v]] == 1:
                    s.dualvar[v] -= delta
                elif s.label[s.inblossom[v]] == 2:
                    s.dualvar[v] += delta
            for b in range(nv, 2 * nv):
                if s.bbase[b] >= 0 and s.bparent[b] == -1:
                    if s.label[b] == 1:
                        s.dualvar[b] += delta
                    elif s.label[b] == 2:
                        s.dualvar[b] -= delta
            if deltatype == 1:
                break
            elif deltatype == 2:
                s.allowedge[deltaedge] = 1
                i = s.endpoint[2 * deltaedge]
                j = s.endpoint[2 * deltaedge + 1]
                if s.label[s.inblossom[i]] == 0:
                    i = j
                _enqueue(s, i)
            elif deltatype == 3:
                s.allowedge[deltaedge] = 1
                _enqueue(s, s.endpoint[2 * deltaedge])
            else:
                _expand_blossom(s, deltablossom, False)
        if not augmented:
            break
        for b in range(nv, 2 * nv):
            if (s.bparent[b] == -1 and s.bbase[b] >= 0
                    and s.label[b] == 1 and s.dualvar[b] == 0):
                _expand_blossom(s, b, True)


cdef int _bs_open(BState* s, int nv, int ne, const int* ei, const int* ej, const i64* w) noexcept nogil:
    """Allocate and initialise the solver for edges ``(ei[k], ej[k])`` of weight ``w[k]``."""
    cdef int i, j, k, v
    cdef i64 wmax = 0
    s.nv = nv
    s.ne = ne
    s.ew = <i64*> malloc((ne + 1) * sizeof(i64))
    s.endpoint = <int*> malloc((2 * ne + 1) * sizeof(int))
    s.nb_ptr = <int*> malloc((nv + 1) * sizeof(int))
    s.nb_end = <int*> malloc((2 * ne + 1) * sizeof(int))
    s.mate = <int*> malloc(nv * sizeof(int))
    s.label = <int*> malloc(2 * nv * sizeof(int))
    s.labelend = <int*> malloc(2 * nv * sizeof(int))
    s.inblossom = <int*> malloc(nv * sizeof(int))
    s.bparent = <int*> malloc(2 * nv * sizeof(int))
    s.bbase = <int*> malloc(2 * nv * sizeof(int))
    s.bestedge = <int*> malloc(2 * nv * sizeof(int))
    s.dualvar = <i64*> malloc(2 * nv * sizeof(i64))
    s.allowedge = <char*> malloc(ne + 1)
    s.qcap = 4 * nv + 4
    s.queue = <int*> malloc(s.qcap * sizeof(int))
    s.qlen = 0
    s.childs = <int*> malloc(2 * nv * nv * sizeof(int))
    s.endps = <int*> malloc(2 * nv * nv * sizeof(int))
    s.nchilds = <int*> malloc(2 * nv * sizeof(int))
    s.bbest = <int*> malloc(4 * nv * nv * sizeof(int))
    s.nbbest = <int*> malloc(2 * nv * sizeof(int))
    s.unused = <int*> malloc(nv * sizeof(int))
    s.leafbuf = <int*> malloc(nv * sizeof(int))
    s.scratch = <int*> malloc(2 * nv * sizeof(int))
    s.bestedgeto = <int*> malloc(2 * nv * sizeof(int))
    if s.bestedgeto == NULL or s.bbest == NULL or s.childs == NULL or s.endps == NULL:
        return -1
    for k in range(ne):
        s.endpoint[2 * k] = ei[k]
        s.endpoint[2 * k + 1] = ej[k]
        s.ew[k] = w[k]
        if w[k] > wmax:
            wmax = w[k]
    for v in range(nv + 1):
        s.nb_ptr[v] = 0
    for k in range(ne):
        s.nb_ptr[ei[k] + 1] += 1
        s.nb_ptr[ej[k] + 1] += 1
    for v in range(nv):
        s.nb_ptr[v + 1] += s.nb_ptr[v]
    for v in range(nv):
        s.scratch[v] = s.nb_ptr[v]
    for k in range(ne):
        i = ei[k]
        j = ej[k]
        s.nb_end[s.scratch[i]] = 2 * k + 1
        s.scratch[i] += 1
        s.nb_end[s.scratch[j]] = 2 * k
        s.scratch[j] += 1
    for v in range(nv):
        s.mate[v] = -1
        s.inblossom[v] = v
        s.dualvar[v] = wmax
        s.unused[v] = nv + v
    s.nunused = nv
    for v in range(2 * nv):
        s.labelend[v] = -1
        s.bparent[v] = -1
        s.bbase[v] = v if v < nv else -1
        s.nchilds[v] = 0
        s.nbbest[v] = -1
        s.label[v] = 0
        s.bestedge[v] = -1
        if v >= nv:
            s.dualvar[v] = 0
    return 0


cdef void _bs_close(BState* s) noexcept nogil:
    free(s.ew); free(s.endpoint); free(s.nb_ptr); free(s.nb_end); free(s.mate)
    free(s.label); free(s.labelend); free(s.inblossom); free(s.bparent); free(s.bbase)
    free(s.bestedge); free(s.dualvar); free(s.allowedge); free(s.queue); free(s.childs)
    free(s.endps); free(s.nchilds); free(s.bbest); free(s.nbbest); free(s.unused)
    free(s.leafbuf); free(s.scratch); free(s.bestedgeto)


cdef int _bs_mates(BState* s, int* mate_out) noexcept nogil:
    """Partner of every vertex; returns -1 if the matching is not perfect."""
    cdef int v, status = 0
    for v in range(s.nv):
        if s.mate[v] >= 0:
            mate_out[v] = s.endpoint[s.mate[v]]
        else:
            mate_out[v] = -1
            status = -1
    return status


cdef int _mwpm_complete(int nv, const i64* cost, int* mate_out) noexcept nogil:
    """Min-weight perfect matching of the complete graph on nv (even) vertices.

    ``cost`` is a row-major nv x nv symmetric matrix; fills ``mate_out``.
    Returns 0 on success, -1 if the result is not perfect.
    """
    cdef BState s
    cdef int ne = nv * (nv - 1) // 2
    cdef int i, j, k
    cdef i64 top = 0
    cdef int status
    if nv == 0:
        return 0
    for i in range(nv * nv):
        if cost[i] > top:
            top = cost[i]
    top += 1
    cdef int* ei = <int*> malloc((ne + 1) * sizeof(int))
    cdef int* ej = <int*> malloc((ne + 1) * sizeof(int))
    cdef i64* w = <i64*> malloc((ne + 1) * sizeof(i64))
    k = 0
    for i in range(nv):
        for j in range(i + 1, nv):
            ei[k] = i
            ej[k] = j
            w[k] = top - cost[i * nv + j]
            k += 1
    status = _bs_open(&s, nv, ne, ei, ej, w)
    free(ei); free(ej); free(w)
    if status == 0:
        _solve(&s)
        status = _bs_mates(&s, mate_out)
    _bs_close(&s)
    return status


def mwpm_dense(cost):
    cdef cnp.ndarray[i64, ndim=2, mode="c"] c = np.ascontiguousarray(cost, dtype=np.int64)
    cdef int k = c.shape[0]
    if k % 2:
        raise AssertionError(f"odd number of defects ({k}) cannot be perfectly matched")
    mate = np.full(k, -1, dtype=np.int32)
    cdef int[::1] mv = mate
    cdef int status = 0
    if k:
        with nogil:
            status = _mwpm_complete(k, &c[0, 0], &mv[0])
    if status:
        raise AssertionError("matching is not perfect")
    return mate.astype(np.int64)


# ---------------------------------------------------------------------------
# Whole-syndrome matching: every plane in one call

cdef int _grow(int** buf, int* cap, int need) noexcept nogil:
    cdef int newcap
    cdef int* grown
    if need <= cap[0]:
        return 0
    newcap = cap[0] * 2
    while newcap < need:
        newcap *= 2
    grown = <int*> realloc(buf[0], newcap * sizeof(int))
    if grown == NULL:
        return -1
    buf[0] = grown
    cap[0] = newcap
    return 0


cdef inline bint _hless(const i64* d, int a, int b) noexcept nogil:
    return d[a] < d[b] or (d[a] == d[b] and a < b)


cdef inline void _hup(int* h, int* hpos, const i64* d, int i) noexcept nogil:
    cdef int v = h[i]
    cdef int parent
    while i > 0:
        parent = (i - 1) >> 1
        if not _hless(d, v, h[parent]):
            break
        h[i] = h[parent]
        hpos[h[i]] = i
        i = parent
    h[i] = v
    hpos[v] = i


cdef inline int _hpop(int* h, int* hpos, const i64* d, int* size) noexcept nogil:
    cdef int top = h[0]
    cdef int n, i, c, last
    size[0] -= 1
    n = size[0]
    hpos[top] = -1
    if n == 0:
        return top
    last = h[n]
    i = 0
    while True:
        c = 2 * i + 1
        if c >= n:
            break
        if c + 1 < n and _hless(d, h[c + 1], h[c]):
            c += 1
        if not _hless(d, h[c], last):
            break
        h[i] = h[c]
        hpos[h[i]] = i
        i = c
    h[i] = last
    hpos[last] = i
    return top


cdef int _bfs_or_dijkstra(const i64* indptr, const i64* nbr, const i64* w, int nv,
                          const i64* defects, int k, i64* dist, int* pred,
                          int* heap, int* hpos, i64* d, char* settled,
                          int* pos, bint uniform) noexcept nogil:
    """Distances between defects (row-major k x k) and predecessor rows.

    Searches only from defect s towards defects t > s; row s of ``pred`` is
    valid along those geodesics. Among equal-length geodesics the choice is
    deterministic but may differ from the pure-Python backend.
    """
    cdef int s, v, u, remaining, size, head, tail
    cdef i64 e, nd, unit
    for v in range(nv):
        pos[v] = -1
        hpos[v] = -1
    for s in range(k):
        pos[defects[s]] = s
        dist[s * k + s] = 0
    for s in range(k - 1):
        for v in range(nv):
            d[v] = INF
            settled[v] = 0
            pred[s * nv + v] = -1
        remaining = k - 1 - s
        d[defects[s]] = 0
        if uniform:
            unit = w[0]
            head = 0
            tail = 1
            heap[0] = <int> defects[s]
            settled[defects[s]] = 1
            while head < tail and remaining > 0:
                u = heap[head]
                head += 1
                if pos[u] > s:
                    dist[s * k + pos[u]] = d[u]
                    dist[pos[u] * k + s] = d[u]
                    remaining -= 1
                for e in range(indptr[u], indptr[u + 1]):
                    v = <int> nbr[e]
                    if not settled[v]:
                        settled[v] = 1
                        d[v] = d[u] + unit
                        pred[s * nv + v] = u
                        heap[tail] = v
                        tail += 1
        else:
            size = 1
            heap[0] = <int> defects[s]
            hpos[defects[s]] = 0
            while size > 0 and remaining > 0:
                u = _hpop(heap, hpos, d, &size)
                settled[u] = 1
                if pos[u] > s:
                    dist[s * k + pos[u]] = d[u]
                    dist[pos[u] * k + s] = d[u]
                    remaining -= 1
                for e in range(indptr[u], indptr[u + 1]):
                    v = <int> nbr[e]
                    if settled[v]:
                        continue
                    nd = d[u] + w[e]
                    if nd < d[v]:
                        d[v] = nd
                        pred[s * nv + v] = u
                        if hpos[v] < 0:
                            heap[size] = v
                            size += 1
                        _hup(heap, hpos, d, hpos[v] if hpos[v] >= 0 else size - 1)
            for v in range(size):
                hpos[heap[v]] = -1
        if remaining > 0:
            return -1
    return 0


# nearest defects each candidate search collects
cdef int CANDIDATES = 6


def set_candidate_limit(int n):
    """Set how many nearest defects seed the sparse matching; returns the old value.

    Only performance depends on it; small values exercise the certification
    rounds and the complete-graph fallback.
    """
    global CANDIDATES
    old = CANDIDATES
    CANDIDATES = max(n, 1)
    return old
cdef i64 _stat[6]


def matching_counters(reset=False):
    """Counters of the sparse matcher.

    Returns ``[searches, nodes touched, certification searches, nodes touched
    by them, solve rounds, planes]``.
    """
    out = [_stat[i] for i in range(6)]
    if reset:
        for i in range(6):
            _stat[i] = 0
    return out


cdef struct Search:
    # per-plane scratch shared by all searches; d/settled/hpos are restored to
    # their idle values (INF, 0, -1) after every search
    i64* d
    char* settled
    int* heap
    int* hpos
    int* touched
    int ntouched
    int* found
    i64* found_d
    int nfound


cdef inline void _touch(Search* S, int v) noexcept nogil:
    S.touched[S.ntouched] = v
    S.ntouched += 1


cdef void _search(Search* S, const i64* indptr, const i64* nbr, const i64* w, int src,
                  const int* pos, bint blocked, i64 radius, int* pred_row,
                  bint uniform, int limit) noexcept nogil:
    """Shortest paths from ``src``, settling nodes up to ``radius``.

    Settled defects (``pos >= 0``) are reported in ``S.found``, stopping once
    ``limit`` are found. With ``blocked`` the search does not continue through
    other defects.
    """
    cdef int u, v, size, head, tail, i
    cdef i64 e, nd, unit
    S.nfound = 0
    S.ntouched = 0
    S.d[src] = 0
    _touch(S, src)
    if uniform:
        unit = w[indptr[src]] if indptr[src + 1] > indptr[src] else 1
        head = 0
        tail = 1
        S.heap[0] = src
        S.settled[src] = 1
        while head < tail:
            u = S.heap[head]
            head += 1
            if S.d[u] > radius:
                break
            if u != src and pos[u] >= 0:
                S.found[S.nfound] = pos[u]
                S.found_d[S.nfound] = S.d[u]
                S.nfound += 1
                if S.nfound >= limit:
                    break
                if blocked:
                    continue
            for e in range(indptr[u], indptr[u + 1]):
                v = <int> nbr[e]
                if not S.settled[v]:
                    S.settled[v] = 1
                    S.d[v] = S.d[u] + unit
                    pred_row[v] = u
                    _touch(S, v)
                    S.heap[tail] = v
                    tail += 1
    else:
        size = 1
        S.heap[0] = src
        S.hpos[src] = 0
        while size > 0:
            u = S.heap[0]
            if S.d[u] > radius:
                break
            u = _hpop(S.heap, S.hpos, S.d, &size)
            S.settled[u] = 1
            if u != src and pos[u] >= 0:
                S.found[S.nfound] = pos[u]
                S.found_d[S.nfound] = S.d[u]
                S.nfound += 1
                if S.nfound >= limit:
                    break
                if blocked:
                    continue
            for e in range(indptr[u], indptr[u + 1]):
                v = <int> nbr[e]
                if S.settled[v]:
                    continue
                nd = S.d[u] + w[e]
                if nd < S.d[v]:
                    if S.d[v] == INF:
                        _touch(S, v)
                    S.d[v] = nd
                    pred_row[v] = u
                    if S.hpos[v] < 0:
                        S.heap[size] = v
                        size += 1
                        _hup(S.heap, S.hpos, S.d, size - 1)
                    else:
                        _hup(S.heap, S.hpos, S.d, S.hpos[v])
        for i in range(size):
            S.hpos[S.heap[i]] = -1
    _stat[0] += 1
    _stat[1] += S.ntouched
    if not blocked:
        _stat[2] += 1
        _stat[3] += S.ntouched
    for i in range(S.ntouched):
        v = S.touched[i]
        S.d[v] = INF
        S.settled[v] = 0


cdef struct Edges:
    int* ei
    int* ej
    i64* cost
    char* exact
    int n
    int cap


cdef int _edge_add(Edges* E, int i, int j, i64 c, char exact) noexcept nogil:
    cdef int newcap
    if E.n == E.cap:
        newcap = 2 * E.cap
        E.ei = <int*> realloc(E.ei, newcap * sizeof(int))
        E.ej = <int*> realloc(E.ej, newcap * sizeof(int))
        E.cost = <i64*> realloc(E.cost, newcap * sizeof(i64))
        E.exact = <char*> realloc(E.exact, newcap)
        if E.ei == NULL or E.ej == NULL or E.cost == NULL or E.exact == NULL:
            return -1
        E.cap = newcap
    E.ei[E.n] = i
    E.ej[E.n] = j
    E.cost[E.n] = c
    E.exact[E.n] = exact
    E.n += 1
    return E.n - 1


cdef int _match_local(Search* S, const i64* indptr, const i64* nbr, const i64* w, int nv,
                      const i64* defects, int k, int* pos, int* pred, int* eid,
                      int* mate, int* stamp, bint uniform) noexcept nogil:
    """Exact min-weight perfect matching of ``k`` defects from local searches.

    Candidate edges join defects whose shortest path avoids other defects.
    After solving on them, every pair closer than its dual radius is checked
    against LP dual feasibility with its true distance; violating pairs are
    added and the problem is solved again. A feasible dual certifies the
    matching optimal on the complete defect graph.

    Returns 0 on success and 1 if the caller should fall back to the complete
    graph (no perfect matching among the candidates). Row ``i`` of ``pred`` is
    the predecessor tree used for the path from ``i`` to ``mate[i]`` when
    ``i < mate[i]``.
    """
    cdef Edges E
    cdef BState B
    cdef int s, t, i, j, f, e, b, rounds, violations, status = 0
    cdef int cur = 0
    cdef i64 maxc, top, r, z, dij
    cdef i64* wts
    E.cap = 8 * k + 8
    E.n = 0
    E.ei = <int*> malloc(E.cap * sizeof(int))
    E.ej = <int*> malloc(E.cap * sizeof(int))
    E.cost = <i64*> malloc(E.cap * sizeof(i64))
    E.exact = <char*> malloc(E.cap)
    for i in range(k * k):
        eid[i] = -1
    for s in range(k):
        _search(S, indptr, nbr, w, <int> defects[s], pos, True, INF, pred + s * nv, uniform, CANDIDATES)
        for f in range(S.nfound):
            t = S.found[f]
            if t > s:
                e = _edge_add(&E, s, t, S.found_d[f], 0)
                if e < 0:
                    status = -5
                    break
                eid[s * k + t] = e
                eid[t * k + s] = e
        if status:
            break
    rounds = 0
    while status == 0:
        rounds += 1
        _stat[4] += 1
        if rounds > 64:
            status = 1
            break
        maxc = 1
        for e in range(E.n):
            if E.cost[e] > maxc:
                maxc = E.cost[e]
        # large enough that every perfect matching outweighs any smaller one
        top = (k // 2 + 1) * maxc + 1
        wts = <i64*> malloc((E.n + 1) * sizeof(i64))
        for e in range(E.n):
            wts[e] = top - E.cost[e]
        if _bs_open(&B, k, E.n, E.ei, E.ej, wts):
            free(wts)
            _bs_close(&B)
            status = -5
            break
        free(wts)
        _solve(&B)
        if _bs_mates(&B, mate):
            _bs_close(&B)
            status = 1
            break
        violations = 0
        for i in range(k):
            r = top - B.dualvar[i]
            if r < 0:
                continue
            _search(S, indptr, nbr, w, <int> defects[i], pos, False, r, pred + i * nv, uniform, k)
            # mark the blossoms containing i
            cur += 1
            b = B.bparent[i]
            while b != -1:
                stamp[b] = cur
                b = B.bparent[b]
            for f in range(S.nfound):
                j = S.found[f]
                dij = S.found_d[f]
                z = 0
                b = B.bparent[j]
                while b != -1:
                    if stamp[b] == cur:
                        z += B.dualvar[b]
                    b = B.bparent[b]
                if B.dualvar[i] + B.dualvar[j] - 2 * (top - dij) + 2 * z >= 0:
                    continue
                e = eid[i * k + j]
                if e >= 0:
                    if dij < E.cost[e]:
                        E.cost[e] = dij
                        E.exact[e] = 1
                        violations += 1
                else:
                    e = _edge_add(&E, min(i, j), max(i, j), dij, 1)
                    if e < 0:
                        status = -5
                        break
                    eid[i * k + j] = e
                    eid[j * k + i] = e
                    violations += 1
            if status:
                break
        _bs_close(&B)
        if violations == 0:
            break
    if status == 0:
        # predecessor rows for the matched geodesics
        for i in range(k):
            j = mate[i]
            if j < i:
                continue
            e = eid[i * k + j]
            if E.exact[e]:
                _search(S, indptr, nbr, w, <int> defects[i], pos, False, E.cost[e], pred + i * nv, uniform, k)
            else:
                _search(S, indptr, nbr, w, <int> defects[i], pos, True, E.cost[e], pred + i * nv, uniform, k)
    free(E.ei); free(E.ej); free(E.cost); free(E.exact)
    return status


def match_all(node_ptr, members, indptr, nbr, weight, def_ptr, def_local):
    """Match the defects of every plane.

    Plane ``P`` owns local nodes ``0 .. node_ptr[P+1]-node_ptr[P]-1`` mapped to
    global stabilizers ``members[node_ptr[P] + local]``; its adjacency rows are
    ``indptr[node_ptr[P] + local]`` (absolute offsets into ``nbr``/``weight``,
    neighbours as local ids). Its defects are ``def_local[def_ptr[P]:def_ptr[P+1]]``.

    Returns global ``pairs`` (m x 2) and geodesics as ``(path_ptr, path_nodes)``.
    """
    cdef const i64[::1] nptr = np.ascontiguousarray(node_ptr, dtype=np.int64)
    cdef const i64[::1] mem = np.ascontiguousarray(members, dtype=np.int64)
    cdef const i64[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const i64[::1] nb = np.ascontiguousarray(nbr, dtype=np.int64)
    cdef const i64[::1] ww = np.ascontiguousarray(weight, dtype=np.int64)
    cdef const i64[::1] dptr = np.ascontiguousarray(def_ptr, dtype=np.int64)
    cdef const i64[::1] dloc = np.ascontiguousarray(def_local, dtype=np.int64)
    cdef int nplanes = nptr.shape[0] - 1
    cdef int maxnv = 0, maxk = 0, maxadj = 0
    cdef int P, nv, k, i, j, node, src, start, npairs, npath, status, tmp
    cdef i64 base, lo, hi, e
    cdef bint uniform
    for P in range(nplanes):
        maxnv = max(maxnv, <int> (nptr[P + 1] - nptr[P]))
        maxk = max(maxk, <int> (dptr[P + 1] - dptr[P]))
        maxadj = max(maxadj, <int> (ip[nptr[P + 1]] - ip[nptr[P]]))
    total_def = dptr[nplanes] if nplanes else 0
    pairs = np.empty((total_def // 2, 2), dtype=np.int64)
    cdef i64[:, ::1] pv = pairs
    path_ptr = np.zeros(total_def // 2 + 1, dtype=np.int64)
    cdef i64[::1] pp = path_ptr
    cdef int pcap = 64 + 8 * total_def
    cdef int* pathbuf = <int*> malloc(pcap * sizeof(int))
    cdef i64* dist = <i64*> malloc((maxk * maxk + 1) * sizeof(i64))
    cdef int* pred = <int*> malloc((maxk * maxnv + 1) * sizeof(int))
    cdef int* mate = <int*> malloc((maxk + 1) * sizeof(int))
    cdef int* heap = <int*> malloc((maxnv + 1) * sizeof(int))
    cdef int* hpos = <int*> malloc((maxnv + 1) * sizeof(int))
    cdef i64* d = <i64*> malloc((maxnv + 1) * sizeof(i64))
    cdef char* settled = <char*> malloc(maxnv + 1)
    cdef int* pos = <int*> malloc((maxnv + 1) * sizeof(int))
    cdef int* eid = <int*> malloc((maxk * maxk + 1) * sizeof(int))
    cdef int* stamp = <int*> calloc(2 * maxk + 2, sizeof(int))
    cdef Search S
    S.d = d
    S.settled = settled
    S.heap = heap
    S.hpos = hpos
    S.touched = <int*> malloc((maxnv + 1) * sizeof(int))
    S.found = <int*> malloc((maxk + 1) * sizeof(int))
    S.found_d = <i64*> malloc((maxk + 1) * sizeof(i64))
    for i in range(maxnv + 1):
        d[i] = INF
        settled[i] = 0
        hpos[i] = -1
        pos[i] = -1
    npairs = 0
    npath = 0
    status = 0
    with nogil:
        for P in range(nplanes):
            k = <int> (dptr[P + 1] - dptr[P])
            if k == 0:
                continue
            if k % 2:
                status = -3
                break
            nv = <int> (nptr[P + 1] - nptr[P])
            base = nptr[P]
            lo = ip[base]
            hi = ip[base + nv]
            uniform = True
            for e in range(lo + 1, hi):
                if ww[e] != ww[lo]:
                    uniform = False
                    break
            for i in range(k):
                pos[dloc[dptr[P] + i]] = i
            _stat[5] += 1
            status = _match_local(&S, &ip[base], &nb[0], &ww[0], nv, &dloc[dptr[P]], k,
                                  pos, pred, eid, mate, stamp, uniform)
            for i in range(k):
                pos[dloc[dptr[P] + i]] = -1
            if status == 1:
                # the candidates admit no perfect matching: use the complete graph
                status = _bfs_or_dijkstra(&ip[base], &nb[0], &ww[0], nv, &dloc[dptr[P]], k,
                                          dist, pred, heap, hpos, d, settled, pos, uniform)
                for i in range(maxnv + 1):
                    d[i] = INF
                    settled[i] = 0
                    hpos[i] = -1
                    pos[i] = -1
                if status == 0 and _mwpm_complete(k, dist, mate):
                    status = -4
            if status:
                break
            for i in range(k):
                j = mate[i]
                if j < i:
                    continue
                src = <int> dloc[dptr[P] + i]
                node = <int> dloc[dptr[P] + j]
                pv[npairs, 0] = mem[base + src]
                pv[npairs, 1] = mem[base + node]
                if _grow(&pathbuf, &pcap, npath + nv + 1):
                    status = -5
                    break
                start = npath
                pathbuf[npath] = node
                npath += 1
                while node != src:
                    node = pred[i * nv + node]
                    pathbuf[npath] = node
                    npath += 1
                for e in range((npath - start) // 2):
                    tmp = pathbuf[start + e]
                    pathbuf[start + e] = pathbuf[npath - 1 - e]
                    pathbuf[npath - 1 - e] = tmp
                for e in range(start, npath):
                    pathbuf[e] = <int> mem[base + pathbuf[e]]
                npairs += 1
                pp[npairs] = npath
            if status:
                break
    nodes = np.empty(npath, dtype=np.int64)
    for i in range(npath):
        nodes[i] = pathbuf[i]
    free(pathbuf); free(dist); free(pred); free(mate); free(heap)
    free(d); free(settled); free(pos); free(hpos); free(eid); free(stamp)
    free(S.touched); free(S.found); free(S.found_d)
    if status == -1:
        raise ValueError("plane graph is disconnected between defects")
    if status == -3:
        raise AssertionError("odd number of defects on a symmetry plane")
    if status:
        raise RuntimeError(f"plane matching failed (status {status})")
    return pairs[:npairs], path_ptr[:npairs + 1], nodes


def match_plane(indptr, nbr, weight, defects):
    indptr = np.asarray(indptr, dtype=np.int64)
    nv = len(indptr) - 1
    defects = np.asarray(defects, dtype=np.int64)
    return match_all(
        np.array([0, nv]), np.arange(nv), indptr, nbr, weight,
        np.array([0, defects.size]), defects,
    )


# ---------------------------------------------------------------------------
# Flooding sum-product BP

cdef inline double _clip(double v, double lim) noexcept nogil:
    if v > lim:
        return lim
    if v < -lim:
        return -lim
    return v


def bp_flood(check_vars, var_edges, syndrome, prior_llr, int max_iters):
    """Sum-product BP with messages held as likelihood ratios ``r = exp(LLR)``.

    The tanh rule becomes rational: ``tanh(L/2) = (r - 1) / (r + 1)`` and the
    variable update is a product, so no transcendental calls are needed in the
    loop. Ratios are clamped to ``[exp(-30), exp(30)]``.
    """
    cdef const int[:, ::1] cv = np.ascontiguousarray(check_vars, dtype=np.int32)
    cdef const int[:, ::1] ve = np.ascontiguousarray(var_edges, dtype=np.int32)
    cdef const unsigned char[::1] syn = np.ascontiguousarray(syndrome, dtype=np.uint8)
    cdef const double[::1] prior = np.ascontiguousarray(prior_llr, dtype=np.float64)
    cdef int m = cv.shape[0]
    cdef int deg = cv.shape[1]
    cdef int nvar = ve.shape[0]
    cdef int vdeg = ve.shape[1]
    rprior_arr = np.exp(np.clip(np.asarray(prior), -700.0, 700.0))
    post_arr = rprior_arr.copy()
    hard_arr = np.zeros(nvar, dtype=np.uint8)
    v2c_arr = np.empty(m * deg, dtype=np.float64)
    c2v_arr = np.empty(m * deg, dtype=np.float64)
    cdef double[::1] rprior = rprior_arr
    cdef double[::1] post = post_arr
    cdef unsigned char[::1] hard = hard_arr
    cdef double[::1] v2c = v2c_arr
    cdef double[::1] c2v = c2v_arr
    cdef double tclip = tanh(LLR_CLIP / 2)
    cdef double rmax = exp(LLR_CLIP)
    cdef double rmin = exp(-LLR_CLIP)
    cdef double t[64]
    cdef double pre[65]
    cdef double suf, total, sgn, x, r
    cdef int it, i, s, j, e, par
    cdef bint ok = False
    if deg > 64:
        raise ValueError("check degree above 64 unsupported")
    with nogil:
        for i in range(m):
            for s in range(deg):
                r = rprior[cv[i, s]]
                v2c[i * deg + s] = rmin if r < rmin else (rmax if r > rmax else r)
        it = 0
        while it < max_iters:
            it += 1
            for i in range(m):
                pre[0] = 1.0
                for s in range(deg):
                    r = v2c[i * deg + s]
                    t[s] = (r - 1.0) / (r + 1.0)
                    pre[s + 1] = pre[s] * t[s]
                sgn = -1.0 if syn[i] else 1.0
                suf = 1.0
                for s in range(deg - 1, -1, -1):
                    x = _clip(sgn * pre[s] * suf, tclip)
                    c2v[i * deg + s] = (1.0 + x) / (1.0 - x)
                    suf = suf * t[s]
            for j in range(nvar):
                total = rprior[j]
                for s in range(vdeg):
                    total = total * c2v[ve[j, s]]
                post[j] = total
                hard[j] = 1 if total < 1.0 else 0
            ok = True
            for i in range(m):
                par = 0
                for s in range(deg):
                    par ^= hard[cv[i, s]]
                if par != syn[i]:
                    ok = False
                    break
            if ok:
                break
            for j in range(nvar):
                for s in range(vdeg):
                    e = ve[j, s]
                    r = post[j] / c2v[e]
                    v2c[e] = rmin if r < rmin else (rmax if r > rmax else r)
    return np.log(post_arr), hard_arr, bool(ok), it


# ---------------------------------------------------------------------------
# Clustering, covering boxes and the sweep corrector
#
# These mirror cluster_defects, bounding_box and _Sweeper in chamon.decode
# move for move; the Python versions stay as the reference implementation.

cdef int _find(int* parent, int a) noexcept nogil:
    cdef int r = a
    while parent[r] != r:
        r = parent[r]
    while parent[a] != r:
        a, parent[a] = parent[a], r
    return r


def cluster_sites(int nstab, defects, pairs, path_ptr, path_nodes):
    """Connected components of the matched-pair graph.

    Returns ``(def_ptr, def_sites, site_ptr, sites)``: per cluster its defects
    (ascending) and its defects followed by the nodes of its geodesics.
    Clusters are ordered by their smallest defect.
    """
    cdef const i64[::1] dv = np.ascontiguousarray(defects, dtype=np.int64)
    cdef const i64[:, ::1] pv = np.ascontiguousarray(np.asarray(pairs, dtype=np.int64).reshape(-1, 2))
    cdef const i64[::1] pp = np.ascontiguousarray(path_ptr, dtype=np.int64)
    cdef const i64[::1] pn = np.ascontiguousarray(path_nodes, dtype=np.int64)
    cdef int k = dv.shape[0]
    cdef int m = pv.shape[0]
    cdef int i, j, a, b, c, ncl
    cdef i64 e
    local = np.full(nstab, -1, dtype=np.int32)
    cdef int[::1] lv = local
    parent_arr = np.arange(max(k, 1), dtype=np.int32)
    cdef int[::1] par = parent_arr
    label_arr = np.full(max(k, 1), -1, dtype=np.int32)
    cdef int[::1] lab = label_arr
    for i in range(k):
        lv[dv[i]] = i
    for j in range(m):
        a = _find(&par[0], lv[pv[j, 0]])
        b = _find(&par[0], lv[pv[j, 1]])
        if a != b:
            if a < b:
                par[b] = a
            else:
                par[a] = b
    ncl = 0
    for i in range(k):
        r = _find(&par[0], i)
        if lab[r] < 0:
            lab[r] = ncl
            ncl += 1
        lab[i] = lab[r]
    def_ptr = np.zeros(ncl + 1, dtype=np.int64)
    site_ptr = np.zeros(ncl + 1, dtype=np.int64)
    cdef i64[::1] dp = def_ptr
    cdef i64[::1] sp = site_ptr
    for i in range(k):
        dp[lab[i] + 1] += 1
        sp[lab[i] + 1] += 1
    for j in range(m):
        sp[lab[lv[pv[j, 0]]] + 1] += pp[j + 1] - pp[j]
    for c in range(ncl):
        dp[c + 1] += dp[c]
        sp[c + 1] += sp[c]
    def_sites = np.empty(k, dtype=np.int64)
    sites = np.empty(sp[ncl], dtype=np.int64)
    cdef i64[::1] ds = def_sites
    cdef i64[::1] ss = sites
    fill_d = def_ptr[:ncl].copy()
    fill_s = site_ptr[:ncl].copy()
    cdef i64[::1] fd = fill_d
    cdef i64[::1] fs = fill_s
    for i in range(k):
        c = lab[i]
        ds[fd[c]] = dv[i]
        fd[c] += 1
        ss[fs[c]] = dv[i]
        fs[c] += 1
    for j in range(m):
        c = lab[lv[pv[j, 0]]]
        for e in range(pp[j], pp[j + 1]):
            ss[fs[c]] = pn[e]
            fs[c] += 1
    return def_ptr, def_sites, site_ptr, sites


cdef void _covering_arc(const char* occ, int d, int* lo, int* ext) noexcept nogil:
    """Smallest arc covering the occupied positions; ``ext = -1`` if none exists."""
    cdef int start = -1, i, step, run = 0, best_len = -1, best_end = 0, nocc = 0
    for i in range(d):
        if occ[i]:
            nocc += 1
            if start < 0:
                start = i
    if nocc == d or nocc == 0:
        lo[0] = 0
        ext[0] = -1
        return
    for step in range(1, d + 1):
        i = (start + step) % d
        if occ[i]:
            if run > best_len:
                best_len = run
                best_end = i
            run = 0
        else:
            run += 1
    lo[0] = best_end
    ext[0] = d - best_len - 1


def covering_boxes(int d, coords, site_ptr, sites):
    """Per cluster and axis the covering arc ``(lo, extent)``; extent -1 marks a wrap."""
    cdef const i64[:, ::1] cv = np.ascontiguousarray(coords, dtype=np.int64)
    cdef const i64[::1] sp = np.ascontiguousarray(site_ptr, dtype=np.int64)
    cdef const i64[::1] ss = np.ascontiguousarray(sites, dtype=np.int64)
    cdef int ncl = sp.shape[0] - 1
    cdef int c, axis, i
    cdef i64 e
    lo = np.zeros((ncl, 3), dtype=np.int64)
    ext = np.zeros((ncl, 3), dtype=np.int64)
    cdef i64[:, ::1] lv = lo
    cdef i64[:, ::1] ev = ext
    cdef char* occ = <char*> malloc(d)
    cdef int a_lo, a_ext
    for c in range(ncl):
        for axis in range(3):
            for i in range(d):
                occ[i] = 0
            for e in range(sp[c], sp[c + 1]):
                occ[cv[ss[e], axis] % d] = 1
            _covering_arc(occ, d, &a_lo, &a_ext)
            lv[c, axis] = a_lo
            ev[c, axis] = a_ext
    free(occ)
    return lo, ext


cdef struct Sweep:
    int d
    int lo[3]
    int ext[3]
    int pad[3]
    char* occ
    int* act
    int nact
    int cap
    int* stamp
    int cur
    int* row
    int spills
    int* mq
    int* mp
    int nmoves
    int mcap
    const i64* site_index


cdef inline int _wrap(int c, int d) noexcept nogil:
    c %= d
    return c + d if c < 0 else c


cdef inline int _loc(Sweep* s, int axis, int c) noexcept nogil:
    return _wrap(c - s.lo[axis] + s.pad[axis], s.d) - s.pad[axis]


cdef inline bint _inside(Sweep* s, int axis, int c) noexcept nogil:
    cdef int v = _loc(s, axis, c)
    return 0 <= v <= s.ext[axis]


cdef int _toggle(Sweep* s, int x, int y, int z) noexcept nogil:
    cdef int d = s.d
    cdef int cell
    cdef int* grown
    x = _wrap(x, d)
    y = _wrap(y, d)
    z = _wrap(z, d)
    cell = (x * d + y) * d + z
    if s.occ[cell]:
        s.occ[cell] = 0
        return 0
    s.occ[cell] = 1
    if s.nact == s.cap:
        grown = <int*> realloc(s.act, 2 * s.cap * sizeof(int))
        if grown == NULL:
            return -1
        s.act = grown
        s.cap *= 2
    s.act[s.nact] = cell
    s.nact += 1
    if not (_inside(s, 0, x) and _inside(s, 1, y) and _inside(s, 2, z)):
        s.spills += 1
    return 0


cdef int _apply(Sweep* s, int x, int y, int z, int pauli) noexcept nogil:
    cdef int d = s.d
    cdef int* grown
    if s.nmoves == s.mcap:
        grown = <int*> realloc(s.mq, 2 * s.mcap * sizeof(int))
        if grown == NULL:
            return -1
        s.mq = grown
        grown = <int*> realloc(s.mp, 2 * s.mcap * sizeof(int))
        if grown == NULL:
            return -1
        s.mp = grown
        s.mcap *= 2
    s.mq[s.nmoves] = <int> s.site_index[(_wrap(x, d) * d + _wrap(y, d)) * d + _wrap(z, d)]
    s.mp[s.nmoves] = pauli
    s.nmoves += 1
    if pauli == 1:
        return (_toggle(s, x, y + 1, z) | _toggle(s, x, y - 1, z)
                | _toggle(s, x, y, z + 1) | _toggle(s, x, y, z - 1))
    if pauli == 2:
        return (_toggle(s, x + 1, y, z) | _toggle(s, x - 1, y, z)
                | _toggle(s, x, y, z + 1) | _toggle(s, x, y, z - 1))
    return (_toggle(s, x + 1, y, z) | _toggle(s, x - 1, y, z)
            | _toggle(s, x, y + 1, z) | _toggle(s, x, y - 1, z))


cdef int _gather(Sweep* s, int axis, int layer, int ka, int kb) noexcept nogil:
    """Live defects whose local ``axis`` coordinate is ``layer``, sorted by the
    local ``(ka, kb)`` coordinates; compacts the active list as a side effect."""
    cdef int d = s.d
    cdef int i, cell, n = 0, keep = 0, j, key, tmp
    cdef int c[3]
    s.cur += 1
    for i in range(s.nact):
        cell = s.act[i]
        if not s.occ[cell] or s.stamp[cell] == s.cur:
            continue
        s.stamp[cell] = s.cur
        s.act[keep] = cell
        keep += 1
        c[0] = cell // (d * d)
        c[1] = (cell // d) % d
        c[2] = cell % d
        if _loc(s, axis, c[axis]) == layer:
            s.row[2 * n] = cell
            s.row[2 * n + 1] = (_loc(s, ka, c[ka]) + d) * (3 * d) + _loc(s, kb, c[kb]) + d
            n += 1
    s.nact = keep
    # insertion sort by key; rows are short
    for i in range(1, n):
        cell = s.row[2 * i]
        key = s.row[2 * i + 1]
        j = i - 1
        while j >= 0 and s.row[2 * j + 1] > key:
            s.row[2 * j + 2] = s.row[2 * j]
            s.row[2 * j + 3] = s.row[2 * j + 1]
            j -= 1
        s.row[2 * j + 2] = cell
        s.row[2 * j + 3] = key
    return n


cdef int _sweep_one(Sweep* s) noexcept nogil:
    cdef int d = s.d
    cdef int layer, n, i, cell, x, y, z, pauli
    cdef bint a_fits, y_fits
    for layer in range(s.ext[2], 1, -1):
        n = _gather(s, 2, layer, 0, 1)
        for i in range(n):
            cell = s.row[2 * i]
            x = cell // (d * d)
            y = (cell // d) % d
            z = cell % d - 1
            a_fits = _inside(s, 1, y - 1) and _inside(s, 1, y + 1) and _inside(s, 0, x)
            y_fits = _inside(s, 0, x - 1) and _inside(s, 0, x + 1) and _inside(s, 1, y)
            pauli = 2 if (y_fits and not a_fits) else 1
            if _apply(s, x, y, z, pauli):
                return -1
    for layer in range(s.ext[0], 1, -1):
        n = _gather(s, 0, layer, 1, 2)
        for i in range(n):
            cell = s.row[2 * i]
            x = cell // (d * d) - 1
            y = (cell // d) % d
            z = cell % d
            a_fits = _inside(s, 1, y - 1) and _inside(s, 1, y + 1) and _inside(s, 2, z)
            y_fits = _inside(s, 2, z - 1) and _inside(s, 2, z + 1) and _inside(s, 1, y)
            pauli = 2 if (y_fits and not a_fits) else 3
            if _apply(s, x, y, z, pauli):
                return -1
    return 0


def sweep_clusters(int d, site_index, coords, def_ptr, def_sites, lo, ext):
    """Sweep every cluster inside its box.

    ``site_index`` is the flattened ``d^3`` coordinate-to-index table. Returns
    ``(move_qubit, move_pauli, res_ptr, res_sites, spills)`` with residual
    defects grouped per cluster.
    """
    cdef const i64[::1] si = np.ascontiguousarray(site_index, dtype=np.int64).ravel()
    cdef const i64[:, ::1] cv = np.ascontiguousarray(coords, dtype=np.int64)
    cdef const i64[::1] dp = np.ascontiguousarray(def_ptr, dtype=np.int64)
    cdef const i64[::1] ds = np.ascontiguousarray(def_sites, dtype=np.int64)
    cdef const i64[:, ::1] lv = np.ascontiguousarray(lo, dtype=np.int64)
    cdef const i64[:, ::1] ev = np.ascontiguousarray(ext, dtype=np.int64)
    cdef int ncl = dp.shape[0] - 1
    cdef int ncell = d * d * d
    cdef int c, axis, i, status = 0, nres = 0
    cdef i64 e, st
    cdef Sweep s
    res_ptr = np.zeros(ncl + 1, dtype=np.int64)
    spills = np.zeros(ncl, dtype=np.int64)
    cdef i64[::1] rp = res_ptr
    cdef i64[::1] spv = spills
    res_list = []
    s.d = d
    s.site_index = &si[0]
    s.occ = <char*> calloc(ncell, 1)
    s.stamp = <int*> calloc(ncell, sizeof(int))
    s.cap = 64
    s.act = <int*> malloc(s.cap * sizeof(int))
    s.row = <int*> malloc(2 * ncell * sizeof(int))
    s.mcap = 64
    s.mq = <int*> malloc(s.mcap * sizeof(int))
    s.mp = <int*> malloc(s.mcap * sizeof(int))
    s.nmoves = 0
    s.cur = 0
    cdef int* resbuf = <int*> malloc((ncell + 1) * sizeof(int))
    with nogil:
        for c in range(ncl):
            for axis in range(3):
                s.lo[axis] = <int> lv[c, axis]
                s.ext[axis] = <int> ev[c, axis]
                s.pad[axis] = (d - 1 - s.ext[axis]) // 2
            s.nact = 0
            s.spills = 0
            for e in range(dp[c], dp[c + 1]):
                st = ds[e]
                if _toggle(&s, <int> cv[st, 0], <int> cv[st, 1], <int> cv[st, 2]):
                    status = -1
                    break
            if status == 0:
                status = _sweep_one(&s)
            if status:
                break
            spv[c] = s.spills
            # residual: live cells, cleared for the next cluster
            s.cur += 1
            for i in range(s.nact):
                st = s.act[i]
                if s.occ[st] and s.stamp[st] != s.cur:
                    s.stamp[st] = s.cur
                    s.occ[st] = 0
                    resbuf[nres] = <int> si[st]
                    nres += 1
            rp[c + 1] = nres
    move_q = np.empty(s.nmoves, dtype=np.int64)
    move_p = np.empty(s.nmoves, dtype=np.int8)
    for i in range(s.nmoves):
        move_q[i] = s.mq[i]
        move_p[i] = s.mp[i]
    res_sites = np.empty(nres, dtype=np.int64)
    for i in range(nres):
        res_sites[i] = resbuf[i]
    free(s.occ); free(s.stamp); free(s.act); free(s.row); free(s.mq); free(s.mp); free(resbuf)
    if status:
        raise MemoryError("sweep buffers")
    return move_q, move_p, res_ptr, res_sites, spills
