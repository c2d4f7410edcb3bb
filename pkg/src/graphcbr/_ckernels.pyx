# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: integrated graph similarity and MRR split scanning.

Statement-for-statement twin of ``_pykernels``; results are bit-identical.
"""

import numpy as np
from libc.stdlib cimport malloc, free, realloc
from libc.math cimport INFINITY

BACKEND = "cython"


cdef struct GView:
    int n
    int* concepts
    long long* attr_off   # n + 1 entries, absolute offsets into attr_ids
    int* attr_ids
    int ne
    int* esrc
    int* edst
    int* erel
    long long key


cdef struct Work:
    int cap_nm
    int cap_n
    double* sim
    double* cost
    double* u
    double* v
    double* minv
    int* p
    int* way
    char* used
    int* assign
    int* gx
    int* mx
    char* gnx
    char* gny
    char* gex
    char* gey


cdef int work_reserve(Work* w, int n, int m, int ne) nogil:
    cdef int nm = n * m
    cdef int k = n
    if m > k:
        k = m
    if ne > k:
        k = ne
    k += 1
    if nm > w.cap_nm:
        w.sim = <double*> realloc(w.sim, nm * sizeof(double))
        w.cost = <double*> realloc(w.cost, nm * sizeof(double))
        w.cap_nm = nm
    if k > w.cap_n:
        w.u = <double*> realloc(w.u, k * sizeof(double))
        w.v = <double*> realloc(w.v, k * sizeof(double))
        w.minv = <double*> realloc(w.minv, k * sizeof(double))
        w.p = <int*> realloc(w.p, k * sizeof(int))
        w.way = <int*> realloc(w.way, k * sizeof(int))
        w.used = <char*> realloc(w.used, k * sizeof(char))
        w.assign = <int*> realloc(w.assign, k * sizeof(int))
        w.gx = <int*> realloc(w.gx, k * sizeof(int))
        w.mx = <int*> realloc(w.mx, k * sizeof(int))
        w.gnx = <char*> realloc(w.gnx, k * sizeof(char))
        w.gny = <char*> realloc(w.gny, k * sizeof(char))
        w.gex = <char*> realloc(w.gex, k * sizeof(char))
        w.gey = <char*> realloc(w.gey, k * sizeof(char))
        w.cap_n = k
    return 0


cdef void work_init(Work* w) nogil:
    w.cap_nm = 0
    w.cap_n = 0
    w.sim = NULL
    w.cost = NULL
    w.u = NULL
    w.v = NULL
    w.minv = NULL
    w.p = NULL
    w.way = NULL
    w.used = NULL
    w.assign = NULL
    w.gx = NULL
    w.mx = NULL
    w.gnx = NULL
    w.gny = NULL
    w.gex = NULL
    w.gey = NULL


cdef void work_free(Work* w) nogil:
    free(w.sim); free(w.cost); free(w.u); free(w.v); free(w.minv)
    free(w.p); free(w.way); free(w.used); free(w.assign); free(w.gx); free(w.mx)
    free(w.gnx); free(w.gny); free(w.gex); free(w.gey)
    work_init(w)


cdef void hungarian(double* cost, int n, int m, Work* w) nogil:
    # cost is row-major n x m, n <= m; result in w.assign[0..n)
    cdef double* u = w.u
    cdef double* v = w.v
    cdef double* minv = w.minv
    cdef int* p = w.p
    cdef int* way = w.way
    cdef char* used = w.used
    cdef int i, j, i0, j0, j1
    cdef double delta, cur, ui0
    cdef double* row
    for j in range(m + 1):
        v[j] = 0.0
        p[j] = 0
        way[j] = 0
    for i in range(n + 1):
        u[i] = 0.0
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(m + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            delta = INFINITY
            j1 = 0
            row = cost + (i0 - 1) * m
            ui0 = u[i0]
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    for j in range(1, m + 1):
        if p[j] != 0:
            w.assign[p[j] - 1] = j - 1


def assign_min(cost):
    """Hungarian minimization on a 2-D array with rows <= cols."""
    cdef double[:, ::1] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef int n = c.shape[0]
    cdef int m = c.shape[1]
    cdef Work w
    work_init(&w)
    work_reserve(&w, n, m, 0)
    out = np.zeros(n, dtype=np.int64)
    cdef long long[::1] o = out
    cdef int i
    if n > 0:
        hungarian(&c[0, 0], n, m, &w)
        for i in range(n):
            o[i] = w.assign[i]
    work_free(&w)
    return out


cdef inline double node_sim(GView* x, int i, GView* y, int j, double w_c, double w_a) nogil:
    cdef bint eq = x.concepts[i] == y.concepts[j]
    cdef long long a0 = x.attr_off[i]
    cdef long long a1 = x.attr_off[i + 1]
    cdef long long b0 = y.attr_off[j]
    cdef long long b1 = y.attr_off[j + 1]
    cdef long long la = a1 - a0
    cdef long long lb = b1 - b0
    cdef long long inter = 0
    cdef long long ia = a0
    cdef long long ib = b0
    cdef int va, vb
    cdef double ls
    while ia < a1 and ib < b1:
        va = x.attr_ids[ia]
        vb = y.attr_ids[ib]
        if va == vb:
            inter += 1
            ia += 1
            ib += 1
        elif va < vb:
            ia += 1
        else:
            ib += 1
    if la == 0 and lb == 0:
        ls = 1.0
    else:
        ls = (<double> inter) / (<double> (la if la > lb else lb))
    if eq and ls == 1.0:
        return 1.0
    if not eq and ls == 0.0:
        return 0.0
    return w_c * (1.0 if eq else 0.0) + w_a * ls


cdef double partition(GView* x, GView* y, double* prm, Work* w, double* total_out) nogil:
    # Fills w.mx, w.gnx, w.gex, w.gny, w.gey for the ordered pair (x, y).
    cdef double w_c = prm[0], w_a = prm[1], s_node = prm[2], s_edge = prm[3]
    cdef double om_n = prm[4], om_e = prm[5]
    cdef int nx = x.n, ny = y.n, ex = x.ne, ey = y.ne
    cdef int i, j, e, k, s, d, r
    cdef int n_gnx = 0, n_gex = 0
    cdef double total = 0.0, sij
    cdef double gem_x, diff_x, gem_y, diff_y
    cdef int big = nx if nx > ny else ny
    if ex > big:
        big = ex
    if ey > big:
        big = ey
    work_reserve(w, nx if nx > 0 else 1, ny if ny > 0 else 1, big)
    for i in range(nx):
        w.mx[i] = -1
        w.gnx[i] = 0
        w.gx[i] = -1
    for j in range(ny):
        w.gny[j] = 0
    for e in range(ex):
        w.gex[e] = 0
    for k in range(ey):
        w.gey[k] = 0
    total_out[0] = 0.0
    if nx == 0 and ny == 0:
        return 1.0
    if nx == 0 or ny == 0:
        return 0.0
    for i in range(nx):
        for j in range(ny):
            w.sim[i * ny + j] = node_sim(x, i, y, j, w_c, w_a)
    if nx <= ny:
        for i in range(nx):
            for j in range(ny):
                w.cost[i * ny + j] = -w.sim[i * ny + j]
        hungarian(w.cost, nx, ny, w)
        for i in range(nx):
            w.mx[i] = w.assign[i]
    else:
        for j in range(ny):
            for i in range(nx):
                w.cost[j * nx + i] = -w.sim[i * ny + j]
        hungarian(w.cost, ny, nx, w)
        for j in range(ny):
            w.mx[w.assign[j]] = j
    for i in range(nx):
        j = w.mx[i]
        if j >= 0:
            sij = w.sim[i * ny + j]
            total += sij
            if sij >= s_node:
                w.gx[i] = j
                w.gnx[i] = 1
                w.gny[j] = 1
                n_gnx += 1
    for e in range(ex):
        s = w.gx[x.esrc[e]]
        d = w.gx[x.edst[e]]
        if s < 0 or d < 0:
            continue
        r = x.erel[e]
        for k in range(ey):
            if not w.gey[k] and y.esrc[k] == s and y.edst[k] == d and y.erel[k] == r:
                w.gey[k] = 1
                w.gex[e] = 1
                n_gex += 1
                break
    if s_edge <= 0.0:
        for e in range(ex):
            if w.gex[e]:
                continue
            s = w.gx[x.esrc[e]]
            d = w.gx[x.edst[e]]
            if s < 0 or d < 0:
                continue
            for k in range(ey):
                if not w.gey[k] and y.esrc[k] == s and y.edst[k] == d:
                    w.gey[k] = 1
                    w.gex[e] = 1
                    n_gex += 1
                    break
    gem_x = om_n * n_gnx + om_e * n_gex
    diff_x = om_n * (nx - n_gnx) + om_e * (ex - n_gex)
    gem_y = om_n * n_gnx + om_e * n_gex
    diff_y = om_n * (ny - n_gnx) + om_e * (ey - n_gex)
    total_out[0] = total
    return (gem_x / (gem_x + diff_x) + gem_y / (gem_y + diff_y)) / 2.0


cdef bint identical(GView* x, GView* y) nogil:
    cdef int i
    cdef long long k, la, lb
    if x.n != y.n or x.ne != y.ne:
        return False
    for i in range(x.n):
        if x.concepts[i] != y.concepts[i]:
            return False
        la = x.attr_off[i + 1] - x.attr_off[i]
        lb = y.attr_off[i + 1] - y.attr_off[i]
        if la != lb:
            return False
        for k in range(la):
            if x.attr_ids[x.attr_off[i] + k] != y.attr_ids[y.attr_off[i] + k]:
                return False
    for i in range(x.ne):
        if x.esrc[i] != y.esrc[i] or x.edst[i] != y.edst[i] or x.erel[i] != y.erel[i]:
            return False
    return True


cdef class _Batch:
    cdef long long[::1] node_off
    cdef int[::1] concepts
    cdef long long[::1] attr_off
    cdef int[::1] attr_ids
    cdef long long[::1] edge_off
    cdef int[::1] esrc
    cdef int[::1] edst
    cdef int[::1] erel
    cdef long long[::1] keys

    def __init__(self, batch):
        self.node_off = batch.node_off
        self.concepts = batch.concepts
        self.attr_off = batch.attr_off
        self.attr_ids = batch.attr_ids
        self.edge_off = batch.edge_off
        self.esrc = batch.esrc
        self.edst = batch.edst
        self.erel = batch.erel
        self.keys = batch.keys

    cdef void view(self, long long g, GView* out) nogil:
        cdef long long a = self.node_off[g]
        cdef long long c = self.edge_off[g]
        out.n = <int> (self.node_off[g + 1] - a)
        out.concepts = &self.concepts[0] + a
        out.attr_off = &self.attr_off[0] + a
        out.attr_ids = &self.attr_ids[0]
        out.ne = <int> (self.edge_off[g + 1] - c)
        out.esrc = &self.esrc[0] + c
        out.edst = &self.edst[0] + c
        out.erel = &self.erel[0] + c
        out.key = self.keys[g]


cdef double pair_value(GView* x, GView* y, double* prm, Work* w) nogil:
    cdef double total
    if x.key == y.key and identical(x, y):
        return 1.0
    if x.key > y.key:
        return partition(y, x, prm, w, &total)
    return partition(x, y, prm, w, &total)


def pair_values(batch_a, batch_b, ia, ib, params, out):
    """Integrated similarity for each pair ``(ia[k], ib[k])``, written to ``out``."""
    cdef _Batch A = _Batch(batch_a)
    cdef _Batch B = _Batch(batch_b)
    cdef long long[::1] va = np.ascontiguousarray(ia, dtype=np.int64)
    cdef long long[::1] vb = np.ascontiguousarray(ib, dtype=np.int64)
    cdef double[::1] o = out
    cdef double prm[6]
    cdef Py_ssize_t k, npairs = va.shape[0]
    cdef GView x, y
    cdef Work w
    for k in range(6):
        prm[k] = float(params[k])
    work_init(&w)
    with nogil:
        for k in range(npairs):
            A.view(va[k], &x)
            B.view(vb[k], &y)
            o[k] = pair_value(&x, &y, prm, &w)
        work_free(&w)
    return out


def pair_detail(batch_a, long long a, batch_b, long long b, params):
    cdef _Batch A = _Batch(batch_a)
    cdef _Batch B = _Batch(batch_b)
    cdef GView x, y
    cdef Work w
    cdef double prm[6]
    cdef double total = 0.0, value
    cdef int i, k
    for k in range(6):
        prm[k] = float(params[k])
    A.view(a, &x)
    B.view(b, &y)
    mx = np.full(x.n, -1, dtype=np.int64)
    gnx = np.zeros(x.n, dtype=np.int64)
    gex = np.zeros(x.ne, dtype=np.int64)
    gny = np.zeros(y.n, dtype=np.int64)
    gey = np.zeros(y.ne, dtype=np.int64)
    cdef long long[::1] v_mx = mx
    cdef long long[::1] v_gnx = gnx
    cdef long long[::1] v_gex = gex
    cdef long long[::1] v_gny = gny
    cdef long long[::1] v_gey = gey
    if x.key == y.key and identical(&x, &y):
        for i in range(x.n):
            v_mx[i] = i
            v_gnx[i] = 1
            v_gny[i] = 1
        for i in range(x.ne):
            v_gex[i] = 1
            v_gey[i] = 1
        return 1.0, float(x.n), mx, gnx, gex, gny, gey
    work_init(&w)
    if x.key > y.key:
        value = partition(&y, &x, prm, &w, &total)
        for i in range(y.n):
            if w.mx[i] >= 0:
                v_mx[w.mx[i]] = i
            v_gny[i] = w.gnx[i]
        for i in range(y.ne):
            v_gey[i] = w.gex[i]
        for i in range(x.n):
            v_gnx[i] = w.gny[i]
        for i in range(x.ne):
            v_gex[i] = w.gey[i]
    else:
        value = partition(&x, &y, prm, &w, &total)
        for i in range(x.n):
            v_mx[i] = w.mx[i]
            v_gnx[i] = w.gnx[i]
        for i in range(x.ne):
            v_gex[i] = w.gex[i]
        for i in range(y.n):
            v_gny[i] = w.gny[i]
        for i in range(y.ne):
            v_gey[i] = w.gey[i]
    work_free(&w)
    return value, total, mx, gnx, gex, gny, gey


# --- ranking kernels ------------------------------------------------------

cdef double rr_one(long long q, long long* q_ptr, signed char* labels, long long* cidrank,
                   double* cur_score, signed char* side, double* lr) nogil:
    cdef double best_s = -1.0, s
    cdef long long best_c = 0
    cdef bint found = False
    cdef long long i, cnt = 0
    for i in range(q_ptr[q], q_ptr[q + 1]):
        if labels[i]:
            s = cur_score[i] if side[i] < 0 else lr[side[i]]
            if not found or s > best_s or (s == best_s and cidrank[i] < best_c):
                best_s = s
                best_c = cidrank[i]
                found = True
    if not found:
        return 0.0
    for i in range(q_ptr[q], q_ptr[q + 1]):
        s = cur_score[i] if side[i] < 0 else lr[side[i]]
        if s > best_s or (s == best_s and cidrank[i] < best_c):
            cnt += 1
    return 1.0 / (cnt + 1)


def question_rr(labels, q_ptr, cidrank, scores):
    """Reciprocal rank of the first positive in each question instance."""
    cdef signed char[::1] lab = np.ascontiguousarray(labels, dtype=np.int8)
    cdef long long[::1] qp = np.ascontiguousarray(q_ptr, dtype=np.int64)
    cdef long long[::1] cr = np.ascontiguousarray(cidrank, dtype=np.int64)
    cdef double[::1] sc = np.ascontiguousarray(scores, dtype=np.float64)
    cdef Py_ssize_t nq = qp.shape[0] - 1, n = lab.shape[0], q
    out = np.zeros(nq, dtype=np.float64)
    cdef double[::1] o = out
    side_arr = np.full(max(n, 1), -1, dtype=np.int8)
    cdef signed char[::1] side = side_arr
    cdef double lr[2]
    lr[0] = 0.0
    lr[1] = 0.0
    if n == 0:
        return out
    with nogil:
        for q in range(nq):
            o[q] = rr_one(q, &qp[0], &lab[0], &cr[0], &sc[0], &side[0], lr)
    return out


def scan_split(order, cand_pos, labels, q_ptr, cidrank, cur_score, aff, rr_old):
    """Best prefix split of one leaf's items (already sorted by a feature).

    Returns (best_gain, best_prefix_len); gain is -inf when no candidate.
    """
    cdef long long[::1] od = np.ascontiguousarray(order, dtype=np.int64)
    cdef long long[::1] cp = np.ascontiguousarray(cand_pos, dtype=np.int64)
    cdef signed char[::1] lab = np.ascontiguousarray(labels, dtype=np.int8)
    cdef long long[::1] qp = np.ascontiguousarray(q_ptr, dtype=np.int64)
    cdef long long[::1] cr = np.ascontiguousarray(cidrank, dtype=np.int64)
    cdef double[::1] sc = np.ascontiguousarray(cur_score, dtype=np.float64)
    cdef long long[::1] af = np.ascontiguousarray(aff, dtype=np.int64)
    cdef double[::1] rro = np.ascontiguousarray(rr_old, dtype=np.float64)
    cdef Py_ssize_t n_items = lab.shape[0]
    side_arr = np.full(max(n_items, 1), -1, dtype=np.int8)
    cdef signed char[::1] side = side_arr
    cdef long long pos_r = 0, n_r = od.shape[0], pos_l = 0, n_l = 0, moved = 0, k, i
    cdef Py_ssize_t t, a
    cdef double best_gain = -INFINITY, gain
    cdef long long best_pos = -1
    cdef double lr[2]
    if n_items == 0 or cp.shape[0] == 0:
        return best_gain, best_pos
    with nogil:
        for t in range(od.shape[0]):
            i = od[t]
            side[i] = 1
            pos_r += lab[i]
        for t in range(cp.shape[0]):
            k = cp[t]
            while moved < k:
                i = od[moved]
                side[i] = 0
                pos_l += lab[i]
                pos_r -= lab[i]
                n_l += 1
                n_r -= 1
                moved += 1
            lr[0] = (pos_l + 1.0) / (n_l + 2.0)
            lr[1] = (pos_r + 1.0) / (n_r + 2.0)
            gain = 0.0
            for a in range(af.shape[0]):
                gain += rr_one(af[a], &qp[0], &lab[0], &cr[0], &sc[0], &side[0], lr) - rro[af[a]]
            if gain > best_gain:
                best_gain = gain
                best_pos = k
    return best_gain, best_pos
