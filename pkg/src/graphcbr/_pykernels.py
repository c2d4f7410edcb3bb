"""Pure-Python kernels; reference semantics for the compiled ``_ckernels``.

Every routine here mirrors its Cython twin statement for statement so both
backends produce bit-identical floating-point results.
"""

import numpy as np

BACKEND = "python"

_INF = float("inf")


def hungarian_min(cost, n, m):
    """Minimum-cost assignment of ``n`` rows to ``m >= n`` columns.

    ``cost`` is indexable as ``cost[i][j]``. Returns the column chosen for
    each row.
    """
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [_INF] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = _INF
            j1 = 0
            row = cost[i0 - 1]
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
    out = [0] * n
    for j in range(1, m + 1):
        if p[j] != 0:
            out[p[j] - 1] = j - 1
    return out


def assign_min(cost):
    """Hungarian minimization on a 2-D array with rows <= cols."""
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    return np.asarray(hungarian_min(cost.tolist(), n, m), dtype=np.int64)


class _View:
    """One graph sliced out of a batch as plain Python lists."""

    __slots__ = ("n", "concepts", "attrs", "esrc", "edst", "erel", "key")

    def __init__(self, lists, g):
        node_off, concepts, attr_off, attr_ids, edge_off, esrc, edst, erel, keys = lists
        a, b = node_off[g], node_off[g + 1]
        self.n = b - a
        self.concepts = concepts[a:b]
        self.attrs = [attr_ids[attr_off[k]:attr_off[k + 1]] for k in range(a, b)]
        c, d = edge_off[g], edge_off[g + 1]
        self.esrc = esrc[c:d]
        self.edst = edst[c:d]
        self.erel = erel[c:d]
        self.key = keys[g]


def _batch_lists(batch):
    cached = getattr(batch, "_py_lists", None)
    if cached is None:
        cached = tuple(a.tolist() for a in (batch.node_off, batch.concepts, batch.attr_off, batch.attr_ids,
                                            batch.edge_off, batch.esrc, batch.edst, batch.erel, batch.keys))
        batch._py_lists = cached
    return cached


def _identical(x, y):
    return (x.concepts == y.concepts and x.attrs == y.attrs and x.esrc == y.esrc
            and x.edst == y.edst and x.erel == y.erel)


def _node_sim(ca, aa, cb, ab, w_c, w_a):
    eq = ca == cb
    la = len(aa)
    lb = len(ab)
    inter = 0
    i = 0
    j = 0
    while i < la and j < lb:
        if aa[i] == ab[j]:
            inter += 1
            i += 1
            j += 1
        elif aa[i] < ab[j]:
            i += 1
        else:
            j += 1
    if la == 0 and lb == 0:
        ls = 1.0
    else:
        ls = inter / (la if la > lb else lb)
    if eq and ls == 1.0:
        return 1.0
    if not eq and ls == 0.0:
        return 0.0
    return w_c * (1.0 if eq else 0.0) + w_a * ls


def _partition(x, y, params):
    """Core integrated-similarity computation for an ordered pair.

    Returns (value, total_sim, mx, gem_node_x, gem_edge_x, gem_node_y, gem_edge_y)
    where ``mx[i]`` is the Y node assigned to X node ``i`` (or -1).
    """
    w_c, w_a, s_node, s_edge, om_n, om_e = params
    nx, ny = x.n, y.n
    ex, ey = len(x.esrc), len(y.esrc)
    mx = [-1] * nx
    gnx = [0] * nx
    gny = [0] * ny
    gex = [0] * ex
    gey = [0] * ey
    if nx == 0 and ny == 0:
        return 1.0, 0.0, mx, gnx, gex, gny, gey
    if nx == 0 or ny == 0:
        return 0.0, 0.0, mx, gnx, gex, gny, gey
    sim = [[_node_sim(x.concepts[i], x.attrs[i], y.concepts[j], y.attrs[j], w_c, w_a)
            for j in range(ny)] for i in range(nx)]
    if nx <= ny:
        cost = [[-sim[i][j] for j in range(ny)] for i in range(nx)]
        a = hungarian_min(cost, nx, ny)
        for i in range(nx):
            mx[i] = a[i]
    else:
        cost = [[-sim[i][j] for i in range(nx)] for j in range(ny)]
        a = hungarian_min(cost, ny, nx)
        for j in range(ny):
            mx[a[j]] = j
    total = 0.0
    gx = [-1] * nx
    for i in range(nx):
        j = mx[i]
        if j >= 0:
            total += sim[i][j]
            if sim[i][j] >= s_node:
                gx[i] = j
                gnx[i] = 1
                gny[j] = 1
    n_gex = 0
    for e in range(ex):
        s = gx[x.esrc[e]]
        d = gx[x.edst[e]]
        if s < 0 or d < 0:
            continue
        r = x.erel[e]
        for k in range(ey):
            if not gey[k] and y.esrc[k] == s and y.edst[k] == d and y.erel[k] == r:
                gey[k] = 1
                gex[e] = 1
                n_gex += 1
                break
    if s_edge <= 0.0:
        for e in range(ex):
            if gex[e]:
                continue
            s = gx[x.esrc[e]]
            d = gx[x.edst[e]]
            if s < 0 or d < 0:
                continue
            for k in range(ey):
                if not gey[k] and y.esrc[k] == s and y.edst[k] == d:
                    gey[k] = 1
                    gex[e] = 1
                    n_gex += 1
                    break
    n_gnx = sum(gnx)
    gem_x = om_n * n_gnx + om_e * n_gex
    diff_x = om_n * (nx - n_gnx) + om_e * (ex - n_gex)
    gem_y = om_n * n_gnx + om_e * n_gex
    diff_y = om_n * (ny - n_gnx) + om_e * (ey - n_gex)
    value = (gem_x / (gem_x + diff_x) + gem_y / (gem_y + diff_y)) / 2.0
    return value, total, mx, gnx, gex, gny, gey


def _pair(x, y, params):
    if x.key == y.key and _identical(x, y):
        nx, ex = x.n, len(x.esrc)
        if nx == 0:
            return 1.0, 0.0, [], [], [], [], []
        return 1.0, float(nx), list(range(nx)), [1] * nx, [1] * ex, [1] * nx, [1] * ex
    if x.key > y.key:
        value, total, my, gny, gey, gnx, gex = _partition(y, x, params)
        mx = [-1] * x.n
        for j, i in enumerate(my):
            if i >= 0:
                mx[i] = j
        return value, total, mx, gnx, gex, gny, gey
    return _partition(x, y, params)


def pair_values(batch_a, batch_b, ia, ib, params, out):
    """Integrated similarity for each pair ``(ia[k], ib[k])``, written to ``out``."""
    la = _batch_lists(batch_a)
    lb = _batch_lists(batch_b)
    params = tuple(float(p) for p in params)
    views_a = {}
    views_b = {}
    for k in range(len(ia)):
        a = int(ia[k])
        b = int(ib[k])
        x = views_a.get(a)
        if x is None:
            x = views_a[a] = _View(la, a)
        y = views_b.get(b)
        if y is None:
            y = views_b[b] = _View(lb, b)
        out[k] = _pair(x, y, params)[0]
    return out


def pair_detail(batch_a, a, batch_b, b, params):
    x = _View(_batch_lists(batch_a), a)
    y = _View(_batch_lists(batch_b), b)
    value, total, mx, gnx, gex, gny, gey = _pair(x, y, tuple(float(p) for p in params))
    as_arr = lambda v: np.asarray(v, dtype=np.int64)
    return value, total, as_arr(mx), as_arr(gnx), as_arr(gex), as_arr(gny), as_arr(gey)


# --- ranking kernels ------------------------------------------------------

def _question_rr(q, q_ptr, labels, cidrank, score_of):
    best_s = -1.0
    best_c = 0
    found = False
    for i in range(q_ptr[q], q_ptr[q + 1]):
        if labels[i]:
            s = score_of(i)
            if not found or s > best_s or (s == best_s and cidrank[i] < best_c):
                best_s = s
                best_c = cidrank[i]
                found = True
    if not found:
        return 0.0
    cnt = 0
    for i in range(q_ptr[q], q_ptr[q + 1]):
        s = score_of(i)
        if s > best_s or (s == best_s and cidrank[i] < best_c):
            cnt += 1
    return 1.0 / (cnt + 1)


def question_rr(labels, q_ptr, cidrank, scores):
    """Reciprocal rank of the first positive in each question instance."""
    labels = np.asarray(labels).tolist()
    q_ptr = np.asarray(q_ptr).tolist()
    cidrank = np.asarray(cidrank).tolist()
    scores = np.asarray(scores).tolist()
    nq = len(q_ptr) - 1
    out = np.zeros(nq, dtype=np.float64)
    for q in range(nq):
        out[q] = _question_rr(q, q_ptr, labels, cidrank, scores.__getitem__)
    return out


def scan_split(order, cand_pos, labels, q_ptr, cidrank, cur_score, aff, rr_old):
    """Best prefix split of one leaf's items (already sorted by a feature).

    For each candidate prefix length in ``cand_pos`` the prefix goes left and
    the rest right, each scored by its Laplace estimate; the summed change in
    reciprocal rank over the affected question instances is the gain.
    Returns (best_gain, best_prefix_len); gain is -inf when no candidate.
    """
    order = np.asarray(order).tolist()
    cand_pos = np.asarray(cand_pos).tolist()
    labels = np.asarray(labels).tolist()
    q_ptr = np.asarray(q_ptr).tolist()
    cidrank = np.asarray(cidrank).tolist()
    cur_score = np.asarray(cur_score).tolist()
    aff = np.asarray(aff).tolist()
    rr_old = np.asarray(rr_old).tolist()
    n_items = len(labels)
    side = [-1] * n_items
    pos_r = 0
    for i in order:
        side[i] = 1
        pos_r += labels[i]
    n_r = len(order)
    pos_l = 0
    n_l = 0
    moved = 0
    best_gain = -_INF
    best_pos = -1
    lr = [0.0, 0.0]

    def score_of(i):
        s = side[i]
        if s < 0:
            return cur_score[i]
        return lr[s]

    for k in cand_pos:
        while moved < k:
            i = order[moved]
            side[i] = 0
            pos_l += labels[i]
            pos_r -= labels[i]
            n_l += 1
            n_r -= 1
            moved += 1
        lr[0] = (pos_l + 1.0) / (n_l + 2.0)
        lr[1] = (pos_r + 1.0) / (n_r + 2.0)
        gain = 0.0
        for q in aff:
            gain += _question_rr(q, q_ptr, labels, cidrank, score_of) - rr_old[q]
        if gain > best_gain:
            best_gain = gain
            best_pos = k
    return best_gain, best_pos
