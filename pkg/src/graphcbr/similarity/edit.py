"""Graph edit distance and the normalized edit similarity.

Edit operations: node insertion, deletion and relabeling (concept or
attributes differ), edge insertion, deletion and relation relabeling
between identically mapped endpoints. Every edit sequence induces a partial
node map, and for a fixed map the cheapest edge edits follow from comparing
relation multisets per ordered node pair, so the search runs over node maps.
"""

from __future__ import annotations

import time
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..graph import AttributedGraph, canonical_form, canonical_order
from .config import SimilarityConfig

_CHECK_EVERY = 256
_BIG = 1e9


@dataclass(frozen=True)
class EditResult:
    cost: float
    mapping: tuple[tuple[str, str | None], ...]   # g1 node id -> g2 node id or None (deleted)
    exact: bool

    def __float__(self) -> float:
        return self.cost


class _Costs:
    def __init__(self, cfg: SimilarityConfig):
        self.n_ins, self.n_del, self.n_sub = cfg.node_ins_cost, cfg.node_del_cost, cfg.node_sub_cost
        self.e_ins, self.e_del, self.e_sub = cfg.edge_ins_cost, cfg.edge_del_cost, cfg.edge_sub_cost
        self.n_swap = min(self.n_sub, self.n_ins + self.n_del)
        self.e_swap = min(self.e_sub, self.e_ins + self.e_del)


def _multiset_cost(c1: Counter | None, c2: Counter | None, costs: _Costs) -> float:
    """Cheapest edits turning relation multiset c1 into c2."""
    n1 = sum(c1.values()) if c1 else 0
    n2 = sum(c2.values()) if c2 else 0
    if n1 == 0 and n2 == 0:
        return 0.0
    common = sum(min(c, c2[r]) for r, c in c1.items()) if (c1 and c2) else 0
    r1, r2 = n1 - common, n2 - common
    k = min(r1, r2)
    return k * costs.e_swap + (r1 - k) * costs.e_del + (r2 - k) * costs.e_ins


def _bound(c1: Counter, c2: Counter, ins: float, dele: float, swap: float) -> float:
    n1, n2 = sum(c1.values()), sum(c2.values())
    common = sum(min(c, c2[r]) for r, c in c1.items())
    return max(0, n1 - n2) * dele + max(0, n2 - n1) * ins + max(0, min(n1, n2) - common) * swap


class _Problem:
    def __init__(self, g1: AttributedGraph, g2: AttributedGraph, cfg: SimilarityConfig):
        self.g1, self.g2 = g1, g2
        self.costs = _Costs(cfg)
        self.n1, self.n2 = len(g1.nodes), len(g2.nodes)
        self.lab1 = [n.label for n in g1.nodes]
        self.lab2 = [n.label for n in g2.nodes]
        idx1, idx2 = g1.node_index(), g2.node_index()
        self.m1 = defaultdict(Counter)
        self.m2 = defaultdict(Counter)
        self.e1 = [(idx1[e.source], idx1[e.target], e.relation) for e in g1.edges]
        self.e2 = [(idx2[e.source], idx2[e.target], e.relation) for e in g2.edges]
        for a, b, r in self.e1:
            self.m1[a, b][r] += 1
        for a, b, r in self.e2:
            self.m2[a, b][r] += 1
        self.nbr1 = [set() for _ in range(self.n1)]
        for a, b, _ in self.e1:
            self.nbr1[a].add(b)
            self.nbr1[b].add(a)
        deg = Counter()
        for a, b, _ in self.e1:
            deg[a] += 1
            deg[b] += 1
        self.order = sorted(range(self.n1), key=lambda u: (-deg[u], u))

    def node_cost(self, u, v):
        if v < 0:
            return self.costs.n_del
        return 0.0 if self.lab1[u] == self.lab2[v] else self.costs.n_sub

    def step_cost(self, u, v, phi, decided):
        """Cost of deciding u (-> v, or deleted when v < 0) given earlier decisions."""
        c = self.costs
        cost = self.node_cost(u, v)
        m1, m2 = self.m1, self.m2
        for w in self.nbr1[u] | ({u} if (u, u) in m1 else set()):
            if w != u and not decided[w]:
                continue
            if w == u:
                if v < 0:
                    cost += sum(m1[u, u].values()) * c.e_del
                continue
            if v < 0 or phi[w] < 0:
                cost += (sum(m1[u, w].values()) if (u, w) in m1 else 0) * c.e_del
                cost += (sum(m1[w, u].values()) if (w, u) in m1 else 0) * c.e_del
        if v >= 0:
            # mapped-to-mapped pairs, including g2 edges with no g1 counterpart
            for w in range(self.n1):
                if w != u and not decided[w]:
                    continue
                x = v if w == u else phi[w]
                if x < 0:
                    continue
                cost += _multiset_cost(m1.get((u, w)), m2.get((v, x)), c)
                if w != u:
                    cost += _multiset_cost(m1.get((w, u)), m2.get((x, v)), c)
        return cost

    def completion_cost(self, used):
        c = self.costs
        cost = sum(c.n_ins for v in range(self.n2) if not used[v])
        cost += sum(c.e_ins for a, b, _ in self.e2 if not (used[a] and used[b]))
        return cost

    def lower_bound(self, decided, used):
        c = self.costs
        rem1 = Counter(self.lab1[u] for u in range(self.n1) if not decided[u])
        rem2 = Counter(self.lab2[v] for v in range(self.n2) if not used[v])
        lb = _bound(rem1, rem2, c.n_ins, c.n_del, c.n_swap)
        er1 = Counter(r for a, b, r in self.e1 if not (decided[a] and decided[b]))
        er2 = Counter(r for a, b, r in self.e2 if not (used[a] and used[b]))
        return lb + _bound(er1, er2, c.e_ins, c.e_del, c.e_swap)

    def mapping_cost(self, phi):
        """Exact cost of the edit path induced by a complete node map."""
        decided = [False] * self.n1
        used = [False] * self.n2
        total = 0.0
        partial = [-1] * self.n1
        for u in range(self.n1):
            total += self.step_cost(u, phi[u], partial, decided)
            decided[u] = True
            partial[u] = phi[u]
            if phi[u] >= 0:
                used[phi[u]] = True
        return total + self.completion_cost(used)

    def assignment_map(self):
        """Bipartite (assignment-based) node map; its induced cost bounds the distance from above."""
        n1, n2, c = self.n1, self.n2, self.costs
        if n1 + n2 == 0:
            return []
        out1 = [Counter() for _ in range(n1)]
        in1 = [Counter() for _ in range(n1)]
        out2 = [Counter() for _ in range(n2)]
        in2 = [Counter() for _ in range(n2)]
        for a, b, r in self.e1:
            out1[a][r] += 1
            in1[b][r] += 1
        for a, b, r in self.e2:
            out2[a][r] += 1
            in2[b][r] += 1
        size = n1 + n2
        cost = np.full((size, size), _BIG)
        for i in range(n1):
            for j in range(n2):
                local = _multiset_cost(out1[i], out2[j], c) + _multiset_cost(in1[i], in2[j], c)
                cost[i, j] = self.node_cost(i, j) + local / 2.0
            cost[i, n2 + i] = c.n_del + c.e_del * (sum(out1[i].values()) + sum(in1[i].values())) / 2.0
        for j in range(n2):
            cost[n1 + j, j] = c.n_ins + c.e_ins * (sum(out2[j].values()) + sum(in2[j].values())) / 2.0
        cost[n1:, n2:] = 0.0
        cols = kernels.assign_min(cost)
        return [int(cols[i]) if cols[i] < n2 else -1 for i in range(n1)]

    def exact(self, deadline, phi0, ub):
        best = [list(phi0), ub]
        phi = [-1] * self.n1
        decided = [False] * self.n1
        used = [False] * self.n2
        counter = [0]
        timed_out = [False]

        def rec(pos, g):
            counter[0] += 1
            if counter[0] % _CHECK_EVERY == 0 and time.perf_counter() > deadline:
                timed_out[0] = True
            if timed_out[0]:
                return
            if pos == len(self.order):
                total = g + self.completion_cost(used)
                if total < best[1]:
                    best[0], best[1] = list(phi), total
                return
            if g + self.lower_bound(decided, used) >= best[1]:
                return
            u = self.order[pos]
            options = [(self.step_cost(u, v, phi, decided), v) for v in range(self.n2) if not used[v]]
            options.append((self.step_cost(u, -1, phi, decided), -1))
            options.sort()
            for step, v in options:
                phi[u] = v
                decided[u] = True
                if v >= 0:
                    used[v] = True
                rec(pos + 1, g + step)
                if v >= 0:
                    used[v] = False
                decided[u] = False
                phi[u] = -1
                if timed_out[0]:
                    return

        rec(0, 0.0)
        return best[0], best[1], not timed_out[0]


def _edit(g1, g2, cfg):
    prob = _Problem(g1, g2, cfg)
    phi = prob.assignment_map()
    cost = prob.mapping_cost(phi)
    exact = False
    if g1.size <= cfg.exact_size_limit and g2.size <= cfg.exact_size_limit:
        deadline = time.perf_counter() + cfg.time_budget
        phi, cost, exact = prob.exact(deadline, phi, cost)
    mapping = tuple((g1.nodes[u].node_id, g2.nodes[phi[u]].node_id if phi[u] >= 0 else None)
                    for u in range(prob.n1))
    return cost, mapping, exact


def edit_distance(g1: AttributedGraph, g2: AttributedGraph, cfg: SimilarityConfig | None = None) -> EditResult:
    """Minimum total edit cost transforming ``g1`` into ``g2``.

    Exact within ``exact_size_limit``/``time_budget``; otherwise the cost of
    the best edit path found (an upper bound) flagged ``exact=False``.
    """
    cfg = cfg or SimilarityConfig()
    c1, c2 = canonical_form(g1), canonical_form(g2)
    if c1 == c2:
        pairs = zip(canonical_order(g1), canonical_order(g2))
        mapping = {g1.nodes[u].node_id: g2.nodes[v].node_id for u, v in pairs}
        return EditResult(0.0, tuple((n.node_id, mapping[n.node_id]) for n in g1.nodes), True)
    if c1 > c2:
        # Solve the reverse problem with insertion/deletion costs swapped.
        cost, mapping, exact = _edit(g2, g1, cfg.reversed_costs())
        back = {b: a for a, b in mapping if b is not None}
        mapping = tuple((n.node_id, back.get(n.node_id)) for n in g1.nodes)
        return EditResult(cost, mapping, exact)
    cost, mapping, exact = _edit(g1, g2, cfg)
    return EditResult(cost, mapping, exact)


def max_edit_cost(g1: AttributedGraph, g2: AttributedGraph, cfg: SimilarityConfig) -> float:
    """Cost of deleting all of g1 and inserting all of g2."""
    return (cfg.node_del_cost * len(g1.nodes) + cfg.edge_del_cost * len(g1.edges)
            + cfg.node_ins_cost * len(g2.nodes) + cfg.edge_ins_cost * len(g2.edges))


def sim_edit(g1: AttributedGraph, g2: AttributedGraph, cfg: SimilarityConfig | None = None) -> float:
    cfg = cfg or SimilarityConfig()
    if g1.size == 0 and g2.size == 0:
        return 1.0
    d_max = max_edit_cost(g1, g2, cfg)
    delta = edit_distance(g1, g2, cfg).cost
    return 1.0 - min(1.0, delta / d_max)
