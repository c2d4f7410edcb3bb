"""Largest common subgraph and the size-ratio similarity built on it.

A common subgraph maps nodes of equal label (concept and attributes)
injectively and keeps, for every ordered pair of mapped nodes, as many
edges of each relation as both graphs carry. Adding a label-compatible node
pair never shrinks such a subgraph, so an optimum maps exactly
``min(count1, count2)`` nodes of every label; the search only has to decide
which ones, maximizing matched edges.
"""

from __future__ import annotations

import time
from collections import Counter, defaultdict
from dataclasses import dataclass

from ..graph import AttributedGraph, canonical_form
from .config import SimilarityConfig

_CHECK_EVERY = 256


@dataclass(frozen=True)
class CommonSubgraph:
    graph: AttributedGraph
    mapping: tuple[tuple[str, str], ...]
    exact: bool

    @property
    def size(self) -> int:
        return self.graph.size


class _Problem:
    def __init__(self, g1: AttributedGraph, g2: AttributedGraph):
        self.g1, self.g2 = g1, g2
        self.n1, self.n2 = len(g1.nodes), len(g2.nodes)
        lab1 = [n.label for n in g1.nodes]
        lab2 = [n.label for n in g2.nodes]
        by_label2 = defaultdict(list)
        for v, lab in enumerate(lab2):
            by_label2[lab].append(v)
        count1 = Counter(lab1)
        self.cands = [by_label2.get(lab, []) for lab in lab1]
        self.label_of = lab1
        # spare skips per label: surplus of g1 nodes over g2 nodes
        self.skip_budget = {lab: max(0, c - len(by_label2.get(lab, []))) for lab, c in count1.items()}
        idx1, idx2 = g1.node_index(), g2.node_index()
        self.m1 = defaultdict(Counter)
        self.m2 = defaultdict(Counter)
        self.adj1 = [set() for _ in range(self.n1)]
        self.adj2 = [set() for _ in range(self.n2)]
        self.e1 = []
        self.e2 = []
        for e in g1.edges:
            a, b = idx1[e.source], idx1[e.target]
            self.m1[a, b][e.relation] += 1
            self.adj1[a].add(b)
            self.adj1[b].add(a)
            self.e1.append((a, b, e.relation))
        for e in g2.edges:
            a, b = idx2[e.source], idx2[e.target]
            self.m2[a, b][e.relation] += 1
            self.adj2[a].add(b)
            self.adj2[b].add(a)
            self.e2.append((a, b, e.relation))
        deg = Counter()
        for a, b, _ in self.e1:
            deg[a] += 1
            deg[b] += 1
        mappable = [u for u in range(self.n1) if self.cands[u]]
        self.order = sorted(mappable, key=lambda u: (-deg[u], len(self.cands[u]), u))

    def pair_gain(self, u, v, phi):
        """Edges gained by mapping u -> v given the partial map ``phi``."""
        gain = 0
        for w in self.adj1[u]:
            if w == u:
                continue
            x = phi[w]
            if x < 0:
                continue
            c1 = self.m1.get((u, w))
            c2 = self.m2.get((v, x))
            if c1 and c2:
                gain += sum(min(c, c2[r]) for r, c in c1.items())
            c1 = self.m1.get((w, u))
            c2 = self.m2.get((x, v))
            if c1 and c2:
                gain += sum(min(c, c2[r]) for r, c in c1.items())
        c1 = self.m1.get((u, u))
        c2 = self.m2.get((v, v))
        if c1 and c2:
            gain += sum(min(c, c2[r]) for r, c in c1.items())
        return gain

    def edge_bound(self, decided1, used2):
        rem1 = Counter(r for a, b, r in self.e1 if not (decided1[a] and decided1[b]))
        rem2 = Counter(r for a, b, r in self.e2 if not (used2[a] and used2[b]))
        return sum(min(c, rem2[r]) for r, c in rem1.items())

    def greedy(self):
        phi = [-1] * self.n1
        used = [False] * self.n2
        edges = 0
        for u in self.order:
            best, best_gain = -1, -1
            for v in self.cands[u]:
                if used[v]:
                    continue
                gain = self.pair_gain(u, v, phi)
                if gain > best_gain:
                    best, best_gain = v, gain
            if best >= 0:
                phi[u] = best
                used[best] = True
                edges += best_gain
        return phi, edges

    def exact(self, deadline, initial_phi, initial_edges):
        best = [list(initial_phi), initial_edges]
        phi = [-1] * self.n1
        decided = [False] * self.n1
        used = [False] * self.n2
        skips = Counter()
        counter = [0]
        timed_out = [False]
        for u in range(self.n1):
            if not self.cands[u]:
                decided[u] = True  # never mappable

        def rec(pos, edges):
            counter[0] += 1
            if counter[0] % _CHECK_EVERY == 0 and time.perf_counter() > deadline:
                timed_out[0] = True
            if timed_out[0]:
                return
            if pos == len(self.order):
                if edges > best[1]:
                    best[0], best[1] = list(phi), edges
                return
            if edges + self.edge_bound(decided, used) <= best[1]:
                return
            u = self.order[pos]
            options = [(self.pair_gain(u, v, phi), v) for v in self.cands[u] if not used[v]]
            options.sort(key=lambda t: (-t[0], t[1]))
            decided[u] = True
            for gain, v in options:
                phi[u] = v
                used[v] = True
                rec(pos + 1, edges + gain)
                used[v] = False
                phi[u] = -1
                if timed_out[0]:
                    break
            lab = self.label_of[u]
            if not timed_out[0] and (skips[lab] < self.skip_budget[lab] or not options):
                skips[lab] += 1
                rec(pos + 1, edges)
                skips[lab] -= 1
            decided[u] = False

        rec(0, 0)
        return best[0], best[1], not timed_out[0]

    def build(self, phi, exact):
        g1, g2 = self.g1, self.g2
        nodes = [g1.nodes[u] for u in range(self.n1) if phi[u] >= 0]
        budget = Counter()
        for u in range(self.n1):
            for w in range(self.n1):
                if phi[u] < 0 or phi[w] < 0:
                    continue
                c1 = self.m1.get((u, w))
                c2 = self.m2.get((phi[u], phi[w]))
                if c1 and c2:
                    for r, c in c1.items():
                        budget[u, w, r] = min(c, c2[r])
        idx1 = g1.node_index()
        edges = []
        for e in g1.edges:
            k = (idx1[e.source], idx1[e.target], e.relation)
            if budget[k] > 0:
                budget[k] -= 1
                edges.append(e)
        mapping = tuple((g1.nodes[u].node_id, g2.nodes[phi[u]].node_id) for u in range(self.n1) if phi[u] >= 0)
        return CommonSubgraph(AttributedGraph(tuple(nodes), tuple(edges)), mapping, exact)


def lcs(g1: AttributedGraph, g2: AttributedGraph, cfg: SimilarityConfig | None = None) -> CommonSubgraph:
    """Largest common subgraph of ``g1`` and ``g2`` (as a subgraph of ``g1``).

    Exact branch and bound when both graphs fit ``exact_size_limit`` and the
    search finishes within ``time_budget``; otherwise the best subgraph found
    (at least the greedy one) is returned with ``exact=False``.
    """
    cfg = cfg or SimilarityConfig()
    prob = _Problem(g1, g2)
    phi, edges = prob.greedy()
    if g1.size <= cfg.exact_size_limit and g2.size <= cfg.exact_size_limit:
        deadline = time.perf_counter() + cfg.time_budget
        phi, edges, exact = prob.exact(deadline, phi, edges)
    else:
        exact = False
    return prob.build(phi, exact)


def lcs_size(g1: AttributedGraph, g2: AttributedGraph, cfg: SimilarityConfig | None = None) -> int:
    # Canonical argument order keeps approximate results symmetric.
    c1, c2 = canonical_form(g1), canonical_form(g2)
    if c1 == c2:
        return g1.size
    if c1 > c2:
        g1, g2 = g2, g1
    return lcs(g1, g2, cfg).size


def _mapping(t: float) -> float:
    # Monotonic decreasing map [0, 1] -> [0, 1] with f(0) = 1.
    return 1.0 - t


def sim_lcs(g1: AttributedGraph, g2: AttributedGraph, cfg: SimilarityConfig | None = None) -> float:
    n1, n2 = g1.size, g2.size
    if n1 == 0 and n2 == 0:
        return 1.0
    if n1 == 0 or n2 == 0:
        return 0.0
    return _mapping(1.0 - lcs_size(g1, g2, cfg) / max(n1, n2))
