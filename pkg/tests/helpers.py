"""Graph builders and generators shared by the tests."""

import numpy as np
from hypothesis import strategies as st

from graphcbr.graph import AttributedGraph, ConceptNode, RelationEdge
from graphcbr.synthetic import random_graph


def build(nodes=(), edges=()):
    """Graph from ``[(id, concept, attrs?)]`` and ``[(src, dst, rel)]`` shorthand."""
    made = []
    for n in nodes:
        if isinstance(n, str):
            n = (n, n.rstrip("0123456789") or n)
        node_id, concept, *rest = n
        made.append(ConceptNode.make(node_id, concept, rest[0] if rest else {}))
    return AttributedGraph(tuple(made), tuple(RelationEdge(*e) for e in edges))


def edge_cases():
    """Hand-built pairs covering degenerate and symmetric shapes."""
    empty = build()
    one = build([("a", "x")])
    loop = build([("a", "x")], [("a", "a", "R")])
    double = build([("a", "x"), ("b", "y")], [("a", "b", "R"), ("a", "b", "R")])
    mixed = build([("a", "x"), ("b", "y")], [("a", "b", "R"), ("a", "b", "S")])
    back = build([("a", "x"), ("b", "y")], [("b", "a", "R")])
    fwd = build([("a", "x"), ("b", "y")], [("a", "b", "R")])
    twins = build([("a", "x"), ("b", "x"), ("c", "x")], [("a", "b", "R"), ("b", "c", "R")])
    tri = build([("a", "x"), ("b", "x"), ("c", "x")], [("a", "b", "R"), ("b", "c", "R"), ("c", "a", "R")])
    attrs1 = build([("a", "x", {"k": "1"}), ("b", "y", {"k": "1", "m": "2"})], [("a", "b", "R")])
    attrs2 = build([("a", "x", {"k": "2"}), ("b", "y", {"m": "2"})], [("a", "b", "R")])
    isolated = build([("a", "x"), ("b", "x"), ("c", "y"), ("d", "y")])
    star = build([("h", "x"), ("a", "y"), ("b", "y"), ("c", "y")],
                 [("h", "a", "R"), ("h", "b", "R"), ("h", "c", "S")])
    shapes = [empty, one, loop, double, mixed, back, fwd, twins, tri, attrs1, attrs2, isolated, star]
    pairs = [(a, b) for a in shapes for b in shapes]
    return pairs


def random_pairs(seed, count, max_size=8, max_nodes=5, concepts=3, relations=2):
    """Random pairs with |N| + |E| <= max_size on a colliding vocabulary."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        gs = []
        for _ in range(2):
            n = int(rng.integers(0, max_nodes + 1))
            e = int(rng.integers(0, max(0, max_size - n) + 1)) if n else 0
            gs.append(random_graph(rng, n, e, concepts=concepts, relations=relations))
        out.append(tuple(gs))
    return out


@st.composite
def graphs(draw, max_nodes=5, max_edges=6, concepts=3, relations=2, attr_keys=2):
    n = draw(st.integers(0, max_nodes))
    nodes = []
    for i in range(n):
        concept = f"c{draw(st.integers(0, concepts - 1))}"
        attrs = {f"k{k}": draw(st.sampled_from(["u", "v"])) for k in range(attr_keys) if draw(st.booleans())}
        nodes.append(ConceptNode.make(f"n{i}", concept, attrs))
    edges = []
    if n:
        for _ in range(draw(st.integers(0, max_edges))):
            a = draw(st.integers(0, n - 1))
            b = draw(st.integers(0, n - 1))
            edges.append(RelationEdge(f"n{a}", f"n{b}", f"r{draw(st.integers(0, relations - 1))}"))
    return AttributedGraph(tuple(nodes), tuple(edges))


def permuted(g: AttributedGraph, rng: np.random.Generator, rename=True) -> AttributedGraph:
    """Same graph with shuffled node/edge order and (optionally) fresh node ids."""
    order = rng.permutation(len(g.nodes))
    ids = {n.node_id: (f"z{k}" if rename else n.node_id) for k, n in enumerate(g.nodes[i] for i in order)}
    nodes = tuple(ConceptNode(ids[g.nodes[i].node_id], g.nodes[i].concept, g.nodes[i].attrs) for i in order)
    eorder = rng.permutation(len(g.edges))
    edges = tuple(RelationEdge(ids[g.edges[i].source], ids[g.edges[i].target], g.edges[i].relation) for i in eorder)
    return AttributedGraph(nodes, edges)
