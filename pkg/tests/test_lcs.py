import pytest
from hypothesis import given, settings

from graphcbr.graph import AttributedGraph, validate
from graphcbr.similarity import SimilarityConfig, lcs, lcs_size, sim_lcs
from helpers import build, edge_cases, graphs, random_pairs
from oracles import lcs_size_oracle

GREEDY = SimilarityConfig(exact_size_limit=0)


def _is_common_subgraph(sub, g1, g2, mapping):
    """``sub`` sits inside g1 and maps label- and edge-preservingly into g2."""
    if validate(sub):
        return False
    by1 = {n.node_id: n for n in g1.nodes}
    by2 = {n.node_id: n for n in g2.nodes}
    phi = dict(mapping)
    if set(phi) != {n.node_id for n in sub.nodes}:
        return False
    if len(set(phi.values())) != len(phi):
        return False
    if any(by1[a].label != by2[b].label for a, b in phi.items()):
        return False
    pool2 = [(e.source, e.target, e.relation) for e in g2.edges]
    pool1 = [(e.source, e.target, e.relation) for e in g1.edges]
    for e in sub.edges:
        key1 = (e.source, e.target, e.relation)
        key2 = (phi[e.source], phi[e.target], e.relation)
        if key1 not in pool1 or key2 not in pool2:
            return False
        pool1.remove(key1)
        pool2.remove(key2)
    return True


def test_self_lcs_preserves_size():
    g = build([("a", "x", {"k": "1"}), ("b", "y"), ("c", "y")], [("a", "b", "R"), ("a", "c", "R"), ("c", "b", "S")])
    res = lcs(g, g)
    assert res.size == g.size and res.exact
    assert sim_lcs(g, g) == 1.0


def test_disjoint_vocabularies():
    g1 = build([("a", "x"), ("b", "y")], [("a", "b", "R")])
    g2 = build([("a", "p"), ("b", "q")], [("a", "b", "R")])
    assert lcs(g1, g2).graph == AttributedGraph()
    assert sim_lcs(g1, g2) == 0.0


def test_shared_three_node_path():
    g1 = build([("a", "p"), ("b", "q"), ("c", "r"), ("d", "s")], [("a", "b", "R"), ("b", "c", "S"), ("c", "d", "R")])
    g2 = build([("w", "p"), ("x", "q"), ("y", "r"), ("z", "t")],
               [("w", "x", "R"), ("x", "y", "S"), ("y", "z", "R"), ("z", "w", "S")])
    res = lcs(g1, g2)
    assert res.size == 5 and res.exact
    assert dict(res.mapping) == {"a": "w", "b": "x", "c": "y"}


def test_sim_lcs_ratio():
    g1 = build([("a", "p"), ("b", "q"), ("c", "r")], [("a", "b", "R"), ("b", "c", "R")])
    g2 = build([("a", "p"), ("b", "q"), ("c", "s")], [("a", "b", "R")])
    assert lcs_size(g1, g2) == 3
    assert sim_lcs(g1, g2) == pytest.approx(0.6, abs=1e-15)


def test_attributes_must_agree():
    g1 = build([("a", "x", {"k": "1"})])
    g2 = build([("a", "x", {"k": "2"})])
    assert lcs_size(g1, g2) == 0


def test_exact_matches_oracle_and_is_valid():
    for g1, g2 in edge_cases() + random_pairs(21, 120):
        res = lcs(g1, g2)
        assert res.exact
        assert res.size == lcs_size_oracle(g1, g2)
        assert _is_common_subgraph(res.graph, g1, g2, res.mapping)
        assert res.size <= min(g1.size, g2.size)


def test_greedy_is_a_lower_bound():
    for g1, g2 in edge_cases() + random_pairs(22, 150):
        approx = lcs(g1, g2, GREEDY)
        assert not approx.exact or g1.size == 0
        assert _is_common_subgraph(approx.graph, g1, g2, approx.mapping)
        assert approx.size <= lcs_size_oracle(g1, g2)
        assert lcs_size(g1, g2, GREEDY) <= lcs_size(g1, g2)


def test_large_pair_falls_back_to_flagged_result():
    nodes = [(f"n{i}", f"c{i % 3}") for i in range(10)]
    edges = [(f"n{i}", f"n{(i + 1) % 10}", "R") for i in range(10)]
    g = build(nodes, edges)
    res = lcs(g, build(nodes[:9], edges[:8]))
    assert not res.exact
    assert res.size >= 9


@settings(max_examples=150, deadline=None)
@given(graphs(), graphs())
def test_sim_lcs_symmetric_and_bounded(g1, g2):
    s = sim_lcs(g1, g2)
    assert 0.0 <= s <= 1.0
    assert s == sim_lcs(g2, g1)
    assert lcs_size(g1, g2) <= g1.size + g2.size
