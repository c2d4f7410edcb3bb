import json

import numpy as np
import pytest
from hypothesis import given, settings

from graphcbr.errors import GraphIntegrityError, GraphParseError
from graphcbr.graph import (AttributedGraph, ConceptNode, RelationEdge, canonical_form, graph_size, parse_graph,
                            serialize_graph, validate)
from helpers import build, graphs, permuted

TWO_NODES = {
    "nodes": [{"id": "n1", "concept": "city", "attrs": {"GENER": "sp"}}, {"id": "n2", "concept": "capital"}],
    "edges": [{"src": "n1", "dst": "n2", "rel": "SUB"}],
}


def test_parse_two_nodes_one_edge():
    g = parse_graph(json.dumps(TWO_NODES))
    assert graph_size(g) == 3
    assert g.nodes[0].attr_dict == {"GENER": "sp"}
    assert g.nodes[1].attrs == ()


def test_parse_empty_record():
    g = parse_graph('{"nodes": [], "edges": []}')
    assert g.size == 0
    assert parse_graph({}) == AttributedGraph()


def test_dangling_edge_is_integrity_error():
    rec = {"nodes": [{"id": "a", "concept": "x"}], "edges": [{"src": "a", "dst": "zz", "rel": "R"}]}
    with pytest.raises(GraphIntegrityError) as info:
        parse_graph(rec, line=7)
    assert info.value.line == 7
    assert info.value.locus == "edges[0] (a-R->zz)"
    assert "zz" in str(info.value)


@pytest.mark.parametrize("record, locus", [
    ({"nodes": [{"id": "a"}]}, "nodes[0]"),
    ({"nodes": [{"id": "a", "concept": 3}]}, "nodes[0].concept"),
    ({"nodes": [{"id": "a", "concept": "x", "attrs": {"k": 1}}]}, "nodes[0].attrs.k"),
    ({"nodes": [{"id": "a", "concept": "x", "attrs": []}]}, "nodes[0].attrs"),
    ({"nodes": [{"id": "a", "concept": "x"}], "edges": [{"src": "a", "dst": "a"}]}, "edges[0]"),
    ({"nodes": {}}, "nodes"),
    ({"edges": "x"}, "edges"),
])
def test_parse_error_locus(record, locus):
    with pytest.raises(GraphParseError) as info:
        parse_graph(record, line=3)
    assert info.value.locus == locus
    assert str(info.value).startswith("[line 3, ")


def test_invalid_json_reports_line():
    with pytest.raises(GraphParseError) as info:
        parse_graph("{not json", line=12)
    assert info.value.line == 12
    with pytest.raises(GraphParseError):
        parse_graph("[1, 2]")


def test_graph_size():
    assert graph_size(AttributedGraph()) == 0
    assert graph_size(build(["a", "b", "c"], [("a", "b", "R"), ("b", "c", "R")])) == 5
    assert graph_size(build(["a"])) == 1


def test_validate():
    assert validate(build(["a", "b"], [("a", "b", "R")])) == []
    dup = AttributedGraph((ConceptNode("a", "x"), ConceptNode("a", "y")))
    problems = validate(dup)
    assert len(problems) == 1 and "duplicate node_id 'a'" in problems[0]
    dangling = AttributedGraph((ConceptNode("a", "x"),), (RelationEdge("a", "b", "R"),))
    problems = validate(dangling)
    assert len(problems) == 1 and "unknown node 'b'" in problems[0]


def test_validate_attribute_key_and_empty_relation():
    bad = AttributedGraph((ConceptNode("a", "x", (("k", "1"), ("k", "2"))),), (RelationEdge("a", "a", ""),))
    problems = validate(bad)
    assert len(problems) == 2
    assert problems[0].startswith("nodes[0]") and problems[1].startswith("edges[0]")


@settings(max_examples=200, deadline=None)
@given(graphs())
def test_round_trip(g):
    assert parse_graph(json.dumps(serialize_graph(g))) == g
    assert serialize_graph(parse_graph(serialize_graph(g))) == serialize_graph(g)


@settings(max_examples=200, deadline=None)
@given(graphs(max_nodes=6, max_edges=8))
def test_canonical_form_invariant_under_order_and_ids(g):
    rng = np.random.default_rng(len(g.nodes) * 31 + len(g.edges))
    for _ in range(3):
        assert canonical_form(permuted(g, rng)) == canonical_form(g)
        assert canonical_form(permuted(g, rng, rename=False)) == canonical_form(g)


def test_canonical_form_examples():
    g = build([("a", "x", {"k": "1"}), ("b", "y")], [("a", "b", "R")])
    reordered = build([("b", "y"), ("a", "x", {"k": "1"})], [("a", "b", "R")])
    renamed = build([("p", "x", {"k": "1"}), ("q", "y")], [("p", "q", "R")])
    changed = build([("a", "x", {"k": "2"}), ("b", "y")], [("a", "b", "R")])
    assert canonical_form(g) == canonical_form(reordered) == canonical_form(renamed)
    assert canonical_form(g) != canonical_form(changed)


def test_canonical_form_structure_sensitivity():
    cycle = build(["x1", "x2", "x3"], [("x1", "x2", "R"), ("x2", "x3", "R"), ("x3", "x1", "R")])
    path = build(["x1", "x2", "x3"], [("x1", "x2", "R"), ("x2", "x3", "R"), ("x1", "x3", "R")])
    flipped = build(["a", "b"], [("b", "a", "R")])
    fwd = build([("a", "a"), ("b", "b")], [("a", "b", "R")])
    assert canonical_form(cycle) != canonical_form(path)
    assert canonical_form(flipped) != canonical_form(fwd)
    parallel = build(["a", "b"], [("a", "b", "R"), ("a", "b", "R")])
    single = build(["a", "b"], [("a", "b", "R")])
    assert canonical_form(parallel) != canonical_form(single)
