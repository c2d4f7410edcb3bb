"""Attributed directed multigraphs used to represent questions and answers.

Nodes carry a concept label plus a set of layer attributes (key/value
string pairs, one value per key). Edges are labeled by a relation name and
may be parallel. Graphs are immutable after construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .errors import GraphIntegrityError, GraphParseError

__all__ = [
    "ConceptNode",
    "RelationEdge",
    "AttributedGraph",
    "parse_graph",
    "serialize_graph",
    "graph_size",
    "canonical_form",
    "canonical_order",
    "validate",
]

# Upper bound on individualization leaves explored by canonical_form before
# falling back to first-representative branching.
_MAX_CANON_LEAVES = 512


@dataclass(frozen=True)
class ConceptNode:
    node_id: str
    concept: str
    attrs: tuple[tuple[str, str], ...] = ()

    @classmethod
    def make(cls, node_id: str, concept: str, attrs: Mapping[str, str] | None = None) -> "ConceptNode":
        return cls(node_id, concept, tuple(sorted((attrs or {}).items())))

    @property
    def attr_dict(self) -> dict[str, str]:
        return dict(self.attrs)

    @property
    def label(self) -> tuple[str, tuple[tuple[str, str], ...]]:
        """Concept plus attributes; two nodes with equal labels are interchangeable."""
        return (self.concept, self.attrs)


@dataclass(frozen=True)
class RelationEdge:
    source: str
    target: str
    relation: str


@dataclass(frozen=True)
class AttributedGraph:
    nodes: tuple[ConceptNode, ...] = ()
    edges: tuple[RelationEdge, ...] = ()
    _memo: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @classmethod
    def build(cls, nodes: Iterable[ConceptNode] = (), edges: Iterable[RelationEdge] = ()) -> "AttributedGraph":
        return cls(tuple(nodes), tuple(edges))

    @property
    def size(self) -> int:
        return len(self.nodes) + len(self.edges)

    def __len__(self) -> int:
        return self.size

    def node_index(self) -> dict[str, int]:
        idx = self._memo.get("node_index")
        if idx is None:
            idx = {}
            for i, n in enumerate(self.nodes):
                idx.setdefault(n.node_id, i)
            self._memo["node_index"] = idx
        return idx

    def to_record(self) -> dict[str, Any]:
        return serialize_graph(self)

    @property
    def canonical(self) -> str:
        return canonical_form(self)


def graph_size(g: AttributedGraph) -> int:
    """Number of nodes plus number of edges."""
    return len(g.nodes) + len(g.edges)


def validate(g: AttributedGraph) -> list[str]:
    """Return a list of invariant violations; empty when ``g`` is well formed."""
    problems = []
    seen = set()
    for i, n in enumerate(g.nodes):
        if not isinstance(n.node_id, str) or not n.node_id:
            problems.append(f"nodes[{i}]: empty node_id")
        elif n.node_id in seen:
            problems.append(f"nodes[{i}]: duplicate node_id {n.node_id!r}")
        seen.add(n.node_id)
        keys = [k for k, _ in n.attrs]
        if len(keys) != len(set(keys)):
            problems.append(f"nodes[{i}] ({n.node_id!r}): attribute key with more than one value")
    for i, e in enumerate(g.edges):
        if not e.relation:
            problems.append(f"edges[{i}] ({e.source}->{e.target}): empty relation")
        for end in (e.source, e.target):
            if end not in seen:
                problems.append(f"edges[{i}] ({e.source}-{e.relation}->{e.target}): unknown node {end!r}")
    return problems


def _require_str(obj, key, locus, line):
    if key not in obj:
        raise GraphParseError(f"missing field {key!r}", locus=locus, line=line)
    val = obj[key]
    if not isinstance(val, str):
        raise GraphParseError(f"field {key!r} must be a string", locus=f"{locus}.{key}", line=line)
    return val


def parse_graph(record: str | Mapping[str, Any], line: int | None = None) -> AttributedGraph:
    """Parse a graph record (JSON text or already-decoded mapping).

    Raises GraphParseError for malformed input and GraphIntegrityError when
    the record is well formed but breaks a graph invariant.
    """
    if isinstance(record, (str, bytes)):
        try:
            record = json.loads(record)
        except json.JSONDecodeError as exc:
            raise GraphParseError(f"invalid JSON: {exc.msg} (column {exc.colno})",
                                  line=exc.lineno if line is None else line) from None
    if not isinstance(record, Mapping):
        raise GraphParseError("graph record must be an object", line=line)
    raw_nodes = record.get("nodes", [])
    raw_edges = record.get("edges", [])
    if not isinstance(raw_nodes, list):
        raise GraphParseError("'nodes' must be a list", locus="nodes", line=line)
    if not isinstance(raw_edges, list):
        raise GraphParseError("'edges' must be a list", locus="edges", line=line)

    nodes = []
    for i, rn in enumerate(raw_nodes):
        loc = f"nodes[{i}]"
        if not isinstance(rn, Mapping):
            raise GraphParseError("node must be an object", locus=loc, line=line)
        nid = _require_str(rn, "id", loc, line)
        concept = _require_str(rn, "concept", loc, line)
        attrs = rn.get("attrs", {})
        if not isinstance(attrs, Mapping):
            raise GraphParseError("'attrs' must be an object", locus=f"{loc}.attrs", line=line)
        for k, v in attrs.items():
            if not isinstance(v, str):
                raise GraphParseError("attribute values must be strings", locus=f"{loc}.attrs.{k}", line=line)
        nodes.append(ConceptNode(nid, concept, tuple(sorted(attrs.items()))))

    edges = []
    for i, re_ in enumerate(raw_edges):
        loc = f"edges[{i}]"
        if not isinstance(re_, Mapping):
            raise GraphParseError("edge must be an object", locus=loc, line=line)
        edges.append(RelationEdge(_require_str(re_, "src", loc, line),
                                  _require_str(re_, "dst", loc, line),
                                  _require_str(re_, "rel", loc, line)))

    g = AttributedGraph(tuple(nodes), tuple(edges))
    problems = validate(g)
    if problems:
        raise GraphIntegrityError("; ".join(problems), locus=problems[0].split(":")[0], line=line)
    return g


def serialize_graph(g: AttributedGraph) -> dict[str, Any]:
    return {
        "nodes": [{"id": n.node_id, "concept": n.concept, "attrs": dict(n.attrs)} for n in g.nodes],
        "edges": [{"src": e.source, "dst": e.target, "rel": e.relation} for e in g.edges],
    }


# --- canonical form -------------------------------------------------------

def _rank(values):
    order = {v: r for r, v in enumerate(sorted(set(values)))}
    return [order[v] for v in values]


class _Adjacency:
    def __init__(self, g: AttributedGraph):
        idx = g.node_index()
        self.n = len(g.nodes)
        self.out = [[] for _ in range(self.n)]
        self.inc = [[] for _ in range(self.n)]
        self.edges = []
        for e in g.edges:
            s, t = idx[e.source], idx[e.target]
            self.out[s].append((e.relation, t))
            self.inc[t].append((e.relation, s))
            self.edges.append((s, t, e.relation))

    def refine(self, colors):
        """Iterated neighborhood-signature refinement until the partition is stable."""
        n_classes = len(set(colors))
        while True:
            sigs = [
                (colors[u],
                 tuple(sorted((r, colors[v]) for r, v in self.out[u])),
                 tuple(sorted((r, colors[v]) for r, v in self.inc[u])))
                for u in range(self.n)
            ]
            new = _rank(sigs)
            k = len(set(new))
            if k == n_classes:
                return new
            colors, n_classes = new, k

    def twins(self, u, v):
        # Swapping u and v is an automorphism when their edge multisets to every
        # third node agree and the u<->v edges are direction-symmetric.
        def profile(a, b):
            out = sorted((r, w if w != b else -1) for r, w in self.out[a] if w != a)
            inc = sorted((r, w if w != b else -1) for r, w in self.inc[a] if w != a)
            loops = sorted(r for r, w in self.out[a] if w == a)
            return out, inc, loops
        return profile(u, v) == profile(v, u)


def _serialize_order(g, adj, order):
    pos = {u: i for i, u in enumerate(order)}
    nodes = [[g.nodes[u].concept, [list(a) for a in g.nodes[u].attrs]] for u in order]
    edges = sorted([pos[s], pos[t], r] for s, t, r in adj.edges)
    return json.dumps({"n": nodes, "e": edges}, separators=(",", ":"), ensure_ascii=False)


def _canonicalize(g: AttributedGraph):
    memo = g._memo
    if "canonical" in memo:
        return memo["canonical"], memo["canonical_order"]
    adj = _Adjacency(g)
    init = _rank([json.dumps([n.concept, n.attrs]) for n in g.nodes])
    colors = adj.refine(init)
    best = [None, None]
    leaves = [0]

    def search(colors):
        classes = {}
        for u, c in enumerate(colors):
            classes.setdefault(c, []).append(u)
        cell = next((classes[c] for c in sorted(classes) if len(classes[c]) > 1), None)
        if cell is None:
            order = sorted(range(adj.n), key=lambda u: colors[u])
            s = _serialize_order(g, adj, order)
            leaves[0] += 1
            if best[0] is None or s < best[0]:
                best[0], best[1] = s, order
            return
        reps = []
        for u in cell:
            if not any(adj.twins(u, r) for r in reps):
                reps.append(u)
        for i, u in enumerate(reps):
            if i > 0 and leaves[0] >= _MAX_CANON_LEAVES:
                break
            indiv = [(c, 0 if w == u else 1) for w, c in enumerate(colors)]
            search(adj.refine(_rank(indiv)))

    search(colors)
    if best[0] is None:
        best = [_serialize_order(g, adj, []), []]
    memo["canonical"], memo["canonical_order"] = best[0], tuple(best[1])
    return best[0], tuple(best[1])


def canonical_form(g: AttributedGraph) -> str:
    """Deterministic string invariant under node order and node-id renaming.

    Nodes are relabeled by content (concept, attributes) refined with
    neighborhood signatures; residual ties are resolved by individualization,
    keeping the lexicographically smallest serialization. Used for duplicate
    detection; pathological symmetric graphs beyond the leaf cap may yield
    order-dependent output.
    """
    return _canonicalize(g)[0]


def canonical_order(g: AttributedGraph) -> tuple[int, ...]:
    """Node indices of ``g`` listed in canonical order."""
    return _canonicalize(g)[1]
