"""Integer encodings of graphs for the compiled kernels.

Nodes are laid out in canonical order so graphs with equal canonical forms
encode identically; labels are interned to process-local integer ids (only
equality of ids matters to the kernels).
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..graph import AttributedGraph, canonical_form, canonical_order

_lock = threading.Lock()
_concepts: dict[str, int] = {}
_attrs: dict[tuple[str, str], int] = {}
_relations: dict[str, int] = {}


def _intern(table, key):
    v = table.get(key)
    if v is None:
        with _lock:
            v = table.setdefault(key, len(table))
    return v


@dataclass(frozen=True)
class EncodedGraph:
    concepts: np.ndarray            # int32, canonical node order
    attrs: tuple[np.ndarray, ...]   # sorted int32 attribute ids per node
    esrc: np.ndarray                # int32, sorted edges
    edst: np.ndarray
    erel: np.ndarray
    key: int                        # signed 64-bit digest of the canonical form
    node_order: tuple[int, ...]     # original node index per encoded position
    edge_order: tuple[int, ...]     # original edge index per encoded position

    @property
    def n_nodes(self) -> int:
        return len(self.concepts)

    @property
    def n_edges(self) -> int:
        return len(self.esrc)


def canonical_key(g: AttributedGraph) -> int:
    digest = hashlib.blake2b(canonical_form(g).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little", signed=True)


def encode(g: AttributedGraph) -> EncodedGraph:
    enc = g._memo.get("encoded")
    if enc is not None:
        return enc
    order = canonical_order(g)
    pos = {u: i for i, u in enumerate(order)}
    idx = g.node_index()
    concepts = np.array([_intern(_concepts, g.nodes[u].concept) for u in order], dtype=np.int32)
    attrs = tuple(np.array(sorted(_intern(_attrs, a) for a in g.nodes[u].attrs), dtype=np.int32)
                  for u in order)
    edges = sorted(
        ((pos[idx[e.source]], pos[idx[e.target]], e.relation, k) for k, e in enumerate(g.edges)),
        key=lambda t: (t[0], t[1], t[2], t[3]),
    )
    enc = EncodedGraph(
        concepts=concepts,
        attrs=attrs,
        esrc=np.array([t[0] for t in edges], dtype=np.int32),
        edst=np.array([t[1] for t in edges], dtype=np.int32),
        erel=np.array([_intern(_relations, t[2]) for t in edges], dtype=np.int32),
        key=canonical_key(g),
        node_order=tuple(order),
        edge_order=tuple(t[3] for t in edges),
    )
    g._memo["encoded"] = enc
    return enc


class GraphBatch:
    """Concatenated encodings of several graphs, addressed by batch position."""

    def __init__(self, graphs: Sequence[AttributedGraph]):
        encs = [encode(g) for g in graphs]
        self.size = len(encs)
        node_counts = [e.n_nodes for e in encs]
        edge_counts = [e.n_edges for e in encs]
        self.node_off = np.zeros(self.size + 1, dtype=np.int64)
        np.cumsum(node_counts, out=self.node_off[1:])
        self.edge_off = np.zeros(self.size + 1, dtype=np.int64)
        np.cumsum(edge_counts, out=self.edge_off[1:])
        # One padding slot keeps every array non-empty for the C side.
        self.concepts = np.concatenate([e.concepts for e in encs] + [np.zeros(1, np.int32)])
        all_attrs = [a for e in encs for a in e.attrs]
        attr_counts = [len(a) for a in all_attrs]
        self.attr_off = np.zeros(len(all_attrs) + 2, dtype=np.int64)
        np.cumsum(attr_counts, out=self.attr_off[1:len(all_attrs) + 1])
        self.attr_off[-1] = self.attr_off[-2]
        self.attr_ids = np.concatenate(all_attrs + [np.zeros(1, np.int32)])
        self.esrc = np.concatenate([e.esrc for e in encs] + [np.zeros(1, np.int32)])
        self.edst = np.concatenate([e.edst for e in encs] + [np.zeros(1, np.int32)])
        self.erel = np.concatenate([e.erel for e in encs] + [np.zeros(1, np.int32)])
        self.keys = np.array([e.key for e in encs] + [0], dtype=np.int64)
        self.encodings = encs
