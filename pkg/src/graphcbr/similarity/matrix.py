"""Batch graph similarity: many-to-many matrices and per-case blending."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from .. import kernels
from ..graph import AttributedGraph, canonical_form
from .config import SimilarityConfig
from .edit import sim_edit
from .encode import GraphBatch
from .integrated import integrated_value
from .lcs import sim_lcs

_parallelism: int | None = None
_MIN_CHUNK = 2048


def set_parallelism(n: int | None) -> None:
    """Number of worker threads for batch kernels; None means one per core."""
    global _parallelism
    if n is not None and n < 1:
        raise ValueError("parallelism must be >= 1")
    _parallelism = n


def get_parallelism() -> int:
    return _parallelism or os.cpu_count() or 1


def graph_sim(g1: AttributedGraph, g2: AttributedGraph, cfg: SimilarityConfig) -> float:
    """Similarity of two graphs under ``cfg.measure``."""
    if cfg.measure == "integrated":
        return integrated_value(g1, g2, cfg)
    if cfg.measure == "lcs":
        return sim_lcs(g1, g2, cfg)
    return sim_edit(g1, g2, cfg)


def case_sim(query_q: AttributedGraph, query_a: AttributedGraph, case, cfg: SimilarityConfig) -> float:
    """Blend of question and answer similarity against a stored case."""
    beta = cfg.case_blend
    return beta * graph_sim(query_q, case.question, cfg) + (1.0 - beta) * graph_sim(query_a, case.answer, cfg)


def run_pairs(batch_a: GraphBatch, batch_b: GraphBatch, ia: np.ndarray, ib: np.ndarray,
              cfg: SimilarityConfig, parallelism: int | None = None) -> np.ndarray:
    """Integrated similarity for index pairs, split across worker threads."""
    ia = np.ascontiguousarray(ia, dtype=np.int64)
    ib = np.ascontiguousarray(ib, dtype=np.int64)
    out = np.empty(len(ia), dtype=np.float64)
    params = cfg.kernel_params()
    workers = parallelism or get_parallelism()
    if workers <= 1 or len(ia) < 2 * _MIN_CHUNK:
        kernels.pair_values(batch_a, batch_b, ia, ib, params, out)
        return out
    bounds = np.linspace(0, len(ia), workers + 1).astype(np.int64)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda s: kernels.pair_values(batch_a, batch_b, ia[s[0]:s[1]], ib[s[0]:s[1]],
                                                    params, out[s[0]:s[1]]),
                      zip(bounds[:-1], bounds[1:])))
    return out


def unique_graphs(graphs: Sequence[AttributedGraph]) -> tuple[list[AttributedGraph], np.ndarray]:
    """Distinct graphs by canonical form (first seen kept) and each input's index among them."""
    first: dict[str, int] = {}
    uniq: list[AttributedGraph] = []
    index = np.empty(len(graphs), dtype=np.int64)
    for k, g in enumerate(graphs):
        key = canonical_form(g)
        pos = first.get(key)
        if pos is None:
            pos = first[key] = len(uniq)
            uniq.append(g)
        index[k] = pos
    return uniq, index


def _unique_matrix(rows, cols, cfg, symmetric, parallelism):
    nr, nc = len(rows), len(cols)
    if nr == 0 or nc == 0:
        return np.zeros((nr, nc))
    if cfg.measure == "integrated":
        ba = GraphBatch(rows)
        bb = ba if symmetric else GraphBatch(cols)
        if symmetric:
            ia, ib = np.triu_indices(nr)
        else:
            ia, ib = np.divmod(np.arange(nr * nc, dtype=np.int64), nc)
        vals = run_pairs(ba, bb, ia, ib, cfg, parallelism)
        m = np.empty((nr, nc))
        m[ia, ib] = vals
        if symmetric:
            m[ib, ia] = vals
        return m
    m = np.empty((nr, nc))
    for i in range(nr):
        for j in range(i if symmetric else 0, nc):
            m[i, j] = graph_sim(rows[i], cols[j], cfg)
            if symmetric:
                m[j, i] = m[i, j]
    return m


def similarity_matrix(rows: Sequence[AttributedGraph], cols: Sequence[AttributedGraph] | None = None,
                      cfg: SimilarityConfig | None = None, parallelism: int | None = None) -> np.ndarray:
    """Matrix of graph similarities; ``cols=None`` means rows against themselves."""
    cfg = cfg or SimilarityConfig()
    symmetric = cols is None
    ur, ri = unique_graphs(rows)
    if symmetric:
        m = _unique_matrix(ur, ur, cfg, True, parallelism)
        return m[np.ix_(ri, ri)]
    uc, ci = unique_graphs(cols)
    m = _unique_matrix(ur, uc, cfg, False, parallelism)
    return m[np.ix_(ri, ci)]
