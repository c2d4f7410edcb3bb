"""Local similarities composed by the integrated measure."""

from __future__ import annotations

from typing import AbstractSet, Hashable

from ..graph import ConceptNode
from .config import SimilarityConfig


def attribute_sim(u: tuple[str, str], v: tuple[str, str]) -> int:
    """1 when both key and value agree, else 0."""
    return 1 if u == v else 0


def list_sim(xs: AbstractSet[Hashable], ys: AbstractSet[Hashable]) -> float:
    """Overlap of two finite sets relative to the larger one; two empty sets score 1."""
    xs, ys = set(xs), set(ys)
    if not xs and not ys:
        return 1.0
    return len(xs & ys) / max(len(xs), len(ys))


def node_sim(n1: ConceptNode, n2: ConceptNode, cfg: SimilarityConfig) -> float:
    eq = n1.concept == n2.concept
    ls = list_sim(set(n1.attrs), set(n2.attrs))
    # Pinned endpoints: w + (1 - w) need not round to exactly 1.0.
    if eq and ls == 1.0:
        return 1.0
    if not eq and ls == 0.0:
        return 0.0
    return cfg.concept_weight * (1.0 if eq else 0.0) + cfg.attribute_weight * ls
