"""Synthetic graphs, case bases and ranking sets with planted structure.

Used by the test suite and by the hidden ``gen-synthetic`` command so that
every experiment can run without an annotated question-answering corpus.
"""

from __future__ import annotations

import numpy as np

from .casebase import Case, CaseBase
from .features import RankItem
from .graph import AttributedGraph, ConceptNode, RelationEdge, canonical_form

__all__ = [
    "RELATIONS",
    "random_graph",
    "random_case_base",
    "planted_corpus",
    "planted_ranking_set",
    "separable_ranking_set",
]

RELATIONS = ("AGT", "OBJ", "LOC", "TEMP", "ATTR", "PROP", "SUB", "CAUS")
_ATTRS = {"fact": ("real", "hypo"), "card": ("1", "mult"), "gener": ("sp", "ge")}
_GENERIC = ("person", "time", "place", "thing", "event", "group", "state", "quantity")


def _attrs(rng: np.random.Generator, p: float = 0.5) -> dict[str, str]:
    return {k: str(rng.choice(v)) for k, v in _ATTRS.items() if rng.random() < p}


def _wire(rng, nodes, n_edges, relations) -> AttributedGraph:
    """Attach nodes by a random spanning forest plus extra random edges."""
    edges = []
    n = len(nodes)
    for i in range(1, n):
        j = int(rng.integers(0, i))
        a, b = (nodes[i].node_id, nodes[j].node_id) if rng.random() < 0.5 else (nodes[j].node_id, nodes[i].node_id)
        edges.append(RelationEdge(a, b, str(rng.choice(relations))))
    while len(edges) < n_edges and n > 0:
        a, b = rng.integers(0, n, size=2)
        edges.append(RelationEdge(nodes[a].node_id, nodes[b].node_id, str(rng.choice(relations))))
    return AttributedGraph(tuple(nodes), tuple(edges))


def random_graph(rng: np.random.Generator, n_nodes: int, n_edges: int | None = None,
                 concepts: int = 4, relations: int = 3, attr_p: float = 0.4) -> AttributedGraph:
    """Random multigraph over a small vocabulary (collisions are intended)."""
    if n_edges is None:
        n_edges = int(rng.integers(0, n_nodes + 2)) if n_nodes else 0
    nodes = [ConceptNode.make(f"n{i}", f"c{int(rng.integers(0, concepts))}", _attrs(rng, attr_p))
             for i in range(n_nodes)]
    edges = []
    for _ in range(n_edges if n_nodes else 0):
        a, b = rng.integers(0, n_nodes, size=2)
        edges.append(RelationEdge(f"n{a}", f"n{b}", RELATIONS[int(rng.integers(0, relations))]))
    return AttributedGraph(tuple(nodes), tuple(edges))


def random_case_base(rng: np.random.Generator, n_questions: int, per_question: tuple[int, int] = (2, 5),
                     max_nodes: int = 4) -> CaseBase:
    """Small base of random cases; duplicates are dropped on insertion."""
    cb = CaseBase()
    k = 0
    for q in range(n_questions):
        question = random_graph(rng, int(rng.integers(1, max_nodes + 1)), concepts=5)
        for _ in range(int(rng.integers(per_question[0], per_question[1] + 1))):
            answer = random_graph(rng, int(rng.integers(1, max_nodes + 1)), concepts=5)
            case = Case(f"c{k:03d}", f"q{q:02d}", question, answer, bool(rng.random() < 0.5))
            k += 1
            cb.add(case)
    return cb


def _motif_graph(rng, concepts, n_motif, n_noise, prefix):
    nodes = []
    picks = rng.choice(len(concepts), size=min(n_motif, len(concepts)), replace=False)
    for i, c in enumerate(sorted(int(p) for p in picks)):
        nodes.append(ConceptNode.make(f"{prefix}{i}", concepts[c], _attrs(rng, 0.3)))
    for i in range(n_noise):
        nodes.append(ConceptNode.make(f"{prefix}x{i}", str(rng.choice(_GENERIC)), _attrs(rng, 0.5)))
    order = rng.permutation(len(nodes))
    nodes = [nodes[i] for i in order]
    return _wire(rng, nodes, len(nodes) + int(rng.integers(0, 2)), RELATIONS)


def planted_corpus(seed: int = 0, n_clusters: int = 50, n_questions: int = 100,
                   candidates: int = 30, correct_share: float = 0.3, label_noise: float = 0.1,
                   motif_pool: int = 8) -> CaseBase:
    """Question clusters with cluster-specific correct and incorrect answer motifs.

    Questions of one cluster share topic concepts; correct candidates draw
    nodes from the cluster's correct-answer pool, incorrect ones from its
    distractor pool, each padded with generic noise nodes. A fraction
    ``label_noise`` of candidates carries the opposite motif. Nearest
    neighbors from other questions of the same cluster therefore predict the
    lesson well, and the chance of having such neighbors grows with the base.
    Every case is distinct and no characterization carries both lessons.
    """
    rng = np.random.default_rng(seed)
    topic = [[f"topic{c}.{k}" for k in range(6)] for c in range(n_clusters)]
    good = [[f"ans{c}.{k}" for k in range(motif_pool)] for c in range(n_clusters)]
    bad = [[f"dis{c}.{k}" for k in range(motif_pool)] for c in range(n_clusters)]
    cases = []
    k = 0
    for q in range(n_questions):
        c = int(rng.integers(0, n_clusters))
        question = _motif_graph(rng, topic[c], int(rng.integers(3, 5)), int(rng.integers(1, 3)), "q")
        seen: set[str] = set()
        for _ in range(candidates):
            lesson = bool(rng.random() < correct_share)
            motif_good = lesson != bool(rng.random() < label_noise)
            while True:
                answer = _motif_graph(rng, good[c] if motif_good else bad[c], int(rng.integers(2, 5)),
                                      int(rng.integers(1, 4)), "a")
                form = canonical_form(answer)
                if form not in seen:
                    seen.add(form)
                    break
            cases.append(Case(f"case{k:05d}", f"q{q:04d}", question, answer, lesson))
            k += 1
    return CaseBase(cases)


def planted_ranking_set(seed: int = 0, n_questions: int = 250, candidates: tuple[int, int] = (50, 70),
                        positives: tuple[int, int] = (1, 4)) -> list[RankItem]:
    """Ranking items whose CBR features carry the most label signal.

    Deep features carry less, shallow features less again, and ir_score
    only a trace.
    """
    rng = np.random.default_rng(seed)
    items = []
    for q in range(n_questions):
        m = int(rng.integers(candidates[0], candidates[1] + 1))
        n_pos = int(rng.integers(positives[0], positives[1] + 1))
        labels = np.zeros(m, dtype=bool)
        labels[rng.choice(m, size=n_pos, replace=False)] = True
        q_sim = float(rng.uniform(0.2, 0.9))
        for i in range(m):
            y = float(labels[i])
            best = float(np.clip(0.5 + 0.12 * y + rng.normal(0, 0.12), 0, 1))
            lesson = float(rng.random() < (0.6 if y else 0.3))
            t = float(np.clip(0.4 + 0.12 * y + rng.normal(0, 0.12), 0, 1))
            f = float(np.clip(0.55 - 0.08 * y + rng.normal(0, 0.12), 0, 1))
            feats = {
                "cbr_best_sim": best,
                "cbr_best_lesson": lesson,
                "cbr_signed_sim": best * (2 * lesson - 1),
                "cbr_max_true_sim": t,
                "cbr_max_false_sim": f,
                "cbr_vote": float(np.clip(0.3 + 0.15 * y + rng.normal(0, 0.15), 0, 1)),
                "cbr_question_sim": float(np.clip(q_sim + rng.normal(0, 0.05), 0, 1)),
                "deep_match": float(rng.normal(0.6 * y, 1.0)),
                "deep_coverage": float(rng.normal(0.4 * y, 1.0)),
                "shallow_overlap": float(rng.normal(0.3 * y, 1.0)),
                "shallow_length": float(rng.normal(0.0, 1.0)),
                "ir_score": float(rng.normal(0.25 * y, 1.0)),
            }
            items.append(RankItem(f"q{q:04d}", f"q{q:04d}.c{i:03d}", feats, bool(labels[i])))
    return items


def separable_ranking_set(seed: int = 0, n_questions: int = 60, candidates: int = 20) -> list[RankItem]:
    """Every question has a positive; ``cbr_oracle`` equals the label, other features are noise."""
    rng = np.random.default_rng(seed)
    items = []
    for q in range(n_questions):
        labels = np.zeros(candidates, dtype=bool)
        labels[rng.choice(candidates, size=int(rng.integers(1, 4)), replace=False)] = True
        for i in range(candidates):
            feats = {"cbr_oracle": float(labels[i]), "ir_score": float(rng.normal()),
                     "shallow_noise": float(rng.normal())}
            items.append(RankItem(f"q{q:03d}", f"q{q:03d}.c{i:02d}", feats, bool(labels[i])))
    return items
