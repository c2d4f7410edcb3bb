"""Bagged ensemble of rank-optimizing decision trees.

Each tree is grown best-first on a question-level bootstrap sample. A split
is scored by the change in training mean reciprocal rank when the leaf's
items are re-scored with the Laplace estimates of the two children; growth
stops at ``max_splits`` or when no split improves the rank metric. The
ensemble score is the mean of the per-tree leaf estimates.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import DegenerateDatasetError
from .features import RankItem

__all__ = [
    "RankerParams",
    "Tree",
    "RankingModel",
    "train_ranker",
    "score",
    "rank",
    "feature_usage",
    "first_correct_rank",
    "load_model",
    "save_model",
]

MODEL_FORMAT = "graphcbr.ranking-model"
_MIN_GAIN = 1e-12


@dataclass(frozen=True)
class RankerParams:
    n_trees: int = 10
    max_splits: int = 40
    seed: int = 0
    min_leaf: int = 5
    max_thresholds: int = 32

    def __post_init__(self):
        for name in ("n_trees", "min_leaf", "max_thresholds"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.max_splits < 0:
            raise ValueError("max_splits must be >= 0")

    def to_dict(self) -> dict[str, int]:
        return {"n_trees": self.n_trees, "max_splits": self.max_splits, "seed": self.seed,
                "min_leaf": self.min_leaf, "max_thresholds": self.max_thresholds}


@dataclass
class Tree:
    """Binary threshold tree; node 0 is the root, ``feature[i] < 0`` marks a leaf."""

    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    value: list[float]

    @property
    def n_splits(self) -> int:
        return sum(f >= 0 for f in self.feature)

    def predict(self, X: np.ndarray) -> np.ndarray:
        feat = np.asarray(self.feature, dtype=np.int64)
        thr = np.asarray(self.threshold, dtype=np.float64)
        left = np.asarray(self.left, dtype=np.int64)
        right = np.asarray(self.right, dtype=np.int64)
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            f = feat[node]
            idx = np.flatnonzero(f >= 0)
            if len(idx) == 0:
                break
            cur = node[idx]
            go_left = X[idx, f[idx]] <= thr[cur]
            node[idx] = np.where(go_left, left[cur], right[cur])
        return np.asarray(self.value)[node]

    def leaf_value(self, x: Sequence[float]) -> float:
        i = 0
        while self.feature[i] >= 0:
            i = self.left[i] if x[self.feature[i]] <= self.threshold[i] else self.right[i]
        return self.value[i]


@dataclass
class RankingModel:
    feature_names: list[str]
    trees: list[Tree]
    max_splits: int
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def split_features(self) -> list[str]:
        used = {self.feature_names[f] for t in self.trees for f in t.feature if f >= 0}
        return sorted(used)

    def matrix(self, rows: Iterable[Mapping[str, float]]) -> np.ndarray:
        """Feature matrix in model column order; unused missing features become 0."""
        needed = set(self.split_features())
        rows = list(rows)
        X = np.zeros((len(rows), len(self.feature_names)))
        for i, feats in enumerate(rows):
            for j, name in enumerate(self.feature_names):
                if name in feats:
                    X[i, j] = feats[name]
                elif name in needed:
                    raise KeyError(f"missing feature {name!r}")
        return X

    def predict(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros(len(X))
        for t in self.trees:
            total = total + t.predict(X)
        return total / len(self.trees)

    def to_dict(self) -> dict[str, Any]:
        names = self.feature_names
        return {
            "format": MODEL_FORMAT,
            "version": 1,
            "features": list(names),
            "n_trees": self.n_trees,
            "max_splits": self.max_splits,
            "metadata": self.metadata,
            "trees": [
                {
                    "feature": [names[f] if f >= 0 else None for f in t.feature],
                    "threshold": t.threshold,
                    "left": t.left,
                    "right": t.right,
                    "value": t.value,
                }
                for t in self.trees
            ],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "RankingModel":
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError("not a ranking model document")
        names = list(doc["features"])
        pos = {n: i for i, n in enumerate(names)}
        trees = []
        for t in doc["trees"]:
            trees.append(Tree(
                feature=[pos[f] if f is not None else -1 for f in t["feature"]],
                threshold=[float(v) for v in t["threshold"]],
                left=[int(v) for v in t["left"]],
                right=[int(v) for v in t["right"]],
                value=[float(v) for v in t["value"]],
            ))
        if not trees:
            raise ValueError("model has no trees")
        return cls(names, trees, int(doc["max_splits"]), dict(doc.get("metadata", {})))


def save_model(model: RankingModel, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path: str | os.PathLike) -> RankingModel:
    with open(path, encoding="utf-8") as fh:
        return RankingModel.from_dict(json.load(fh))


# --- training -------------------------------------------------------------

@dataclass
class _Data:
    X: np.ndarray            # (N, F)
    labels: np.ndarray       # int8 (N,)
    q_start: np.ndarray      # int64 (Q+1,), items of question q are q_start[q]:q_start[q+1]
    cidrank: np.ndarray      # int64 (N,), candidate order within its question
    question_ids: list[str]


def _prepare(items: Sequence[RankItem], feature_names: Sequence[str]) -> _Data:
    groups: dict[str, list[RankItem]] = {}
    for it in items:
        if it.gold_label is None:
            raise DegenerateDatasetError(f"candidate {it.candidate_id!r} has no gold label")
        groups.setdefault(it.question_id, []).append(it)
    qids = sorted(groups)
    rows, labels, cidrank, q_start = [], [], [], [0]
    for q in qids:
        members = sorted(groups[q], key=lambda it: it.candidate_id)
        for r, it in enumerate(members):
            rows.append([it.features.get(n, 0.0) for n in feature_names])
            labels.append(1 if it.gold_label else 0)
            cidrank.append(r)
        q_start.append(len(rows))
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(feature_names))
    return _Data(X, np.array(labels, dtype=np.int8), np.array(q_start, dtype=np.int64),
                 np.array(cidrank, dtype=np.int64), qids)


def _check_dataset(data: _Data) -> None:
    for q in range(len(data.question_ids)):
        lab = data.labels[data.q_start[q]:data.q_start[q + 1]]
        if lab.any() and not lab.all():
            return
    raise DegenerateDatasetError("no question has both a positive and a negative candidate")


def _bag(data: _Data, sample: np.ndarray):
    idx, ptr = [], [0]
    for q in sample:
        a, b = data.q_start[q], data.q_start[q + 1]
        idx.append(np.arange(a, b))
        ptr.append(ptr[-1] + b - a)
    idx = np.concatenate(idx) if idx else np.zeros(0, dtype=np.int64)
    ptr = np.array(ptr, dtype=np.int64)
    item_q = np.repeat(np.arange(len(sample)), np.diff(ptr))
    return (np.ascontiguousarray(data.X[idx]), np.ascontiguousarray(data.labels[idx]), ptr,
            np.ascontiguousarray(data.cidrank[idx]), item_q)


class _Grower:
    def __init__(self, X, labels, q_ptr, cidrank, item_q, params: RankerParams):
        self.X, self.labels, self.q_ptr, self.cidrank, self.item_q = X, labels, q_ptr, cidrank, item_q
        self.params = params
        n = len(labels)
        root_value = (int(labels.sum()) + 1.0) / (n + 2.0)
        self.scores = np.full(n, root_value)
        self.rr = kernels.question_rr(labels, q_ptr, cidrank, self.scores)
        self.tree = Tree([-1], [0.0], [-1], [-1], [root_value])
        self.items = {0: np.arange(n, dtype=np.int64)}

    def best_split(self, node: int):
        items = self.items[node]
        n = len(items)
        p = self.params
        if n < 2 * p.min_leaf:
            return None
        aff = np.unique(self.item_q[items])
        best = None
        for f in range(self.X.shape[1]):
            vals = self.X[items, f]
            o = np.argsort(vals, kind="stable")
            sv = vals[o]
            cuts = np.flatnonzero(sv[1:] > sv[:-1]) + 1
            cuts = cuts[(cuts >= p.min_leaf) & (cuts <= n - p.min_leaf)]
            if len(cuts) == 0:
                continue
            if len(cuts) > p.max_thresholds:
                cuts = cuts[np.unique(np.round(np.linspace(0, len(cuts) - 1, p.max_thresholds)).astype(np.int64))]
            order = np.ascontiguousarray(items[o])
            gain, pos = kernels.scan_split(order, np.ascontiguousarray(cuts, dtype=np.int64), self.labels,
                                           self.q_ptr, self.cidrank, self.scores, aff, self.rr)
            if best is None or gain > best[0]:
                lo, hi = sv[pos - 1], sv[pos]
                thr = (lo + hi) / 2.0
                if not thr < hi:
                    thr = lo
                best = (gain, f, float(thr), np.sort(order[:pos]), np.sort(order[pos:]))
        return best

    def apply(self, node: int, split) -> None:
        _, f, thr, left_items, right_items = split
        t = self.tree
        ids = []
        for part in (left_items, right_items):
            value = (int(self.labels[part].sum()) + 1.0) / (len(part) + 2.0)
            t.feature.append(-1)
            t.threshold.append(0.0)
            t.left.append(-1)
            t.right.append(-1)
            t.value.append(value)
            nid = len(t.feature) - 1
            self.items[nid] = part
            self.scores[part] = value
            ids.append(nid)
        t.feature[node], t.threshold[node] = f, thr
        t.left[node], t.right[node] = ids
        t.value[node] = 0.0
        del self.items[node]
        self.rr = kernels.question_rr(self.labels, self.q_ptr, self.cidrank, self.scores)

    def grow(self) -> Tree:
        """Lazy best-first growth: cached gains are re-checked before use."""
        cache: dict[int, tuple] = {}
        stale: set[int] = set()

        def refresh(node):
            cache[node] = self.best_split(node)
            stale.discard(node)

        def gain_of(node):
            s = cache[node]
            return -np.inf if s is None else s[0]

        refresh(0)
        splits = 0
        while splits < self.params.max_splits and cache:
            node = max(sorted(cache), key=gain_of)
            if node in stale:
                refresh(node)
                continue
            if not gain_of(node) > _MIN_GAIN:
                if not stale:
                    break
                for other in sorted(stale):
                    refresh(other)
                continue
            split = cache.pop(node)
            self.apply(node, split)
            splits += 1
            stale.update(cache)
            for child in (self.tree.left[node], self.tree.right[node]):
                refresh(child)
        return self.tree


def _train_tree(data: _Data, sample: np.ndarray, params: RankerParams) -> Tree:
    X, labels, ptr, cidrank, item_q = _bag(data, sample)
    if params.max_splits == 0 or len(labels) == 0:
        n = len(labels)
        return Tree([-1], [0.0], [-1], [-1], [(int(labels.sum()) + 1.0) / (n + 2.0)])
    return _Grower(X, labels, ptr, cidrank, item_q, params).grow()


def train_ranker(items: Sequence[RankItem], params: RankerParams | None = None,
                 feature_names: Sequence[str] | None = None,
                 parallelism: int | None = None, **overrides) -> RankingModel:
    """Fit the bagged tree ensemble on labeled ranking items.

    ``feature_names`` restricts and orders the columns (default: every
    feature name present). Bags sample questions with replacement; a
    question drawn twice contributes two independent copies.
    """
    params = replace(params or RankerParams(), **overrides)
    if feature_names is None:
        feature_names = sorted({n for it in items for n in it.features})
    feature_names = list(feature_names)
    data = _prepare(items, feature_names)
    _check_dataset(data)
    nq = len(data.question_ids)
    seeds = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    samples = [np.sort(np.random.default_rng(s).integers(0, nq, size=nq)) for s in seeds]
    workers = parallelism or 1
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(lambda s: _train_tree(data, s, params), samples))
    else:
        trees = [_train_tree(data, s, params) for s in samples]
    metadata = {
        "params": params.to_dict(),
        "n_questions": nq,
        "n_items": int(len(data.labels)),
        "bagging": "question-level bootstrap",
        "split_criterion": "training mean reciprocal rank",
        "monotonicity_constraints": "not implemented",
    }
    return RankingModel(feature_names, trees, params.max_splits, metadata)


# --- inference ------------------------------------------------------------

def score(model: RankingModel, features: Mapping[str, float]) -> float:
    """Mean of the per-tree leaf estimates for one feature mapping."""
    x = model.matrix([features])[0]
    total = 0.0
    for t in model.trees:
        total = total + t.leaf_value(x)
    return total / len(model.trees)


def rank(model: RankingModel, candidates: Sequence[RankItem]) -> list[tuple[RankItem, float]]:
    """Candidates of one question by descending score, ties by candidate_id."""
    if not candidates:
        raise ValueError("no candidates to rank")
    scores = model.predict(model.matrix(c.features for c in candidates))
    order = sorted(range(len(candidates)), key=lambda i: (-scores[i], candidates[i].candidate_id))
    return [(candidates[i], float(scores[i])) for i in order]


def first_correct_rank(ranked: Sequence[RankItem | tuple[RankItem, float]]) -> int | None:
    for pos, entry in enumerate(ranked, start=1):
        item = entry[0] if isinstance(entry, tuple) else entry
        if item.gold_label:
            return pos
    return None


def feature_usage(model: RankingModel) -> dict[str, float]:
    """Share of all split conditions (over every tree) that test each feature."""
    counts: dict[str, int] = {}
    for t in model.trees:
        for f in t.feature:
            if f >= 0:
                name = model.feature_names[f]
                counts[name] = counts.get(name, 0) + 1
    total = sum(counts.values())
    return {name: c / total for name, c in sorted(counts.items())} if total else {}
