"""Numeric features derived from case retrieval, and ranking datasets."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .casebase import EXACT_BONUS, CaseBase, RetrievalMode
from .errors import CaseRecordError
from .graph import AttributedGraph
from .similarity import SimilarityConfig

__all__ = [
    "CBR_FEATURES",
    "FEATURE_GROUPS",
    "FeatureVector",
    "RankItem",
    "extract_features",
    "extract_features_batch",
    "feature_group",
    "select_features",
    "read_dataset",
    "write_dataset",
]

CBR_FEATURES = (
    "cbr_best_sim",
    "cbr_best_lesson",
    "cbr_signed_sim",
    "cbr_max_true_sim",
    "cbr_max_false_sim",
    "cbr_vote",
    "cbr_question_sim",
)

# Group letter -> feature-name prefix.
FEATURE_GROUPS = {"D": "deep_", "S": "shallow_", "C": "cbr_", "I": "ir_"}


def feature_group(name: str) -> str | None:
    for letter, prefix in FEATURE_GROUPS.items():
        if name.startswith(prefix):
            return letter
    return None


def select_features(names: Iterable[str], groups: str | None) -> list[str]:
    """Sorted feature names belonging to the given group letters (all names if None)."""
    names = sorted(set(names))
    if groups is None:
        return names
    letters = set(groups.upper())
    unknown = letters - set(FEATURE_GROUPS)
    if unknown:
        raise ValueError(f"unknown feature group(s) {''.join(sorted(unknown))!r}; use letters from 'DSCI'")
    return [n for n in names if feature_group(n) in letters]


@dataclass(frozen=True)
class FeatureVector:
    cbr: tuple[float, ...]
    passthrough: Mapping[str, float] = field(default_factory=dict)
    empty_base: bool = False

    def as_dict(self) -> dict[str, float]:
        out = dict(zip(CBR_FEATURES, self.cbr))
        out.update(self.passthrough)
        return out


@dataclass(frozen=True)
class RankItem:
    question_id: str
    candidate_id: str
    features: Mapping[str, float]
    gold_label: bool | None = None

    def to_record(self) -> dict[str, Any]:
        rec = {"question_id": self.question_id, "candidate_id": self.candidate_id,
               "features": dict(sorted(self.features.items()))}
        if self.gold_label is not None:
            rec["gold_label"] = self.gold_label
        return rec


def _vector(sim, exact, qsim, lessons, mask, k) -> FeatureVector:
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return FeatureVector((0.0,) * len(CBR_FEATURES), empty_base=True)
    key = sim[idx] + EXACT_BONUS * exact[idx]
    order = idx[np.argsort(-key, kind="stable")]
    best = order[0]
    f1 = float(sim[best])
    f2 = 1.0 if lessons[best] else 0.0
    les = lessons[idx]
    f4 = float(sim[idx][les].max()) if les.any() else 0.0
    f5 = float(sim[idx][~les].max()) if (~les).any() else 0.0
    top = order[:k]
    total = float(sum(sim[top]))
    f6 = float(sum(s for s, l in zip(sim[top], lessons[top]) if l)) / total if total > 0 else 0.0
    f7 = float(qsim[idx].max())
    return FeatureVector((f1, f2, f1 * (2.0 * f2 - 1.0), f4, f5, f6, f7))


def extract_features_batch(queries: Sequence[tuple[AttributedGraph, AttributedGraph]], cb: CaseBase,
                           modes: Sequence[RetrievalMode], k: int = 5,
                           cfg: SimilarityConfig | None = None) -> list[FeatureVector]:
    """Feature vectors for many queries, one retrieval scan each."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    cfg = cfg or SimilarityConfig()
    if len(queries) != len(modes):
        raise ValueError("one retrieval mode per query is required")
    if len(cb) == 0:
        return [FeatureVector((0.0,) * len(CBR_FEATURES), empty_base=True) for _ in queries]
    masks = [cb.effective_mask(m) for m in modes]
    sim, exact, qsim = cb.score_detail(queries, cfg)
    lessons = np.array([c.lesson for c in cb.cases], dtype=bool)
    return [_vector(sim[i], exact[i], qsim[i], lessons, masks[i], k) for i in range(len(queries))]


def extract_features(query_q: AttributedGraph, query_a: AttributedGraph, cb: CaseBase,
                     mode: RetrievalMode = RetrievalMode(), k: int = 5,
                     cfg: SimilarityConfig | None = None) -> FeatureVector:
    """Retrieval-derived features for one (question, candidate) query.

    An empty effective base yields all-zero features with ``empty_base`` set.
    """
    return extract_features_batch([(query_q, query_a)], cb, [mode], k, cfg)[0]


def _parse_item(rec: Mapping[str, Any], index: int) -> RankItem:
    if not isinstance(rec, Mapping):
        raise CaseRecordError("dataset record must be an object", index)
    for key in ("question_id", "candidate_id"):
        if not isinstance(rec.get(key), str) or not rec[key]:
            raise CaseRecordError(f"field {key!r} must be a non-empty string", index)
    label = rec.get("gold_label")
    if label is not None and not isinstance(label, bool):
        raise CaseRecordError("field 'gold_label' must be a boolean", index)
    feats = rec.get("features")
    if not isinstance(feats, Mapping):
        raise CaseRecordError("field 'features' must be an object", index)
    clean = {}
    for name, value in feats.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise CaseRecordError(f"feature {name!r} must be a finite number", index)
        clean[name] = float(value)
    return RankItem(rec["question_id"], rec["candidate_id"], clean, label)


def read_dataset(path: str | os.PathLike) -> list[RankItem]:
    items: list[RankItem] = []
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as fh:
        for index, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CaseRecordError(f"invalid JSON: {exc.msg}", index) from None
            item = _parse_item(rec, index)
            key = (item.question_id, item.candidate_id)
            if key in seen:
                raise CaseRecordError(f"duplicate candidate {key[1]!r} for question {key[0]!r}", index)
            seen.add(key)
            items.append(item)
    return items


def write_dataset(items: Iterable[RankItem], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for item in sorted(items, key=lambda it: (it.question_id, it.candidate_id)):
            fh.write(json.dumps(item.to_record(), sort_keys=True, ensure_ascii=False))
            fh.write("\n")
