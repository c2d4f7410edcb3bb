"""Metrics, classification protocols, base-growth simulation and ranker cross-validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .casebase import CaseBase, CaseTable
from .errors import EmptyCaseBaseError
from .features import RankItem
from .maintenance import Objective, hill_climb_table, rates
from .ranker import RankerParams, first_correct_rank, rank, train_ranker
from .similarity import SimilarityConfig

__all__ = [
    "PROTOCOLS",
    "REFERENCE_FIGURES",
    "ExperimentReport",
    "GrowthStep",
    "GrowthCurve",
    "mrr",
    "ans_at_k",
    "question_folds",
    "run_protocol",
    "growth_simulation",
    "cross_validate_ranker",
    "feature_baseline",
]

PROTOCOLS = {
    1: "stored characterizations, full base",
    2: "leave one case out",
    3: "leave one question out",
    4: "leave one question out after correct-only optimization",
    5: "leave one question out after overall optimization",
    6: "3-fold split by question",
    7: "3-fold split, correct-only optimization per fold",
    8: "3-fold split, overall optimization per fold",
}

# Figures reported for the original German question-answering corpus. They
# label report layouts only; nothing here is computed or asserted against.
REFERENCE_FIGURES = {
    "classification": {
        # protocol: (correct-case rate, incorrect-case rate)
        2: (0.73, 0.56), 3: (0.59, 0.29), 4: (0.82, 1.00), 5: (0.87, 0.96),
        6: (0.56, 0.23), 7: (0.56, 0.40), 8: (0.55, 0.29),
    },
    "ranking": {"DSC3": {"mrr": 0.74, "ans": {1: 0.61, 5: 0.89}}},
    "cbr_split_share": 0.425,
}


def _ranks(first_correct_ranks: Sequence[int | None]) -> list[int | None]:
    ranks = list(first_correct_ranks)
    if not ranks:
        raise ValueError("rank list is empty")
    for r in ranks:
        if r is not None and (isinstance(r, bool) or int(r) != r or r < 1):
            raise ValueError(f"ranks must be positive integers or None, got {r!r}")
    return ranks


def mrr(first_correct_ranks: Sequence[int | None]) -> float:
    """Mean reciprocal rank; a question without a correct answer contributes 0."""
    ranks = _ranks(first_correct_ranks)
    return sum(1.0 / r for r in ranks if r is not None) / len(ranks)


def ans_at_k(first_correct_ranks: Sequence[int | None], k: int) -> float:
    """Fraction of questions whose first correct answer is ranked within the top k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranks = _ranks(first_correct_ranks)
    return sum(1 for r in ranks if r is not None and r <= k) / len(ranks)


@dataclass
class ExperimentReport:
    protocol: str
    overall: float | None = None
    correct_rate: float | None = None
    incorrect_rate: float | None = None
    mrr: float | None = None
    ans: dict[int, float] = field(default_factory=dict)
    n_queries: int = 0
    per_question: list[dict[str, Any]] = field(default_factory=list)
    config_fingerprint: str = ""
    seed: int | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def classification(cls, protocol, table: CaseTable, rows: np.ndarray, predicted: np.ndarray,
                       **kw) -> "ExperimentReport":
        les = table.lessons[rows]
        ok = predicted == les
        counts = (int(np.sum(les & ok)), int(np.sum(les)), int(np.sum(~les & ok)), int(np.sum(~les)))
        value = rates(*counts)
        per_q: dict[str, list[int]] = {}
        for r, l, o in zip(rows.tolist(), les.tolist(), ok.tolist()):
            entry = per_q.setdefault(table.question_ids[r], [0, 0, 0, 0])
            if l:
                entry[0] += o
                entry[1] += 1
            else:
                entry[2] += o
                entry[3] += 1
        breakdown = [{"question_id": q, "true_correct": v[0], "true_total": v[1],
                      "false_correct": v[2], "false_total": v[3]} for q, v in sorted(per_q.items())]
        return cls(str(protocol), value.overall, value.correct_rate, value.incorrect_rate,
                   n_queries=len(rows), per_question=breakdown, **kw)

    @classmethod
    def ranking(cls, protocol, ranks: dict[str, int | None], **kw) -> "ExperimentReport":
        values = [ranks[q] for q in sorted(ranks)]
        return cls(str(protocol), mrr=mrr(values), ans={k: ans_at_k(values, k) for k in range(1, 6)},
                   n_queries=len(values),
                   per_question=[{"question_id": q, "first_correct_rank": ranks[q]} for q in sorted(ranks)],
                   **kw)

    def summary(self) -> dict[str, Any]:
        out: dict[str, Any] = {"protocol": self.protocol, "n_queries": self.n_queries,
                               "config_fingerprint": self.config_fingerprint, "seed": self.seed}
        if self.overall is not None:
            out.update(overall=self.overall, correct_rate=self.correct_rate, incorrect_rate=self.incorrect_rate)
        if self.mrr is not None:
            out["mrr"] = self.mrr
            out.update({f"ans@{k}": v for k, v in sorted(self.ans.items())})
        if self.extra:
            out["extra"] = self.extra
        return out

    def to_jsonl(self) -> str:
        lines = [json.dumps({"type": "summary", **self.summary()}, sort_keys=True)]
        lines += [json.dumps({"type": "question", "protocol": self.protocol, **row}, sort_keys=True)
                  for row in self.per_question]
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        if self.mrr is not None:
            head = f"{'features':<10}{'MRR':>7}" + "".join(f"{'ANS-' + str(k):>7}" for k in range(1, 6))
            row = f"{self.protocol:<10}{self.mrr:>7.3f}" + "".join(f"{self.ans[k]:>7.3f}" for k in range(1, 6))
            return f"{head}\n{row}\n"
        return (f"{'protocol':<10}{'overall':>9}{'correct':>9}{'incorrect':>11}{'queries':>9}\n"
                f"{self.protocol:<10}{self.overall:>9.3f}{self.correct_rate:>9.3f}"
                f"{self.incorrect_rate:>11.3f}{self.n_queries:>9}\n")


def question_folds(question_ids: Iterable[str], n_folds: int, seed: int) -> dict[str, int]:
    """Seeded assignment of sorted question ids to folds of near-equal size."""
    qids = sorted(set(question_ids))
    if len(qids) < n_folds:
        raise ValueError(f"{len(qids)} questions cannot fill {n_folds} folds")
    perm = np.random.default_rng(seed).permutation(len(qids))
    return {qids[p]: i % n_folds for i, p in enumerate(perm)}


def _optimized_columns(table, objective, active):
    mask, log = hill_climb_table(table, objective, active)
    return np.flatnonzero(mask), log


def run_protocol(p: int, cb: CaseBase, cfg: SimilarityConfig | None = None, seed: int = 0,
                 table: CaseTable | None = None) -> ExperimentReport:
    """Run one of the eight classification protocols (see ``PROTOCOLS``)."""
    if p not in PROTOCOLS:
        raise ValueError(f"protocol must be one of 1-8, got {p!r}")
    cfg = cfg or SimilarityConfig()
    if len(cb) == 0:
        raise EmptyCaseBaseError("cannot evaluate an empty case base")
    table = table or cb.table(cfg)
    n = len(table)
    every = np.arange(n)
    kw = {"config_fingerprint": cfg.fingerprint(), "seed": seed}
    if p in (1, 2, 3):
        exclude = {1: "none", 2: "case", 3: "question"}[p]
        pred = table.lessons[table.nearest(every, every, exclude)]
        return ExperimentReport.classification(p, table, every, pred, **kw)
    if p in (4, 5):
        objective = Objective.CORRECT_ONLY if p == 4 else Objective.OVERALL
        cols, log = _optimized_columns(table, objective, None)
        pred = table.lessons[table.nearest(every, cols, "question")]
        return ExperimentReport.classification(p, table, every, pred,
                                               extra={"deleted": len(log.steps)}, **kw)
    folds = question_folds(table.question_ids, 3, seed)
    fold_of = np.array([folds[q] for q in table.question_ids])
    rows_all, pred_all, deleted = [], [], 0
    for f in range(3):
        rows = np.flatnonzero(fold_of == f)
        train = fold_of != f
        if len(rows) == 0 or not train.any():
            raise EmptyCaseBaseError(f"fold {f} has no cases")
        if p == 6:
            cols = np.flatnonzero(train)
        else:
            objective = Objective.CORRECT_ONLY if p == 7 else Objective.OVERALL
            cols, log = _optimized_columns(table, objective, train)
            deleted += len(log.steps)
        rows_all.append(rows)
        pred_all.append(table.lessons[table.nearest(rows, cols, "none")])
    rows = np.concatenate(rows_all)
    order = np.argsort(rows)
    extra = {"deleted": deleted} if p != 6 else {}
    return ExperimentReport.classification(p, table, rows[order], np.concatenate(pred_all)[order],
                                           extra=extra, **kw)


@dataclass
class GrowthStep:
    case_count: int
    question_count: int
    optimized_count: int
    report: ExperimentReport


@dataclass
class GrowthCurve:
    steps: list[GrowthStep]
    objective: Objective
    seed: int
    config_fingerprint: str

    @property
    def case_counts(self) -> list[int]:
        return [s.case_count for s in self.steps]

    @property
    def overall(self) -> list[float]:
        return [s.report.overall for s in self.steps]

    def to_jsonl(self) -> str:
        lines = []
        for s in self.steps:
            lines.append(json.dumps({
                "type": "growth_step", "case_count": s.case_count, "question_count": s.question_count,
                "optimized_count": s.optimized_count, "objective": self.objective.value, "seed": self.seed,
                "config_fingerprint": self.config_fingerprint, "overall": s.report.overall,
                "correct_rate": s.report.correct_rate, "incorrect_rate": s.report.incorrect_rate,
            }, sort_keys=True))
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        out = [f"{'cases':>7}{'questions':>11}{'kept':>7}{'overall':>9}{'correct':>9}{'incorrect':>11}"]
        for s in self.steps:
            r = s.report
            out.append(f"{s.case_count:>7}{s.question_count:>11}{s.optimized_count:>7}"
                       f"{r.overall:>9.3f}{r.correct_rate:>9.3f}{r.incorrect_rate:>11.3f}")
        return "\n".join(out) + "\n"


def growth_simulation(corpus: CaseBase, start_count: int = 1000, step: int = 1000,
                      objective: Objective = Objective.OVERALL, cfg: SimilarityConfig | None = None,
                      seed: int = 0, table: CaseTable | None = None) -> GrowthCurve:
    """Grow a base by whole questions in seeded order, optimizing and evaluating each step.

    Each step adds questions until its target count is reached or exceeded,
    runs hill climbing on the grown base and records a leave-one-question-out
    report of the grown base's cases against the optimized base.
    """
    cfg = cfg or SimilarityConfig()
    objective = Objective.parse(objective)
    if start_count < 1 or step < 1:
        raise ValueError("start_count and step must be positive")
    if len(corpus) < start_count:
        raise ValueError(f"corpus has {len(corpus)} cases, fewer than start_count {start_count}")
    table = table or corpus.table(cfg)
    qids = sorted(set(table.question_ids))
    order = np.random.default_rng(seed).permutation(len(qids))
    members = {q: [] for q in qids}
    for i, q in enumerate(table.question_ids):
        members[q].append(i)
    included = np.zeros(len(table), dtype=bool)
    count = taken = 0
    target = start_count
    steps = []
    while True:
        while count < target and taken < len(qids):
            idx = members[qids[order[taken]]]
            included[idx] = True
            count += len(idx)
            taken += 1
        mask, _ = hill_climb_table(table, objective, included)
        rows = np.flatnonzero(included)
        pred = table.lessons[table.nearest(rows, np.flatnonzero(mask), "question")]
        report = ExperimentReport.classification("growth", table, rows, pred,
                                                 config_fingerprint=cfg.fingerprint(), seed=seed)
        steps.append(GrowthStep(count, taken, int(mask.sum()), report))
        if taken == len(qids):
            break
        target += step
    return GrowthCurve(steps, objective, seed, cfg.fingerprint())


def _by_question(items: Sequence[RankItem]) -> dict[str, list[RankItem]]:
    groups: dict[str, list[RankItem]] = {}
    for it in items:
        groups.setdefault(it.question_id, []).append(it)
    return groups


def cross_validate_ranker(items: Sequence[RankItem], n_folds: int = 10, params: RankerParams | None = None,
                          seed: int = 0, feature_names: Sequence[str] | None = None,
                          label: str = "RANK", parallelism: int | None = None) -> ExperimentReport:
    """Question-level k-fold cross-validation of the tree ensemble."""
    params = params or RankerParams()
    groups = _by_question(items)
    folds = question_folds(groups, n_folds, seed)
    fold_seeds = np.random.SeedSequence([params.seed, seed]).generate_state(n_folds)
    ranks: dict[str, int | None] = {}
    for f in range(n_folds):
        train = [it for q in sorted(groups) if folds[q] != f for it in groups[q]]
        model = train_ranker(train, params, feature_names, parallelism=parallelism, seed=int(fold_seeds[f]))
        for q in sorted(groups):
            if folds[q] == f:
                ranks[q] = first_correct_rank(rank(model, groups[q]))
    return ExperimentReport.ranking(label, ranks, seed=seed,
                                    extra={"n_folds": n_folds, "params": params.to_dict(),
                                           "features": list(feature_names) if feature_names else None})


def feature_baseline(items: Sequence[RankItem], feature: str = "ir_score") -> ExperimentReport:
    """Rank every question's candidates by one raw feature (descending, ties by candidate_id)."""
    ranks = {}
    for q, group in sorted(_by_question(items).items()):
        ordered = sorted(group, key=lambda it: (-it.features[feature], it.candidate_id))
        ranks[q] = first_correct_rank(ordered)
    return ExperimentReport.ranking(f"baseline:{feature}", ranks)
