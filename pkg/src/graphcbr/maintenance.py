"""Case-base optimization by greedy deletion of disturbing cases.

The objective is leave-one-case-out nearest-neighbor classification over the
base itself. Hill climbing repeatedly deletes the eligible case whose removal
raises the objective most, never emptying a question, until no deletion
strictly improves it.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .casebase import CaseBase, CaseTable, RetrievalMode
from .errors import EmptyCaseBaseError
from .similarity import SimilarityConfig

__all__ = [
    "Objective",
    "ObjectiveValue",
    "OptimizationLog",
    "LooState",
    "loo_objective",
    "hill_climb",
    "hill_climb_table",
    "rates",
]


class Objective(enum.Enum):
    CORRECT_ONLY = "correct_only"
    OVERALL = "overall"

    @property
    def deletable(self) -> bool:
        """Lesson value of the cases this objective may delete."""
        return self is Objective.OVERALL

    @classmethod
    def parse(cls, text: "str | Objective") -> "Objective":
        if isinstance(text, Objective):
            return text
        try:
            return cls(text.lower().replace("-", "_"))
        except ValueError:
            raise ValueError(f"unknown objective {text!r}; expected correct_only or overall") from None


@dataclass(frozen=True)
class ObjectiveValue:
    overall: float
    correct_rate: float
    incorrect_rate: float

    def value(self, kind: Objective) -> float:
        return self.correct_rate if kind is Objective.CORRECT_ONLY else self.overall


def rates(tp, n_true, tn, n_false) -> ObjectiveValue:
    """Class rates from counts; a class without queries counts as fully correct."""
    cr = tp / n_true if n_true else 1.0
    ir = tn / n_false if n_false else 1.0
    return ObjectiveValue((cr + ir) / 2, cr, ir)


def loo_objective(cb: CaseBase, kind: Objective = Objective.OVERALL,
                  cfg: SimilarityConfig | None = None) -> ObjectiveValue:
    """Classify every case against the rest of the base (straightforward path)."""
    if len(cb) == 0:
        raise EmptyCaseBaseError("objective of an empty case base")
    tp = n_true = tn = n_false = 0
    for case in cb.cases:
        predicted, _ = cb.classify(case.question, case.answer, RetrievalMode.exclude_case(case.case_id), cfg)
        if case.lesson:
            n_true += 1
            tp += predicted
        else:
            n_false += 1
            tn += not predicted
    return rates(tp, n_true, tn, n_false)


@dataclass
class OptimizationLog:
    objective: Objective
    initial: float
    steps: list[tuple[str, float, float]] = field(default_factory=list)
    passes: int = 0

    @property
    def final(self) -> float:
        return self.steps[-1][2] if self.steps else self.initial

    @property
    def deleted(self) -> list[str]:
        return [cid for cid, _, _ in self.steps]

    def replay(self, cb: CaseBase) -> CaseBase:
        return cb.without(self.deleted)

    def to_dict(self) -> dict[str, Any]:
        return {
            "objective": self.objective.value,
            "initial": self.initial,
            "final": self.final,
            "passes": self.passes,
            "steps": [{"case_id": c, "before": b, "after": a} for c, b, a in self.steps],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class LooState:
    """Leave-one-out classification of an active subset with cached neighbors.

    Each active query keeps its two best neighbors (by ranking key, then
    index). Deleting case d only changes queries whose first neighbor was d;
    their new neighbor is the cached second one, so every candidate deletion
    is scored without re-scanning the table.
    """

    def __init__(self, table: CaseTable, active: np.ndarray):
        self.table = table
        self.key = table.key
        self.lessons = table.lessons
        self.active = np.array(active, dtype=bool)
        n = len(table)
        self.nn1 = np.full(n, -1, dtype=np.int64)
        self.nn2 = np.full(n, -1, dtype=np.int64)
        rows = np.flatnonzero(self.active)
        if len(rows) < 2:
            raise EmptyCaseBaseError("leave-one-out needs at least two cases")
        k = self.key[np.ix_(rows, rows)].copy()
        np.fill_diagonal(k, -np.inf)
        first = np.argmax(k, axis=1)
        self.nn1[rows] = rows[first]
        k[np.arange(len(rows)), first] = -np.inf
        if len(rows) > 2:
            second = np.argmax(k, axis=1)
            self.nn2[rows] = rows[second]

    def _rescan(self, i: int) -> int:
        k = np.where(self.active, self.key[i], -np.inf)
        k[i] = -np.inf
        if self.nn1[i] >= 0:
            k[self.nn1[i]] = -np.inf
        j = int(np.argmax(k))
        return j if np.isfinite(k[j]) else -1

    def counts(self) -> tuple[int, int, int, int]:
        rows = np.flatnonzero(self.active)
        les = self.lessons[rows]
        pred = self.lessons[self.nn1[rows]]
        return (int(np.sum(les & pred)), int(np.sum(les)),
                int(np.sum(~les & ~pred)), int(np.sum(~les)))

    def value(self) -> ObjectiveValue:
        return rates(*self.counts())

    def deletion_values(self, candidates: np.ndarray, kind: Objective) -> np.ndarray:
        """Objective after deleting each candidate (one at a time)."""
        n = len(self.table)
        tp, n_true, tn, n_false = self.counts()
        rows = np.flatnonzero(self.active)
        les = self.lessons[rows]
        old_ok = (self.lessons[self.nn1[rows]] == les).astype(np.int64)
        nn2 = self.nn2[rows]
        new_ok = np.where(nn2 >= 0, self.lessons[np.maximum(nn2, 0)] == les, 0).astype(np.int64)
        change = new_ok - old_ok
        d_true = np.bincount(self.nn1[rows][les], weights=change[les], minlength=n).astype(np.int64)
        d_false = np.bincount(self.nn1[rows][~les], weights=change[~les], minlength=n).astype(np.int64)
        c = np.asarray(candidates, dtype=np.int64)
        cl = self.lessons[c]
        c_ok = (self.lessons[self.nn1[c]] == cl).astype(np.int64)
        tp_c = tp + d_true[c] - np.where(cl, c_ok, 0)
        nt_c = n_true - cl.astype(np.int64)
        tn_c = tn + d_false[c] - np.where(cl, 0, c_ok)
        nf_c = n_false - (~cl).astype(np.int64)
        out = np.empty(len(c))
        for k in range(len(c)):
            v = rates(int(tp_c[k]), int(nt_c[k]), int(tn_c[k]), int(nf_c[k]))
            out[k] = v.value(kind)
        return out

    def delete(self, d: int) -> None:
        self.active[d] = False
        self.nn1[d] = self.nn2[d] = -1
        for i in np.flatnonzero(self.active & (self.nn1 == d)):
            self.nn1[i] = self.nn2[i]
            self.nn2[i] = self._rescan(i)
        for i in np.flatnonzero(self.active & (self.nn2 == d)):
            self.nn2[i] = self._rescan(i)


def hill_climb_table(table: CaseTable, objective: Objective,
                     active: np.ndarray | None = None,
                     on_step=None) -> tuple[np.ndarray, OptimizationLog]:
    """Steepest-ascent deletion over an index subset of a case table.

    Returns the surviving mask and the log. ``on_step(mask)`` is called after
    each accepted deletion.
    """
    n = len(table)
    active = np.ones(n, dtype=bool) if active is None else np.array(active, dtype=bool)
    if not active.any():
        raise EmptyCaseBaseError("cannot optimize an empty case base")
    if active.sum() < 3:
        # Leave-one-out is undefined for a lone case; two cases cannot lose one.
        value = LooState(table, active).value().value(objective) if active.sum() == 2 else 1.0
        return active, OptimizationLog(objective, value)
    state = LooState(table, active)
    current = state.value().value(objective)
    log = OptimizationLog(objective, current)
    per_question = np.bincount(table.qcodes[active], minlength=int(table.qcodes.max()) + 1)
    eligible_lesson = table.lessons == objective.deletable
    while True:
        log.passes += 1
        candidates = np.flatnonzero(state.active & eligible_lesson & (per_question[table.qcodes] >= 2))
        if len(candidates) == 0 or state.active.sum() <= 2:
            break
        values = state.deletion_values(candidates, objective)
        best = int(np.argmax(values))
        if not values[best] > current:
            break
        d = int(candidates[best])
        state.delete(d)
        per_question[table.qcodes[d]] -= 1
        log.steps.append((table.case_ids[d], current, float(values[best])))
        current = float(values[best])
        if on_step is not None:
            on_step(state.active.copy())
    return state.active, log


def hill_climb(cb: CaseBase, objective: Objective = Objective.OVERALL,
               cfg: SimilarityConfig | None = None) -> tuple[CaseBase, OptimizationLog]:
    """Delete cases while the leave-one-out objective strictly improves.

    Each round evaluates every eligible deletion (lesson permitted by the
    objective, question keeps another case) and applies the best one, ties
    going to the smaller case_id.
    """
    objective = Objective.parse(objective)
    if len(cb) == 0:
        raise EmptyCaseBaseError("cannot optimize an empty case base")
    table = cb.table(cfg)
    _, log = hill_climb_table(table, objective)
    return log.replay(cb), log
