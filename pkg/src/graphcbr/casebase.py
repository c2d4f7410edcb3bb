"""Case base: storage, ingestion with deduplication, persistence, retrieval.

A case pairs a characterization (question graph, answer-candidate graph)
with a boolean lesson telling whether the candidate answered the question.
Retrieval is an exhaustive scan ranking cases by blended graph similarity;
a complete match (both graphs equal up to canonical form) outranks any
non-identical case of equal similarity, and remaining ties go to the
smaller case_id.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import CaseRecordError, EmptyCaseBaseError, GraphParseError
from .graph import AttributedGraph, canonical_form, parse_graph, serialize_graph
from .similarity import SimilarityConfig, similarity_matrix, unique_graphs

__all__ = [
    "Case",
    "CaseBase",
    "CaseTable",
    "IngestReport",
    "Match",
    "RetrievalMode",
    "parse_case",
    "read_records",
]

# Added to the ranking key of complete matches; similarities never exceed 1.
EXACT_BONUS = 0.5


@dataclass(frozen=True)
class Case:
    case_id: str
    question_id: str
    question: AttributedGraph
    answer: AttributedGraph
    lesson: bool
    source_text: str | None = None

    @property
    def dedup_key(self) -> tuple[str, str, bool]:
        return canonical_form(self.question), canonical_form(self.answer), self.lesson

    def to_record(self) -> dict[str, Any]:
        rec = {
            "case_id": self.case_id,
            "question_id": self.question_id,
            "lesson": self.lesson,
            "question": serialize_graph(self.question),
            "answer": serialize_graph(self.answer),
        }
        if self.source_text is not None:
            rec["source_text"] = self.source_text
        return rec


def parse_case(record: str | Mapping[str, Any], index: int | None = None) -> Case:
    if isinstance(record, (str, bytes)):
        try:
            record = json.loads(record)
        except json.JSONDecodeError as exc:
            raise CaseRecordError(f"invalid JSON: {exc.msg} (column {exc.colno})", index) from None
    if not isinstance(record, Mapping):
        raise CaseRecordError("case record must be an object", index)
    for key in ("case_id", "question_id"):
        if not isinstance(record.get(key), str) or not record[key]:
            raise CaseRecordError(f"field {key!r} must be a non-empty string", index)
    if not isinstance(record.get("lesson"), bool):
        raise CaseRecordError("field 'lesson' must be a boolean", index)
    source = record.get("source_text")
    if source is not None and not isinstance(source, str):
        raise CaseRecordError("field 'source_text' must be a string", index)
    graphs = {}
    for key in ("question", "answer"):
        if key not in record:
            raise CaseRecordError(f"missing field {key!r}", index)
        try:
            graphs[key] = parse_graph(record[key])
        except GraphParseError as exc:
            raise CaseRecordError(f"{key}: {exc}", index) from None
    return Case(record["case_id"], record["question_id"], graphs["question"], graphs["answer"],
                record["lesson"], source)


def read_records(path: str | os.PathLike) -> Iterator[str]:
    """Non-blank lines of a line-delimited UTF-8 file."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield line


@dataclass
class IngestReport:
    accepted: int = 0
    duplicates_dropped: int = 0
    parse_failures: list[tuple[int, str]] = field(default_factory=list)
    conflicts: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "accepted": self.accepted,
            "duplicates_dropped": self.duplicates_dropped,
            "parse_failures": [{"index": i, "error": e} for i, e in self.parse_failures],
            "conflicts": [{"case_id": a, "conflicts_with": b} for a, b in self.conflicts],
        }


@dataclass(frozen=True)
class RetrievalMode:
    kind: str = "full"           # "full" | "exclude_question" | "exclude_case"
    target: str | None = None

    @classmethod
    def full(cls) -> "RetrievalMode":
        return cls("full")

    @classmethod
    def exclude_question(cls, question_id: str) -> "RetrievalMode":
        return cls("exclude_question", question_id)

    @classmethod
    def exclude_case(cls, case_id: str) -> "RetrievalMode":
        return cls("exclude_case", case_id)

    def __str__(self):
        return self.kind if self.target is None else f"{self.kind}({self.target})"


@dataclass(frozen=True)
class Match:
    case_id: str
    similarity: float
    lesson: bool
    exact: bool = False


class CaseBase:
    """Finite set of cases indexed by case_id and grouped by question_id."""

    def __init__(self, cases: Iterable[Case] = ()):
        self._cases: dict[str, Case] = {}
        self._dedup: dict[tuple[str, str, bool], str] = {}
        self._ids: list[str] | None = None
        self._cache: dict = {}
        for c in cases:
            self.add(c)

    # --- container protocol ---
    def __len__(self) -> int:
        return len(self._cases)

    def __contains__(self, case_id) -> bool:
        return case_id in self._cases

    def __iter__(self) -> Iterator[Case]:
        return iter(self.cases)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CaseBase):
            return NotImplemented
        return self.signature() == other.signature()

    def get(self, case_id: str) -> Case:
        return self._cases[case_id]

    @property
    def case_ids(self) -> list[str]:
        if self._ids is None:
            self._ids = sorted(self._cases)
        return self._ids

    @property
    def cases(self) -> list[Case]:
        return [self._cases[i] for i in self.case_ids]

    @property
    def question_index(self) -> dict[str, tuple[str, ...]]:
        idx = self._cache.get("qindex")
        if idx is None:
            groups: dict[str, list[str]] = {}
            for cid in self.case_ids:
                groups.setdefault(self._cases[cid].question_id, []).append(cid)
            idx = {q: tuple(v) for q, v in sorted(groups.items())}
            self._cache["qindex"] = idx
        return idx

    def signature(self) -> list[tuple]:
        """Content identity: ids, question ids, lessons, canonical graphs."""
        return [(c.case_id, c.question_id, c.lesson, canonical_form(c.question), canonical_form(c.answer))
                for c in self.cases]

    # --- mutation (single writer) ---
    def _touch(self):
        self._ids = None
        self._cache = {}

    def add(self, case: Case) -> bool:
        """Insert a case; returns False when an identical characterization+lesson exists."""
        if case.case_id in self._cases:
            raise ValueError(f"duplicate case_id {case.case_id!r}")
        key = case.dedup_key
        if key in self._dedup:
            return False
        self._cases[case.case_id] = case
        self._dedup[key] = case.case_id
        self._touch()
        return True

    def remove(self, case_id: str) -> Case:
        case = self._cases.pop(case_id)
        self._dedup.pop(case.dedup_key, None)
        self._touch()
        return case

    def subset(self, case_ids: Iterable[str]) -> "CaseBase":
        return CaseBase(self._cases[i] for i in sorted(set(case_ids)))

    def without(self, case_ids: Iterable[str]) -> "CaseBase":
        drop = set(case_ids)
        return CaseBase(c for c in self.cases if c.case_id not in drop)

    def conflict_partner(self, case: Case) -> str | None:
        q, a, lesson = case.dedup_key
        return self._dedup.get((q, a, not lesson))

    def ingest(self, records: Iterable[str | Mapping[str, Any]], strict: bool = False) -> IngestReport:
        """Add records, dropping duplicates (first seen wins) and reporting failures.

        With ``strict`` the first malformed record raises CaseRecordError.
        """
        report = IngestReport()
        for index, rec in enumerate(records):
            try:
                case = parse_case(rec, index)
            except CaseRecordError as exc:
                if strict:
                    raise
                report.parse_failures.append((index, str(exc)))
                continue
            if case.dedup_key in self._dedup:
                report.duplicates_dropped += 1
                continue
            if case.case_id in self._cases:
                msg = f"record {index}: duplicate case_id {case.case_id!r} with different content"
                if strict:
                    raise CaseRecordError(msg.split(": ", 1)[1], index)
                report.parse_failures.append((index, msg))
                continue
            partner = self.conflict_partner(case)
            if partner is not None:
                report.conflicts.append((case.case_id, partner))
            self.add(case)
            report.accepted += 1
        return report

    # --- persistence ---
    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for c in self.cases:
                fh.write(json.dumps(c.to_record(), sort_keys=True, ensure_ascii=False))
                fh.write("\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "CaseBase":
        cb = cls()
        cb.ingest(read_records(path), strict=True)
        return cb

    # --- retrieval ---
    def effective_mask(self, mode: RetrievalMode) -> np.ndarray:
        ids = self.case_ids
        mask = np.ones(len(ids), dtype=bool)
        if mode.kind == "full":
            pass
        elif mode.kind == "exclude_question":
            members = self.question_index.get(mode.target)
            if members is None:
                raise KeyError(f"unknown question_id {mode.target!r}")
            pos = {cid: i for i, cid in enumerate(ids)}
            mask[[pos[c] for c in members]] = False
        elif mode.kind == "exclude_case":
            if mode.target not in self._cases:
                raise KeyError(f"unknown case_id {mode.target!r}")
            mask[ids.index(mode.target)] = False
        else:
            raise ValueError(f"unknown retrieval mode {mode.kind!r}")
        return mask

    def _columns(self):
        cols = self._cache.get("columns")
        if cols is None:
            cases = self.cases
            cols = (
                [c.question for c in cases],
                [c.answer for c in cases],
                np.array([c.lesson for c in cases], dtype=bool),
            )
            self._cache["columns"] = cols
        return cols

    def score(self, queries: Sequence[tuple[AttributedGraph, AttributedGraph]],
              cfg: SimilarityConfig) -> tuple[np.ndarray, np.ndarray]:
        """Similarity of each query against every case (columns in case_id order).

        Returns ``(sim, exact)``; ``exact`` marks complete matches.
        """
        sim, exact, _ = self.score_detail(queries, cfg)
        return sim, exact

    def score_detail(self, queries: Sequence[tuple[AttributedGraph, AttributedGraph]],
                     cfg: SimilarityConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Like :meth:`score`, plus the question-only similarity matrix."""
        qs, ans, _ = self._columns()
        q_ids, a_ids = self._canonical_ids()
        sq = similarity_matrix([q for q, _ in queries], qs, cfg)
        sa = similarity_matrix([a for _, a in queries], ans, cfg)
        exact = _same_form([q for q, _ in queries], q_ids) & _same_form([a for _, a in queries], a_ids)
        beta = cfg.case_blend
        return beta * sq + (1.0 - beta) * sa, exact, sq

    def _canonical_ids(self):
        ids = self._cache.get("canon_ids")
        if ids is None:
            ids = tuple(_form_codes(g) for g in self._columns()[:2])
            self._cache["canon_ids"] = ids
        return ids

    def retrieve(self, query_q: AttributedGraph, query_a: AttributedGraph, k: int,
                 mode: RetrievalMode = RetrievalMode(), cfg: SimilarityConfig | None = None) -> list[Match]:
        """Top-k cases by similarity under the mode's exclusion."""
        if k < 1:
            raise ValueError("k must be a positive integer")
        cfg = cfg or SimilarityConfig()
        mask = self.effective_mask(mode)
        if not mask.any():
            raise EmptyCaseBaseError(f"no cases left to retrieve from under mode {mode}")
        sim, exact = self.score([(query_q, query_a)], cfg)
        return self.ranked(sim[0], exact[0], mask, k)

    def ranked(self, sim: np.ndarray, exact: np.ndarray, mask: np.ndarray, k: int | None = None) -> list[Match]:
        """Matches for one scored query row, best first, restricted to ``mask``."""
        ids = self.case_ids
        _, _, lessons = self._columns()
        idx = np.flatnonzero(mask)
        key = sim[idx] + EXACT_BONUS * exact[idx]
        order = idx[np.argsort(-key, kind="stable")][:k]
        return [Match(ids[i], float(sim[i]), bool(lessons[i]), bool(exact[i])) for i in order]

    def classify(self, query_q: AttributedGraph, query_a: AttributedGraph,
                 mode: RetrievalMode = RetrievalMode(), cfg: SimilarityConfig | None = None) -> tuple[bool, Match]:
        """Nearest-neighbor label transfer from the single best match."""
        best = self.retrieve(query_q, query_a, 1, mode, cfg)[0]
        return best.lesson, best

    def table(self, cfg: SimilarityConfig | None = None) -> "CaseTable":
        cfg = cfg or SimilarityConfig()
        key = ("table", cfg.fingerprint())
        tab = self._cache.get(key)
        if tab is None:
            tab = CaseTable.build(self, cfg)
            self._cache[key] = tab
        return tab


def _form_codes(graphs):
    codes: dict[str, int] = {}
    arr = np.array([codes.setdefault(canonical_form(g), len(codes)) for g in graphs], dtype=np.int64)
    return codes, arr


def _same_form(graphs, column_codes):
    codes, arr = column_codes
    q = np.array([codes.get(canonical_form(g), -1) for g in graphs], dtype=np.int64)
    return q[:, None] == arr[None, :]


@dataclass
class CaseTable:
    """All-pairs case similarities of one case base, rows/columns in case_id order.

    Subsets of the base are handled by index arrays into the table so a
    single matrix serves hill climbing, folds and growth steps.
    """

    case_ids: list[str]
    question_ids: list[str]
    lessons: np.ndarray        # bool (n,)
    qcodes: np.ndarray         # int (n,), question index per case
    sim: np.ndarray            # float (n, n)
    exact: np.ndarray          # bool (n, n)

    @classmethod
    def build(cls, cb: CaseBase, cfg: SimilarityConfig) -> "CaseTable":
        cases = cb.cases
        qs = [c.question for c in cases]
        ans = [c.answer for c in cases]
        _, q_u = unique_graphs(qs)
        _, a_u = unique_graphs(ans)
        sq = similarity_matrix(qs, None, cfg)
        beta = cfg.case_blend
        exact = (q_u[:, None] == q_u[None, :]) & (a_u[:, None] == a_u[None, :])
        sa = similarity_matrix(ans, None, cfg)
        sim = beta * sq + (1.0 - beta) * sa
        qids = [c.question_id for c in cases]
        qmap = {q: i for i, q in enumerate(sorted(set(qids)))}
        return cls(
            case_ids=[c.case_id for c in cases],
            question_ids=qids,
            lessons=np.array([c.lesson for c in cases], dtype=bool),
            qcodes=np.array([qmap[q] for q in qids], dtype=np.int64),
            sim=sim,
            exact=exact,
        )

    def __len__(self):
        return len(self.case_ids)

    @property
    def key(self) -> np.ndarray:
        k = getattr(self, "_key", None)
        if k is None:
            k = self.sim + EXACT_BONUS * self.exact
            self._key = k
        return k

    def nearest(self, rows: np.ndarray, cols: np.ndarray, exclude: str = "none") -> np.ndarray:
        """Best column (table index) for each query row among ``cols``.

        ``exclude`` is "none", "case" (drop the row itself) or "question"
        (drop every case of the row's question). Raises EmptyCaseBaseError
        when some row has no admissible column.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        if len(rows) == 0:
            return np.zeros(0, dtype=np.int64)
        if len(cols) == 0:
            raise EmptyCaseBaseError("no cases to retrieve from")
        k = self.key[np.ix_(rows, cols)].copy()
        if exclude == "case":
            k[rows[:, None] == cols[None, :]] = -np.inf
        elif exclude == "question":
            k[self.qcodes[rows][:, None] == self.qcodes[cols][None, :]] = -np.inf
        elif exclude != "none":
            raise ValueError(f"unknown exclusion {exclude!r}")
        best = np.argmax(k, axis=1)
        if np.isneginf(k[np.arange(len(rows)), best]).any():
            raise EmptyCaseBaseError("a query has no admissible case under the exclusion")
        return cols[best]
