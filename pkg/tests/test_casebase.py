import json

import numpy as np
import pytest

from graphcbr.casebase import Case, CaseBase, CaseTable, RetrievalMode, parse_case
from graphcbr.errors import CaseRecordError, EmptyCaseBaseError
from graphcbr.graph import serialize_graph
from graphcbr.similarity import SimilarityConfig, case_sim
from graphcbr.synthetic import random_case_base
from helpers import build, permuted

CFG = SimilarityConfig()
QUERY_Q = build([("a", "city"), ("b", "capital", {"GENER": "sp"})], [("a", "b", "SUB")])
QUERY_A = build([("a", "paris"), ("b", "city")], [("a", "b", "SUB")])


def record(case_id, question_id="q1", lesson=True, q=QUERY_Q, a=QUERY_A):
    return {"case_id": case_id, "question_id": question_id, "lesson": lesson,
            "question": serialize_graph(q), "answer": serialize_graph(a)}


def five_case_base():
    return CaseBase([
        Case("c1", "q1", build([("a", "city"), ("b", "capital")], [("a", "b", "SUB")]), QUERY_A, True),
        Case("c2", "q1", QUERY_Q, build([("a", "rome"), ("b", "city")], [("a", "b", "SUB")]), False),
        Case("c3", "q2", build([("a", "river")]), build([("a", "paris")]), True),
        Case("c4", "q2", QUERY_Q, build([("a", "paris"), ("b", "city")], [("b", "a", "SUB")]), False),
        Case("c5", "q3", build([("a", "city"), ("b", "capital", {"GENER": "sp"}), ("c", "x")], [("a", "b", "SUB")]),
             QUERY_A, True),
    ])


def test_ingest_counts():
    cb = CaseBase()
    other = build([("a", "rome")])
    report = cb.ingest([record("c1"), record("c2", a=other), record("c3", "q2", q=other)])
    assert (report.accepted, report.duplicates_dropped, report.parse_failures) == (3, 0, [])
    cb = CaseBase()
    report = cb.ingest([record("c1"), record("c1")])
    assert (report.accepted, report.duplicates_dropped) == (1, 1)


def test_ingest_dangling_edge_is_reported():
    bad = record("c2")
    bad["answer"]["edges"].append({"src": "a", "dst": "nowhere", "rel": "R"})
    cb = CaseBase()
    report = cb.ingest([record("c1"), bad])
    assert report.accepted == 1
    assert [i for i, _ in report.parse_failures] == [1]
    assert "nowhere" in report.parse_failures[0][1]
    assert "c2" not in cb


def test_ingest_dedup_uses_canonical_form_and_flags_conflicts():
    renamed = permuted(QUERY_A, np.random.default_rng(3))
    cb = CaseBase()
    report = cb.ingest([record("c1"), record("c2", a=renamed), record("c3", lesson=False)])
    assert report.accepted == 2 and report.duplicates_dropped == 1
    assert report.conflicts == [("c3", "c1")]
    assert cb.case_ids == ["c1", "c3"]


def test_ingest_rejects_reused_case_id_with_new_content():
    cb = CaseBase()
    report = cb.ingest([record("c1"), record("c1", a=build([("a", "rome")]))])
    assert report.accepted == 1 and len(report.parse_failures) == 1
    with pytest.raises(CaseRecordError):
        CaseBase().ingest([record("c1"), record("c1", a=build([("a", "rome")]))], strict=True)


@pytest.mark.parametrize("mutate, message", [
    (lambda r: r.pop("lesson"), "lesson"),
    (lambda r: r.update(lesson="yes"), "lesson"),
    (lambda r: r.update(question_id=""), "question_id"),
    (lambda r: r.pop("answer"), "answer"),
    (lambda r: r.update(source_text=5), "source_text"),
])
def test_parse_case_errors(mutate, message):
    rec = record("c1")
    mutate(rec)
    with pytest.raises(CaseRecordError, match=message) as info:
        parse_case(rec, 4)
    assert info.value.index == 4


def test_dedup_idempotence():
    records = [json.dumps(c.to_record()) for c in random_case_base(np.random.default_rng(5), 6, (3, 5), 4)]
    once = CaseBase()
    once.ingest(records)
    twice = CaseBase()
    twice.ingest(records)
    report = twice.ingest(records)
    assert report.accepted == 0 and report.duplicates_dropped == len(once)
    assert once == twice


def test_retrieve_identical_case_first():
    cb = five_case_base()
    best = cb.retrieve(QUERY_Q, build([("a", "rome"), ("b", "city")], [("a", "b", "SUB")]), 1)[0]
    assert best.case_id == "c2" and best.similarity == 1.0 and best.exact


def test_five_case_top3():
    cb = five_case_base()
    # Exhaustive case_sim values: c1 1.0, c5 0.9375, c4 0.8333, c2 0.6667, c3 0.3333.
    matches = cb.retrieve(QUERY_Q, QUERY_A, 3)
    assert [m.case_id for m in matches] == ["c1", "c5", "c4"]
    assert [m.similarity for m in matches] == pytest.approx([1.0, 0.9375, 5 / 6], abs=1e-12)
    every = {m.case_id: m.similarity for m in cb.retrieve(QUERY_Q, QUERY_A, 5)}
    assert every == {c.case_id: case_sim(QUERY_Q, QUERY_A, c, CFG) for c in cb}


def test_complete_match_beats_equal_similarity():
    cb = five_case_base()
    cb.add(Case("c9", "q4", QUERY_Q, QUERY_A, False))
    matches = cb.retrieve(QUERY_Q, QUERY_A, 2)
    assert [(m.case_id, m.similarity, m.exact) for m in matches] == [("c9", 1.0, True), ("c1", 1.0, False)]
    assert cb.classify(QUERY_Q, QUERY_A) == (False, matches[0])


def test_tie_goes_to_smaller_case_id():
    a_true = build([("a", "x")])
    a_false = build([("a", "y")])
    query_a = build([("a", "z")])
    cb = CaseBase([Case("k2", "q", QUERY_Q, a_true, True), Case("k1", "q", QUERY_Q, a_false, False)])
    lesson, best = cb.classify(QUERY_Q, query_a)
    assert (lesson, best.case_id) == (False, "k1")
    assert [m.case_id for m in cb.retrieve(QUERY_Q, query_a, 2)] == ["k1", "k2"]


def test_classify_duplicates():
    cb = five_case_base()
    for c in cb:
        lesson, best = cb.classify(c.question, c.answer)
        assert lesson == c.lesson and best.similarity == 1.0 and best.case_id == c.case_id


def test_exclusion_modes():
    cb = five_case_base()
    matches = cb.retrieve(QUERY_Q, QUERY_A, 5, RetrievalMode.exclude_question("q1"))
    assert {m.case_id for m in matches} == {"c3", "c4", "c5"}
    matches = cb.retrieve(QUERY_Q, QUERY_A, 5, RetrievalMode.exclude_case("c1"))
    assert [m.case_id for m in matches] == ["c5", "c4", "c2", "c3"]
    with pytest.raises(KeyError):
        cb.retrieve(QUERY_Q, QUERY_A, 1, RetrievalMode.exclude_question("nope"))
    with pytest.raises(KeyError):
        cb.retrieve(QUERY_Q, QUERY_A, 1, RetrievalMode.exclude_case("nope"))
    with pytest.raises(ValueError):
        cb.retrieve(QUERY_Q, QUERY_A, 0)


def test_leave_one_question_out_partitions_base():
    cb = five_case_base()
    excluded = []
    for q in cb.question_index:
        mask = cb.effective_mask(RetrievalMode.exclude_question(q))
        excluded += [cid for cid, keep in zip(cb.case_ids, mask) if not keep]
    assert sorted(excluded) == cb.case_ids


def test_empty_effective_base_raises():
    with pytest.raises(EmptyCaseBaseError):
        CaseBase().retrieve(QUERY_Q, QUERY_A, 1)
    single = CaseBase([Case("c1", "q1", QUERY_Q, QUERY_A, True)])
    with pytest.raises(EmptyCaseBaseError):
        single.retrieve(QUERY_Q, QUERY_A, 1, RetrievalMode.exclude_question("q1"))


def test_save_load_round_trip(tmp_path):
    cb = random_case_base(np.random.default_rng(8), 20, (5, 5), 5)
    assert len(cb) == 100
    path = tmp_path / "cases.jsonl"
    cb.save(path)
    loaded = CaseBase.load(path)
    assert loaded == cb
    loaded.save(tmp_path / "again.jsonl")
    assert (tmp_path / "again.jsonl").read_bytes() == path.read_bytes()


def test_load_empty_and_corrupt(tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    assert len(CaseBase.load(empty)) == 0
    bad = tmp_path / "bad.jsonl"
    bad.write_text(json.dumps(record("c1")) + "\n" + '{"case_id": "c2", \n')
    with pytest.raises(CaseRecordError) as info:
        CaseBase.load(bad)
    assert info.value.index == 1
    with pytest.raises(OSError):
        CaseBase.load(tmp_path / "missing.jsonl")


def test_table_matches_retrieval():
    cb = random_case_base(np.random.default_rng(9), 8, (4, 4), 4)
    table = cb.table(CFG)
    assert table is cb.table(CFG)
    sim, exact = cb.score([(c.question, c.answer) for c in cb], CFG)
    assert np.array_equal(sim, table.sim) and np.array_equal(exact, table.exact)
    rows = np.arange(len(cb))
    best = table.nearest(rows, rows, exclude="case")
    for r, b in zip(rows, best):
        c = cb.cases[r]
        top = cb.retrieve(c.question, c.answer, 1, RetrievalMode.exclude_case(c.case_id))[0]
        assert table.case_ids[b] == top.case_id
    best = table.nearest(rows, rows, exclude="question")
    assert all(table.qcodes[r] != table.qcodes[b] for r, b in zip(rows, best))


def test_table_nearest_errors():
    cb = CaseBase([Case("c1", "q1", QUERY_Q, QUERY_A, True)])
    table = CaseTable.build(cb, CFG)
    with pytest.raises(EmptyCaseBaseError):
        table.nearest(np.array([0]), np.array([0]), exclude="case")
    with pytest.raises(EmptyCaseBaseError):
        table.nearest(np.array([0]), np.array([], dtype=np.int64))
    assert table.nearest(np.array([0]), np.array([0])).tolist() == [0]
