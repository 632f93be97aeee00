"""Corpus loading, serialization round-trips, and feedback filtering."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from qfs.corpus import (
    EXCLUDE_ALL_JUDGED,
    EXCLUDE_IRRELEVANT_ONLY,
    DocumentCollection,
    FeedbackStore,
    SnippetSpan,
    filter_judged,
    load_document_collection,
    load_question_set,
    question_set_to_json,
    save_document_collection,
    save_question_set,
)
from qfs.errors import DuplicateId, MalformedInput, UnknownQuestionType

from conftest import make_doc


def write_questions(tmp_path, payload, name="questions.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


MINIMAL_QUESTION = {
    "id": "q1",
    "body": "Is sleep good?",
    "type": "summary",
}


class TestLoadQuestionSet:
    def test_minimal_question(self, tmp_path):
        qs = load_question_set(write_questions(tmp_path, [MINIMAL_QUESTION]))
        assert len(qs) == 1
        q = qs["q1"]
        assert q.gold_documents == ()
        assert q.gold_snippets == ()
        assert q.ideal_answers == ()

    def test_unknown_type_rejected(self, tmp_path):
        bad = dict(MINIMAL_QUESTION, type="listt")
        with pytest.raises(UnknownQuestionType):
            load_question_set(write_questions(tmp_path, [bad]))

    def test_duplicate_id_rejected(self, tmp_path):
        with pytest.raises(DuplicateId):
            load_question_set(write_questions(tmp_path, [MINIMAL_QUESTION] * 2))

    def test_bad_json_rejected(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(MalformedInput):
            load_question_set(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(MalformedInput):
            load_question_set(tmp_path / "absent.json")

    def test_questions_wrapper_accepted(self, tmp_path):
        qs = load_question_set(
            write_questions(tmp_path, {"questions": [MINIMAL_QUESTION]})
        )
        assert len(qs) == 1

    def test_string_ideal_answer_promoted(self, tmp_path):
        payload = [dict(MINIMAL_QUESTION, ideal_answer="yes it is")]
        qs = load_question_set(write_questions(tmp_path, payload))
        assert qs["q1"].ideal_answers == ("yes it is",)

    def test_unknown_fields_ignored(self, tmp_path):
        payload = [dict(MINIMAL_QUESTION, exact_answer="yes", concepts=[1])]
        assert len(load_question_set(write_questions(tmp_path, payload))) == 1

    def test_snippets_parsed_with_offsets(self, tmp_path):
        payload = [
            dict(
                MINIMAL_QUESTION,
                snippets=[
                    {
                        "document": "d9",
                        "section": "abstract",
                        "offsetInBeginSection": 4,
                        "offsetInEndSection": 9,
                        "text": "sleep",
                    }
                ],
            )
        ]
        qs = load_question_set(write_questions(tmp_path, payload))
        span = qs["q1"].gold_snippets[0]
        assert span.key() == ("d9", "abstract", 4, 9)
        assert span.text == "sleep"

    def test_order_preserved(self, tmp_path):
        payload = [dict(MINIMAL_QUESTION, id=f"q{i}") for i in range(5)]
        qs = load_question_set(write_questions(tmp_path, payload))
        assert [q.id for q in qs] == [f"q{i}" for i in range(5)]

    def test_roundtrip(self, tmp_path):
        payload = [
            dict(
                MINIMAL_QUESTION,
                documents=["d1", "d2"],
                ideal_answer=["Sleep is good."],
                snippets=[
                    {
                        "document": "d1",
                        "section": "abstract",
                        "offsetInBeginSection": 0,
                        "offsetInEndSection": 5,
                        "text": "Sleep",
                    }
                ],
            )
        ]
        qs = load_question_set(write_questions(tmp_path, payload))
        out_path = tmp_path / "again.json"
        save_question_set(qs, out_path)
        reloaded = load_question_set(out_path)
        assert question_set_to_json(reloaded) == question_set_to_json(qs)


class TestLoadDocuments:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        path.write_text("", encoding="utf-8")
        assert len(load_document_collection(path)) == 0

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        line = json.dumps({"id": "d1", "sections": []})
        path.write_text(line + "\n" + line + "\n", encoding="utf-8")
        with pytest.raises(DuplicateId):
            load_document_collection(path)

    def test_section_order_preserved(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        obj = {
            "id": "d1",
            "sections": [
                {"id": "title", "text": "T"},
                {"id": "abstract", "text": "A"},
            ],
        }
        path.write_text(json.dumps(obj) + "\n", encoding="utf-8")
        doc = load_document_collection(path)["d1"]
        assert [sid for sid, _ in doc.sections] == ["title", "abstract"]

    def test_duplicate_section_rejected(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        obj = {"id": "d1", "sections": [{"id": "s", "text": "a"}, {"id": "s", "text": "b"}]}
        path.write_text(json.dumps(obj) + "\n", encoding="utf-8")
        with pytest.raises(DuplicateId):
            load_document_collection(path)

    def test_roundtrip(self, tmp_path):
        collection = DocumentCollection(
            [make_doc("d1", ("title", "Hello."), ("body", "Worldünicode."))]
        )
        path = tmp_path / "docs.jsonl"
        save_document_collection(collection, path)
        reloaded = load_document_collection(path)
        assert reloaded.docs == collection.docs


class TestSnippetSpan:
    def test_invalid_offsets_rejected(self):
        with pytest.raises(MalformedInput):
            SnippetSpan("d", "s", 5, 5, "")

    def test_negative_begin_rejected(self):
        with pytest.raises(MalformedInput):
            SnippetSpan("d", "s", -1, 3, "abc")


def feedback_with(qid="q1", doc=None, snippet=None, polarity="relevant"):
    store = FeedbackStore.empty()
    if doc is not None:
        store.add_document(qid, doc, polarity)
    if snippet is not None:
        store.add_snippet(qid, snippet, polarity)
    return store


class TestFilterJudged:
    def test_exclude_all_removes_relevant_too(self):
        store = feedback_with(doc="d2", polarity="relevant")
        assert filter_judged(["d1", "d2", "d3"], store, "q1", EXCLUDE_ALL_JUDGED) == [
            "d1",
            "d3",
        ]

    def test_exclude_irrelevant_keeps_relevant(self):
        store = feedback_with(doc="d2", polarity="relevant")
        result = filter_judged(["d1", "d2", "d3"], store, "q1", EXCLUDE_IRRELEVANT_ONLY)
        assert result == ["d1", "d2", "d3"]

    def test_irrelevant_snippet_removed(self):
        s1 = SnippetSpan("d", "s", 0, 4, "abcd")
        s2 = SnippetSpan("d", "s", 5, 9, "efgh")
        store = feedback_with(snippet=s1, polarity="irrelevant")
        assert filter_judged([s1, s2], store, "q1", EXCLUDE_IRRELEVANT_ONLY) == [s2]

    def test_overlapping_span_is_not_judged(self):
        judged = SnippetSpan("d", "s", 0, 4, "abcd")
        overlapping = SnippetSpan("d", "s", 0, 5, "abcde")
        store = feedback_with(snippet=judged, polarity="irrelevant")
        assert filter_judged([overlapping], store, "q1", EXCLUDE_ALL_JUDGED) == [
            overlapping
        ]

    def test_unknown_question_is_identity(self):
        store = feedback_with(doc="d1", polarity="irrelevant")
        assert filter_judged(["d1"], store, "other", EXCLUDE_ALL_JUDGED) == ["d1"]

    def test_empty_feedback_is_identity(self):
        assert filter_judged(["d1", "d2"], FeedbackStore.empty(), "q1", EXCLUDE_ALL_JUDGED) == [
            "d1",
            "d2",
        ]

    def test_conflicting_polarity_rejected(self):
        store = feedback_with(doc="d1", polarity="relevant")
        with pytest.raises(MalformedInput):
            store.add_document("q1", "d1", "irrelevant")

    def test_repeated_identical_judgment_allowed(self):
        store = feedback_with(doc="d1", polarity="relevant")
        store.add_document("q1", "d1", "relevant")
        assert store.document_polarity("q1", "d1") == "relevant"

    @given(
        st.lists(st.sampled_from(["d1", "d2", "d3", "d4"]), max_size=8, unique=True),
        st.dictionaries(
            st.sampled_from(["d1", "d2", "d3"]),
            st.sampled_from(["relevant", "irrelevant"]),
            max_size=3,
        ),
        st.sampled_from([EXCLUDE_ALL_JUDGED, EXCLUDE_IRRELEVANT_ONLY]),
    )
    def test_idempotent_and_order_preserving(self, candidates, judgments, mode):
        store = FeedbackStore.empty()
        for doc, polarity in judgments.items():
            store.add_document("q1", doc, polarity)
        once = filter_judged(candidates, store, "q1", mode)
        assert filter_judged(once, store, "q1", mode) == once
        # order preserved: survivors appear in their original order
        positions = [candidates.index(d) for d in once]
        assert positions == sorted(positions)


class TestFeedbackFile:
    def test_load_document_and_snippet_items(self, tmp_path):
        payload = [
            {
                "question_id": "q1",
                "items": [
                    {"kind": "document", "ref": "d1", "polarity": "irrelevant"},
                    {
                        "kind": "snippet",
                        "ref": {
                            "document": "d2",
                            "section": "abstract",
                            "offsetInBeginSection": 0,
                            "offsetInEndSection": 4,
                        },
                        "polarity": "relevant",
                    },
                ],
            }
        ]
        path = tmp_path / "feedback.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        store = FeedbackStore.load(path)
        assert store.document_polarity("q1", "d1") == "irrelevant"
        span = SnippetSpan("d2", "abstract", 0, 4, "text ignored")
        assert store.snippet_polarity("q1", span) == "relevant"

    def test_bad_polarity_rejected(self, tmp_path):
        payload = [
            {
                "question_id": "q1",
                "items": [{"kind": "document", "ref": "d1", "polarity": "maybe"}],
            }
        ]
        path = tmp_path / "feedback.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        with pytest.raises(MalformedInput):
            FeedbackStore.load(path)
