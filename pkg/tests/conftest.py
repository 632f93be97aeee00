"""Shared fixture builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from qfs.corpus import (
    DocumentCollection,
    DocumentRecord,
    QuestionRecord,
    QuestionSet,
    SnippetSpan,
)


def make_doc(doc_id: str, *sections: tuple[str, str]) -> DocumentRecord:
    return DocumentRecord(id=doc_id, sections=tuple(sections))


def make_question(
    qid: str,
    body: str = "what is it",
    qtype: str = "summary",
    gold_documents: tuple[str, ...] = (),
    gold_snippets: tuple[SnippetSpan, ...] = (),
    ideal_answers: tuple[str, ...] = (),
) -> QuestionRecord:
    return QuestionRecord(
        id=qid,
        body=body,
        qtype=qtype,
        gold_documents=gold_documents,
        gold_snippets=gold_snippets,
        ideal_answers=ideal_answers,
    )


def snippet_for(doc: DocumentRecord, section_id: str, begin: int, end: int) -> SnippetSpan:
    text = doc.section_text(section_id)
    assert text is not None
    return SnippetSpan(doc.id, section_id, begin, end, text[begin:end])


@pytest.fixture
def micro_collection() -> DocumentCollection:
    """Three tiny documents with distinct vocabulary."""
    return DocumentCollection(
        [
            make_doc(
                "d1",
                ("title", "Vaccines reduce severe influenza."),
                ("abstract", "Vaccines work well. Influenza spreads in winter. Hand washing helps."),
            ),
            make_doc(
                "d2",
                ("title", "Antibiotics treat bacterial infection."),
                ("abstract", "Antibiotics do not treat viral illness. Resistance is rising."),
            ),
            make_doc(
                "d3",
                ("title", "Sleep improves immunity."),
                ("abstract", "Regular sleep supports the immune system. Adults need seven hours."),
            ),
        ]
    )


def random_unit_vectors(rng: np.random.Generator, ids: list[str], dim: int) -> dict[str, np.ndarray]:
    """Non-negative unit vectors, so cosines stay non-negative."""
    out = {}
    for doc_id in ids:
        v = rng.uniform(0.1, 1.0, size=dim)
        out[doc_id] = (v / np.linalg.norm(v)).astype(np.float32)
    return out
