"""End-to-end answering: snippets, labels, answer assembly, cross-validation.

Candidate sentences keep their *occurrence index*, the 0-based position
in the post-retrieval candidate list. Tie-breaking everywhere favors
the earlier occurrence, which keeps every stage deterministic. Answer
candidates get their positions after feedback filtering, i.e. in the
order the scorer actually sees them.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from .corpus import (
    EXCLUDE_ALL_JUDGED,
    EXCLUDE_IRRELEVANT_ONLY,
    DocumentCollection,
    FeedbackStore,
    QuestionRecord,
    QuestionSet,
    SnippetSpan,
    filter_judged,
)
from .embeddings import ContextEmbeddingRecord, EmbeddingTable, embed_tokens
from .errors import (
    EmptyCandidateList,
    NoCandidates,
    NoIdealAnswer,
    ScorerInputMissing,
    TooFewQuestions,
    UnknownDocument,
)
from .metrics import best_reference_f1
from .neural import (
    LabeledExample,
    NncParams,
    PooledClassifierParams,
    TrainConfig,
    nnc_forward,
    pooled_forward,
    position_feature,
    train,
)
from .retrieval import (
    DenseStore,
    InvertedIndex,
    RankedList,
    bm25_search,
    nir_search,
    rerank_top,
)
from .textproc import split_sentences, tfidf_fit, tfidf_vector, token_surfaces, cosine

logger = logging.getLogger(__name__)

# Sentences selected per question type when assembling the ideal answer.
DEFAULT_ANSWER_LENGTHS: dict[str, int] = {
    "summary": 6,
    "factoid": 2,
    "yesno": 2,
    "list": 3,
}

POSITIVE_LABELS_PER_QUESTION = 5
FINAL_DOC_CAP = 10
FINAL_SNIPPET_CAP = 10
SNIPPETS_PER_DOC = 3


@dataclass(frozen=True)
class ScoredSentence:
    """A candidate answer sentence with its model score."""

    text: str
    source: SnippetSpan
    occurrence_index: int
    score: float


@dataclass
class AnswerResult:
    """Final per-question output: capped evidence lists plus the answer."""

    question_id: str
    documents: list[str] = field(default_factory=list)
    snippets: list[SnippetSpan] = field(default_factory=list)
    ideal_answer: str = ""


def submission_to_json(results: Sequence[AnswerResult]) -> dict:
    """Submission-file shape: a questions array with evidence and answer."""
    return {
        "questions": [
            {
                "id": r.question_id,
                "documents": list(r.documents),
                "snippets": [
                    {
                        "document": s.doc_id,
                        "section": s.section_id,
                        "offsetInBeginSection": s.begin_char,
                        "offsetInEndSection": s.end_char,
                        "text": s.text,
                    }
                    for s in r.snippets
                ],
                "ideal_answer": r.ideal_answer,
            }
            for r in results
        ]
    }


def submission_from_json(payload: dict) -> list[AnswerResult]:
    results = []
    for obj in payload.get("questions", []):
        results.append(
            AnswerResult(
                question_id=str(obj["id"]),
                documents=[str(d) for d in obj.get("documents", [])],
                snippets=[
                    SnippetSpan(
                        doc_id=str(s["document"]),
                        section_id=str(s.get("section", "")),
                        begin_char=int(s["offsetInBeginSection"]),
                        end_char=int(s["offsetInEndSection"]),
                        text=str(s.get("text", "")),
                    )
                    for s in obj.get("snippets", [])
                ],
                ideal_answer=str(obj.get("ideal_answer", "")),
            )
        )
    return results


def save_submission(results: Sequence[AnswerResult], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(submission_to_json(results), fh, ensure_ascii=False, indent=1)


def load_submission(path: str | Path) -> list[AnswerResult]:
    with open(path, encoding="utf-8") as fh:
        return submission_from_json(json.load(fh))


def save_labels(examples: Sequence[LabeledExample], path: str | Path) -> None:
    """Write labeled examples as JSONL with raw texts for re-tokenization."""
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(
                json.dumps(
                    {
                        "pair_id": ex.pair_id,
                        "question": ex.question_text,
                        "sentence": ex.sentence_text,
                        "position": ex.position,
                        "label": ex.label,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_labels(path: str | Path) -> list[LabeledExample]:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            examples.append(
                LabeledExample(
                    question_tokens=tuple(token_surfaces(obj["question"])),
                    sentence_tokens=tuple(token_surfaces(obj["sentence"])),
                    position=int(obj["position"]),
                    label=int(obj["label"]),
                    pair_id=obj.get("pair_id"),
                    question_text=obj["question"],
                    sentence_text=obj["sentence"],
                )
            )
    return examples


class SentenceScorer(Protocol):
    """Scores candidate sentences for one question; higher is better."""

    def score_sentences(
        self, question: QuestionRecord, texts: Sequence[str], positions: Sequence[int]
    ) -> list[float]: ...


class ConstantScorer:
    """Scores every sentence 0.5; ties then resolve by occurrence."""

    def score_sentences(
        self, question: QuestionRecord, texts: Sequence[str], positions: Sequence[int]
    ) -> list[float]:
        return [0.5] * len(texts)


class CosineScorer:
    """tf-idf cosine against the question, fitted on the candidate pool."""

    def score_sentences(
        self, question: QuestionRecord, texts: Sequence[str], positions: Sequence[int]
    ) -> list[float]:
        if not texts:
            return []
        token_lists = [token_surfaces(t) for t in texts]
        model = tfidf_fit(token_lists)
        q_vec = tfidf_vector(model, token_surfaces(question.body))
        return [cosine(q_vec, tfidf_vector(model, toks)) for toks in token_lists]


class OracleScorer:
    """Scores a sentence by its true SU4-F1 against the ideal answers.

    An upper-bound scorer for harness comparisons; never used in a
    production run.
    """

    def score_sentences(
        self, question: QuestionRecord, texts: Sequence[str], positions: Sequence[int]
    ) -> list[float]:
        if not question.ideal_answers:
            return [0.0] * len(texts)
        return [best_reference_f1(t, question.ideal_answers) for t in texts]


class NncScorer:
    """Interaction-model probability over static word embeddings."""

    def __init__(self, params: NncParams, table: EmbeddingTable, clip_len: int = 300):
        self.params = params
        self.table = table
        self.clip_len = clip_len

    def score_sentences(
        self, question: QuestionRecord, texts: Sequence[str], positions: Sequence[int]
    ) -> list[float]:
        q_matrix = embed_tokens(
            self.table, token_surfaces(question.body), self.clip_len
        )
        scores = []
        for text, pos in zip(texts, positions):
            s_matrix = embed_tokens(self.table, token_surfaces(text), self.clip_len)
            scores.append(
                nnc_forward(self.params, q_matrix, s_matrix, position_feature(pos))
            )
        return scores


class PooledScorer:
    """Pooled-classifier probability over precomputed context embeddings."""

    def __init__(
        self,
        params: PooledClassifierParams,
        records: Mapping[str, ContextEmbeddingRecord],
    ):
        self.params = params
        self.records = records

    def score_sentences(
        self, question: QuestionRecord, texts: Sequence[str], positions: Sequence[int]
    ) -> list[float]:
        scores = []
        for pos in positions:
            pair_id = f"{question.id}#{pos}"
            record = self.records.get(pair_id)
            if record is None:
                raise ScorerInputMissing(
                    f"no context-embedding record for pair id {pair_id!r}"
                )
            scores.append(
                pooled_forward(self.params, record, position_feature(pos))
            )
        return scores


def document_sentences(doc_id: str, collection: DocumentCollection) -> list[SnippetSpan]:
    """All sentences of a document as snippet spans, in occurrence order."""
    if doc_id not in collection:
        raise UnknownDocument(f"document {doc_id!r} is not in the collection")
    spans = []
    for section_id, text in collection[doc_id].sections:
        for sent in split_sentences(text):
            spans.append(
                SnippetSpan(doc_id, section_id, sent.begin, sent.end, sent.text)
            )
    return spans


def _top_by_occurrence(
    sentences: Sequence[SnippetSpan], scores: Sequence[float], per_doc: int
) -> list[SnippetSpan]:
    """Keep the per_doc best-scoring sentences, emitted in occurrence order."""
    ranked = sorted(range(len(sentences)), key=lambda i: (-scores[i], i))
    kept = sorted(ranked[:per_doc])
    return [sentences[i] for i in kept]


def snip_cosine(
    question: QuestionRecord,
    ranked_docs: RankedList,
    collection: DocumentCollection,
    per_doc: int = SNIPPETS_PER_DOC,
) -> list[SnippetSpan]:
    """Baseline snippet strategy: tf-idf cosine against the question.

    Per document the top ``per_doc`` sentences are re-ordered by
    occurrence; per-document groups are collated in document-relevance
    order. The tf-idf model is fitted on the candidate sentences of all
    ranked documents, so scores are comparable across documents.
    """
    per_doc_sents = {
        doc_id: document_sentences(doc_id, collection) for doc_id, _ in ranked_docs
    }
    all_tokens = [
        token_surfaces(s.text) for sents in per_doc_sents.values() for s in sents
    ]
    if not any(all_tokens):
        return []
    model = tfidf_fit(all_tokens)
    q_vec = tfidf_vector(model, token_surfaces(question.body))
    out: list[SnippetSpan] = []
    for doc_id, _ in ranked_docs:
        sents = per_doc_sents[doc_id]
        scores = [
            cosine(q_vec, tfidf_vector(model, token_surfaces(s.text))) for s in sents
        ]
        out.extend(_top_by_occurrence(sents, scores, per_doc))
    return out


def snip_model(
    question: QuestionRecord,
    ranked_docs: RankedList,
    collection: DocumentCollection,
    scorer: SentenceScorer,
    per_doc: int = SNIPPETS_PER_DOC,
) -> list[SnippetSpan]:
    """Model-scored snippet strategy; same occurrence/collation rules.

    Sentence positions passed to the scorer are per-document ordinals.
    """
    out: list[SnippetSpan] = []
    for doc_id, _ in ranked_docs:
        sents = document_sentences(doc_id, collection)
        if not sents:
            continue
        scores = scorer.score_sentences(
            question, [s.text for s in sents], list(range(len(sents)))
        )
        out.extend(_top_by_occurrence(sents, scores, per_doc))
    return out


def candidate_sentences(question: QuestionRecord) -> list[SnippetSpan]:
    """Sentences of the question's gold snippets, in snippet order.

    Multi-sentence snippets are split; each sentence inherits offsets
    relative to its snippet's section.
    """
    out = []
    for snippet in question.gold_snippets:
        for sent in split_sentences(snippet.text):
            out.append(
                SnippetSpan(
                    snippet.doc_id,
                    snippet.section_id,
                    snippet.begin_char + sent.begin,
                    snippet.begin_char + sent.end,
                    sent.text,
                )
            )
    return out


def generate_labels(
    questions: QuestionSet | Sequence[QuestionRecord],
    collection: DocumentCollection | None = None,
) -> list[LabeledExample]:
    """Binary labels from gold snippets: 1 for the top-5 sentences by SU4-F1.

    Candidates are the sentences of the gold snippets in order; ties at
    the cut-off rank resolve in favor of the earlier occurrence.
    """
    examples: list[LabeledExample] = []
    for question in questions:
        if not question.ideal_answers:
            raise NoIdealAnswer(f"question {question.id!r} has no ideal answers")
        candidates = candidate_sentences(question)
        if not candidates:
            raise NoCandidates(f"question {question.id!r} has no candidate sentences")
        f1s = [
            best_reference_f1(c.text, question.ideal_answers) for c in candidates
        ]
        ranked = sorted(range(len(candidates)), key=lambda i: (-f1s[i], i))
        positive = set(ranked[:POSITIVE_LABELS_PER_QUESTION])
        q_tokens = tuple(token_surfaces(question.body))
        for i, cand in enumerate(candidates):
            examples.append(
                LabeledExample(
                    question_tokens=q_tokens,
                    sentence_tokens=tuple(token_surfaces(cand.text)),
                    position=i,
                    label=1 if i in positive else 0,
                    pair_id=f"{question.id}#{i}",
                    question_text=question.body,
                    sentence_text=cand.text,
                )
            )
    return examples


def assemble_answer(
    qtype: str,
    scored: Sequence[ScoredSentence],
    table: Mapping[str, int] | None = None,
) -> str:
    """Join the top-n sentences for the question type in occurrence order."""
    if not scored:
        raise EmptyCandidateList("cannot assemble an answer from no sentences")
    lengths = DEFAULT_ANSWER_LENGTHS if table is None else table
    n = lengths[qtype]
    selected = sorted(scored, key=lambda s: (-s.score, s.occurrence_index))[:n]
    selected.sort(key=lambda s: s.occurrence_index)
    return " ".join(s.text for s in selected)


@dataclass
class Resources:
    """Read-only inputs shared by every question in a run."""

    collection: DocumentCollection
    index: InvertedIndex
    scorer: SentenceScorer
    dense: DenseStore | None = None
    query_vectors: DenseStore | None = None
    feedback: FeedbackStore = field(default_factory=FeedbackStore.empty)
    snippet_scorer: SentenceScorer | None = None


def _retrieve(question: QuestionRecord, config, resources: Resources) -> RankedList:
    tokens = token_surfaces(question.body)
    k = config.retrieval.docs_for_round(config.round)
    method = config.retrieval.method
    if method == "bm25":
        return bm25_search(resources.index, tokens, k)
    if resources.dense is None or resources.query_vectors is None:
        raise ScorerInputMissing(
            f"retrieval method {method!r} needs dense vectors and query vectors"
        )
    if question.id not in resources.query_vectors:
        raise ScorerInputMissing(f"no query vector for question {question.id!r}")
    q_vec = resources.query_vectors.vectors[question.id]
    if method == "nir":
        return nir_search(
            resources.index, resources.dense, tokens, q_vec, k, config.retrieval.lam
        )
    return rerank_top(
        resources.index,
        resources.dense,
        tokens,
        q_vec,
        k,
        config.retrieval.lam,
        pool_size=max(config.retrieval.pool_size, k),
    )


def answer_question(
    question: QuestionRecord, config, resources: Resources
) -> AnswerResult:
    """Retrieve, snip, filter, score, and assemble one question's answer."""
    ranked = _retrieve(question, config, resources)
    doc_ids = filter_judged(
        [d for d, _ in ranked], resources.feedback, question.id, EXCLUDE_ALL_JUDGED
    )[: config.retrieval.final_doc_cap]
    kept_ranked = [(d, s) for d, s in ranked if d in set(doc_ids)]

    if config.snippets.strategy == "cosine":
        snippets = snip_cosine(
            question, kept_ranked, resources.collection, config.snippets.per_doc
        )
    else:
        snippet_scorer = resources.snippet_scorer or resources.scorer
        snippets = snip_model(
            question,
            kept_ranked,
            resources.collection,
            snippet_scorer,
            config.snippets.per_doc,
        )
    returned_snippets = filter_judged(
        snippets, resources.feedback, question.id, EXCLUDE_ALL_JUDGED
    )[: config.retrieval.final_snippet_cap]

    answer_candidates = filter_judged(
        snippets, resources.feedback, question.id, EXCLUDE_IRRELEVANT_ONLY
    )
    scores = resources.scorer.score_sentences(
        question,
        [c.text for c in answer_candidates],
        list(range(len(answer_candidates))),
    )
    scored = [
        ScoredSentence(text=c.text, source=c, occurrence_index=i, score=s)
        for i, (c, s) in enumerate(zip(answer_candidates, scores))
    ]
    ideal = assemble_answer(question.qtype, scored, config.answer_table)
    return AnswerResult(
        question_id=question.id,
        documents=doc_ids,
        snippets=returned_snippets,
        ideal_answer=ideal,
    )


class ModelSpec(Protocol):
    """Builds a sentence scorer from a training split."""

    def fit(
        self, questions: Sequence[QuestionRecord], collection: DocumentCollection | None
    ) -> SentenceScorer: ...


class ConstantModelSpec:
    def fit(self, questions, collection) -> SentenceScorer:
        return ConstantScorer()


class OracleModelSpec:
    def fit(self, questions, collection) -> SentenceScorer:
        return OracleScorer()


@dataclass
class NncModelSpec:
    table: EmbeddingTable
    config: TrainConfig
    lstm_hidden: int = 100
    dense_hidden: int = 50

    def fit(self, questions, collection) -> SentenceScorer:
        examples = generate_labels(questions, collection)
        result = train(
            "nnc",
            examples,
            self.table,
            self.config,
            lstm_hidden=self.lstm_hidden,
            dense_hidden=self.dense_hidden,
        )
        assert isinstance(result.params, NncParams)
        return NncScorer(result.params, self.table, self.config.clip_len)


@dataclass
class PooledModelSpec:
    records: Mapping[str, ContextEmbeddingRecord]
    config: TrainConfig
    dense_hidden: int = 50

    def fit(self, questions, collection) -> SentenceScorer:
        examples = generate_labels(questions, collection)
        result = train(
            "pooled", examples, self.records, self.config, dense_hidden=self.dense_hidden
        )
        assert isinstance(result.params, PooledClassifierParams)
        return PooledScorer(result.params, self.records)


@dataclass
class CvResult:
    """Cross-validation outcome: per-fold means plus the overall mean."""

    fold_sizes: list[int]
    fold_mean_f1: list[float]
    mean_f1: float
    per_question: dict[str, float]

    def to_json(self) -> dict:
        return {
            "fold_sizes": self.fold_sizes,
            "fold_mean_su4_f1": self.fold_mean_f1,
            "mean_su4_f1": self.mean_f1,
            "per_question": self.per_question,
        }


def cross_validate(
    questions: QuestionSet | Sequence[QuestionRecord],
    collection: DocumentCollection | None,
    model_spec: ModelSpec,
    answer_table: Mapping[str, int] | None = None,
    k: int = 10,
    seed: int = 0,
) -> CvResult:
    """Seeded k-fold protocol over questions with gold snippets.

    Folds partition the shuffled questions with sizes differing by at
    most one. Each fold's questions are answered from their own gold
    snippets by a scorer fitted on the other folds, then scored with
    best-reference SU4-F1 against the ideal answers. The overall mean
    is over all questions (folds may differ in size by one).
    """
    question_list = list(questions)
    if len(question_list) < k:
        raise TooFewQuestions(f"{len(question_list)} questions for {k} folds")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(question_list))
    folds = np.array_split(order, k)

    per_question: dict[str, float] = {}
    fold_means: list[float] = []
    for fold_idx, fold in enumerate(folds):
        held_out = {int(i) for i in fold}
        train_questions = [
            q for i, q in enumerate(question_list) if i not in held_out
        ]
        scorer = model_spec.fit(train_questions, collection)
        fold_scores = []
        for i in sorted(held_out):
            question = question_list[i]
            if not question.ideal_answers:
                raise NoIdealAnswer(f"question {question.id!r} has no ideal answers")
            candidates = candidate_sentences(question)
            if not candidates:
                raise NoCandidates(f"question {question.id!r} has no candidates")
            texts = [c.text for c in candidates]
            positions = list(range(len(candidates)))
            scores = scorer.score_sentences(question, texts, positions)
            scored = [
                ScoredSentence(text=t, source=c, occurrence_index=p, score=s)
                for t, c, p, s in zip(texts, candidates, positions, scores)
            ]
            answer = assemble_answer(question.qtype, scored, answer_table)
            f1 = best_reference_f1(answer, question.ideal_answers)
            per_question[question.id] = f1
            fold_scores.append(f1)
        fold_means.append(sum(fold_scores) / len(fold_scores))
        logger.info("fold %d/%d: mean SU4-F1 %.4f", fold_idx + 1, k, fold_means[-1])
    mean_f1 = sum(per_question.values()) / len(per_question)
    return CvResult(
        fold_sizes=[len(f) for f in folds],
        fold_mean_f1=fold_means,
        mean_f1=mean_f1,
        per_question=per_question,
    )
