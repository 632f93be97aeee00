"""Command-line entry points for every pipeline stage.

Exit codes: 0 success, 1 partial failure (some questions skipped),
2 data error, 64 usage error. Set QFS_LOG to a logging level name to
control verbosity. All randomness is controlled by --seed flags or the
config seed, so identical inputs give byte-identical outputs.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import corpus, pipeline, retrieval, textproc
from .config import PipelineConfig, emit_config, load_config, parse_config
from .embeddings import load_context_embeddings, load_word_embeddings
from .errors import QfsError
from .metrics import evaluate_run
from .neural import (
    NNC_KIND,
    NNC_TRAIN_DEFAULTS,
    POOLED_KIND,
    POOLED_TRAIN_DEFAULTS,
    TrainConfig,
    load_params,
    save_params,
    train,
)

logger = logging.getLogger("qfs")


def _configure_logging() -> None:
    level_name = os.environ.get("QFS_LOG", "WARNING").upper()
    level = getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@click.group()
def cli() -> None:
    """Query-focused extractive summarisation pipeline."""


@cli.command("index")
@click.option("--docs", "docs_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--stopwords", "stopwords_path", type=click.Path(), default=None)
@click.option("--k1", type=float, default=retrieval.DEFAULT_K1, show_default=True)
@click.option("--b", type=float, default=retrieval.DEFAULT_B, show_default=True)
def cmd_index(docs_path, out_path, stopwords_path, k1, b) -> int:
    """Build and persist an inverted index from a JSONL collection."""
    collection = corpus.load_document_collection(docs_path)
    stopwords = textproc.load_stopwords(stopwords_path) if stopwords_path else None
    index = retrieval.build_index(collection, stopwords, k1=k1, b=b)
    retrieval.save_index(index, out_path)
    click.echo(f"{index.n_docs} documents, {index.vocabulary_size} terms -> {out_path}")
    return 0


def _load_scorer(config: PipelineConfig) -> pipeline.SentenceScorer:
    model = config.model
    if not model.params_path:
        raise QfsError("config.model.params_path is required to score sentences")
    if not model.embeddings_path:
        raise QfsError("config.model.embeddings_path is required to score sentences")
    params = load_params(model.params_path, expected_kind=model.kind)
    if model.kind == NNC_KIND:
        table = load_word_embeddings(model.embeddings_path)
        return pipeline.NncScorer(params, table)  # type: ignore[arg-type]
    records = load_context_embeddings(model.embeddings_path)
    return pipeline.PooledScorer(params, records)  # type: ignore[arg-type]


def _build_resources(
    config: PipelineConfig, feedback_path: str | None, needs_model: bool = True
) -> pipeline.Resources:
    """Load the data files a run needs; the scorer only when asked for."""
    if not config.resources.docs_path:
        raise QfsError("config.resources.docs_path is required")
    collection = corpus.load_document_collection(config.resources.docs_path)
    if config.resources.index_path:
        index = retrieval.load_index(config.resources.index_path)
    else:
        index = retrieval.build_index(
            collection, k1=config.retrieval.bm25_k1, b=config.retrieval.bm25_b
        )
    dense = query_vectors = None
    if config.retrieval.method in ("nir", "rerank"):
        if not config.resources.dense_path or not config.resources.query_vectors_path:
            raise QfsError(
                "nir/rerank retrieval needs resources.dense_path and "
                "resources.query_vectors_path"
            )
        dense = retrieval.load_dense_store(config.resources.dense_path)
        query_vectors = retrieval.load_dense_store(config.resources.query_vectors_path)
    feedback = (
        corpus.FeedbackStore.load(feedback_path)
        if feedback_path
        else corpus.FeedbackStore.empty()
    )
    scorer = _load_scorer(config) if needs_model else pipeline.ConstantScorer()
    return pipeline.Resources(
        collection=collection,
        index=index,
        scorer=scorer,
        dense=dense,
        query_vectors=query_vectors,
        feedback=feedback,
    )


@cli.command("retrieve")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--questions", "questions_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--feedback", "feedback_path", type=click.Path(), default=None)
@click.option("--k", type=int, default=None, help="Override per-round document count.")
def cmd_retrieve(config_path, questions_path, out_path, feedback_path, k) -> int:
    """Rank documents for every question and write the ranked lists."""
    config = load_config(config_path)
    questions = corpus.load_question_set(questions_path)
    resources = _build_resources(config, feedback_path, needs_model=False)
    if k is not None:
        config.retrieval.round_docs = {}
        config.retrieval.round_docs_default = k
    out = []
    for question in questions:
        ranked = pipeline._retrieve(question, config, resources)
        doc_ids = corpus.filter_judged(
            [d for d, _ in ranked],
            resources.feedback,
            question.id,
            corpus.EXCLUDE_ALL_JUDGED,
        )
        scores = dict(ranked)
        out.append(
            {
                "id": question.id,
                "ranked": [{"document": d, "score": scores[d]} for d in doc_ids],
            }
        )
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump({"questions": out}, fh, ensure_ascii=False, indent=1)
    click.echo(f"ranked {len(out)} questions -> {out_path}")
    return 0


@cli.command("snippets")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--questions", "questions_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--feedback", "feedback_path", type=click.Path(), default=None)
def cmd_snippets(config_path, questions_path, out_path, feedback_path) -> int:
    """Retrieve documents, extract snippets, and write them per question."""
    config = load_config(config_path)
    questions = corpus.load_question_set(questions_path)
    needs_model = config.snippets.strategy == "model"
    resources = _build_resources(config, feedback_path, needs_model=needs_model)
    out = []
    for question in questions:
        ranked = pipeline._retrieve(question, config, resources)
        doc_ids = corpus.filter_judged(
            [d for d, _ in ranked],
            resources.feedback,
            question.id,
            corpus.EXCLUDE_ALL_JUDGED,
        )[: config.retrieval.final_doc_cap]
        kept = [(d, s) for d, s in ranked if d in set(doc_ids)]
        if config.snippets.strategy == "cosine":
            spans = pipeline.snip_cosine(
                question, kept, resources.collection, config.snippets.per_doc
            )
        else:
            spans = pipeline.snip_model(
                question,
                kept,
                resources.collection,
                resources.scorer,
                config.snippets.per_doc,
            )
        spans = corpus.filter_judged(
            spans, resources.feedback, question.id, corpus.EXCLUDE_ALL_JUDGED
        )[: config.retrieval.final_snippet_cap]
        out.append(
            {
                "id": question.id,
                "snippets": [
                    {
                        "document": s.doc_id,
                        "section": s.section_id,
                        "offsetInBeginSection": s.begin_char,
                        "offsetInEndSection": s.end_char,
                        "text": s.text,
                    }
                    for s in spans
                ],
            }
        )
    with open(out_path, "w", encoding="utf-8") as fh:
        json.dump({"questions": out}, fh, ensure_ascii=False, indent=1)
    click.echo(f"snippets for {len(out)} questions -> {out_path}")
    return 0


@cli.command("label")
@click.option("--questions", "questions_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--docs", "docs_path", type=click.Path(), default=None)
def cmd_label(questions_path, out_path, docs_path) -> int:
    """Generate binary training labels from gold snippets."""
    questions = corpus.load_question_set(questions_path)
    collection = corpus.load_document_collection(docs_path) if docs_path else None
    examples = pipeline.generate_labels(questions, collection)
    pipeline.save_labels(examples, out_path)
    positives = sum(ex.label for ex in examples)
    click.echo(f"{len(examples)} examples ({positives} positive) -> {out_path}")
    return 0


@cli.command("train")
@click.option("--labels", "labels_path", required=True, type=click.Path())
@click.option("--model", "model_kind", required=True, type=click.Choice([NNC_KIND, POOLED_KIND]))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--embeddings", "embeddings_path", type=click.Path(), default=None,
              help="Word-vector text file (nnc model).")
@click.option("--cemb", "cemb_path", type=click.Path(), default=None,
              help="Context-embedding file (pooled model).")
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--dropout", type=float, default=None)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--clip-len", type=int, default=None)
def cmd_train(labels_path, model_kind, out_path, embeddings_path, cemb_path,
              epochs, batch_size, dropout, lr, seed, clip_len) -> int:
    """Train a sentence classifier on a labels file."""
    defaults = NNC_TRAIN_DEFAULTS if model_kind == NNC_KIND else POOLED_TRAIN_DEFAULTS
    config = TrainConfig(
        epochs=epochs if epochs is not None else defaults.epochs,
        batch_size=batch_size if batch_size is not None else defaults.batch_size,
        dropout_rate=dropout if dropout is not None else defaults.dropout_rate,
        learning_rate=lr,
        seed=seed,
        clip_len=clip_len if clip_len is not None else defaults.clip_len,
    )
    examples = pipeline.load_labels(labels_path)
    if model_kind == NNC_KIND:
        if not embeddings_path:
            raise click.UsageError("--embeddings is required for the nnc model")
        source = load_word_embeddings(embeddings_path)
    else:
        if not cemb_path:
            raise click.UsageError("--cemb is required for the pooled model")
        source = load_context_embeddings(cemb_path)  # type: ignore[assignment]
    result = train(model_kind, examples, source, config)
    save_params(result.params, out_path)
    click.echo(
        f"trained {model_kind} for {config.epochs} epochs; "
        f"final loss {result.loss_history[-1]:.4f} -> {out_path}"
    )
    return 0


@cli.command("answer")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--questions", "questions_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--feedback", "feedback_path", type=click.Path(), default=None)
@click.option("--threads", type=int, default=1, show_default=True)
def cmd_answer(config_path, questions_path, out_path, feedback_path, threads) -> int:
    """Answer every question and write a submission file."""
    config = load_config(config_path)
    questions = corpus.load_question_set(questions_path)
    resources = _build_resources(config, feedback_path)

    def answer_one(question):
        return pipeline.answer_question(question, config, resources)

    results = []
    skipped = 0
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [(q, pool.submit(answer_one, q)) for q in questions]
        for question, future in futures:
            try:
                results.append(future.result())
            except QfsError as exc:
                skipped += 1
                logger.error("skipping question %s: %s", question.id, exc)
    else:
        for question in questions:
            try:
                results.append(answer_one(question))
            except QfsError as exc:
                skipped += 1
                logger.error("skipping question %s: %s", question.id, exc)
    pipeline.save_submission(results, out_path)
    click.echo(
        f"answered {len(results)} questions"
        + (f", skipped {skipped}" if skipped else "")
        + f" -> {out_path}"
    )
    return 1 if skipped else 0


@cli.command("evaluate")
@click.option("--questions", "questions_path", required=True, type=click.Path())
@click.option("--submission", "submission_path", required=True, type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None)
def cmd_evaluate(questions_path, submission_path, out_path) -> int:
    """Score a submission against gold questions."""
    questions = corpus.load_question_set(questions_path)
    answers = pipeline.load_submission(submission_path)
    report = evaluate_run(questions, answers)
    click.echo(report.to_table())
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(report.to_json(), fh, ensure_ascii=False, indent=1)
    return 0


@cli.command("cv")
@click.option("--questions", "questions_path", required=True, type=click.Path())
@click.option("--docs", "docs_path", type=click.Path(), default=None)
@click.option("--model", "model_kind", default="constant", show_default=True,
              type=click.Choice(["constant", "oracle", NNC_KIND, POOLED_KIND]))
@click.option("--embeddings", "embeddings_path", type=click.Path(), default=None)
@click.option("--cemb", "cemb_path", type=click.Path(), default=None)
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--epochs", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--dropout", type=float, default=None)
@click.option("--lr", type=float, default=1e-3, show_default=True)
@click.option("--clip-len", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
def cmd_cv(questions_path, docs_path, model_kind, embeddings_path, cemb_path,
           k, seed, epochs, batch_size, dropout, lr, clip_len, out_path) -> int:
    """k-fold cross-validation reporting mean SU4-F1."""
    questions = corpus.load_question_set(questions_path)
    collection = corpus.load_document_collection(docs_path) if docs_path else None
    if model_kind == "constant":
        spec: pipeline.ModelSpec = pipeline.ConstantModelSpec()
    elif model_kind == "oracle":
        spec = pipeline.OracleModelSpec()
    else:
        defaults = NNC_TRAIN_DEFAULTS if model_kind == NNC_KIND else POOLED_TRAIN_DEFAULTS
        config = TrainConfig(
            epochs=epochs if epochs is not None else defaults.epochs,
            batch_size=batch_size if batch_size is not None else defaults.batch_size,
            dropout_rate=dropout if dropout is not None else defaults.dropout_rate,
            learning_rate=lr,
            seed=seed,
            clip_len=clip_len if clip_len is not None else defaults.clip_len,
        )
        if model_kind == NNC_KIND:
            if not embeddings_path:
                raise click.UsageError("--embeddings is required for the nnc model")
            spec = pipeline.NncModelSpec(load_word_embeddings(embeddings_path), config)
        else:
            if not cemb_path:
                raise click.UsageError("--cemb is required for the pooled model")
            spec = pipeline.PooledModelSpec(load_context_embeddings(cemb_path), config)
    result = pipeline.cross_validate(questions, collection, spec, k=k, seed=seed)
    for i, (size, f1) in enumerate(zip(result.fold_sizes, result.fold_mean_f1), 1):
        click.echo(f"fold {i:2d}: {size:5d} questions  mean SU4-F1 {f1:.4f}")
    click.echo(f"overall mean SU4-F1 {result.mean_f1:.4f}")
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(result.to_json(), fh, ensure_ascii=False, indent=1, sort_keys=True)
    return 0


@cli.group("config")
def cmd_config() -> None:
    """Inspect and validate pipeline configuration files."""


@cmd_config.command("validate")
@click.option("--config", "config_path", required=True, type=click.Path())
def cmd_config_validate(config_path) -> int:
    """Check a config file against the schema."""
    load_config(config_path)
    click.echo(f"{config_path}: valid")
    return 0


@cmd_config.command("emit")
@click.option("--config", "config_path", type=click.Path(), default=None)
def cmd_config_emit(config_path) -> int:
    """Print the normalized config (defaults when no file is given)."""
    config = load_config(config_path) if config_path else PipelineConfig()
    click.echo(json.dumps(emit_config(config), indent=1, sort_keys=True))
    return 0


def main(argv: list[str] | None = None) -> int:
    """Entry point mapping exceptions to the documented exit codes."""
    _configure_logging()
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return 64
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    except QfsError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
