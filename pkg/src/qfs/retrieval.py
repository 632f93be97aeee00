"""Inverted-index BM25 search, dense cosine scoring, and interpolation.

Document relevance for hybrid (NIR) search is ``lambda * bm25_norm +
(1 - lambda) * dense_cos`` where BM25 scores are min-max normalized per
query over the candidate pool and dense cosines are clamped at 0 from
below. All ranked output is strictly sorted under (-score, doc_id), so
searches are deterministic.

Binary formats (little-endian):

* DVEC dense vectors: magic ``DVEC``, u32 version=1, u32 dim, then
  records of u32 id-length, UTF-8 id bytes, dim x f32.
* QIDX index snapshot: magic ``QIDX``, u32 version=1, f64 k1, f64 b,
  u32 n_docs, per doc (u32 id-length, id bytes, u32 token count),
  u32 n_terms, per term (u32 term-length, term bytes, u32 df, then
  df x (u32 doc ordinal, u32 tf)).
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Mapping, Sequence

import numpy as np

from .corpus import DocumentCollection
from .errors import (
    DimensionMismatch,
    EmptyCollection,
    EmptyList,
    LambdaOutOfRange,
    MalformedInput,
)
from .textproc import token_surfaces

logger = logging.getLogger(__name__)

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

_DVEC_MAGIC = b"DVEC"
_QIDX_MAGIC = b"QIDX"


@dataclass
class InvertedIndex:
    """Term postings plus the statistics BM25 needs; immutable after build."""

    postings: dict[str, list[tuple[str, int]]]
    doc_len: dict[str, int]
    avgdl: float
    n_docs: int
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B

    @property
    def vocabulary_size(self) -> int:
        return len(self.postings)

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        if df == 0:
            return 0.0
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))


RankedList = list[tuple[str, float]]


def _rank(scores: Mapping[str, float], k: int) -> RankedList:
    ordered = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return ordered[:k]


def build_index(
    docs: DocumentCollection,
    stopwords: frozenset[str] | None = None,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> InvertedIndex:
    """Index a collection, concatenating all sections of each document."""
    if len(docs) == 0:
        raise EmptyCollection("cannot index an empty collection")
    stop = stopwords or frozenset()
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_len: dict[str, int] = {}
    for doc in docs:
        tokens = [
            t
            for _, text in doc.sections
            for t in token_surfaces(text)
            if t not in stop
        ]
        doc_len[doc.id] = len(tokens)
        counts: dict[str, int] = {}
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
        for term, tf in counts.items():
            postings.setdefault(term, []).append((doc.id, tf))
    avgdl = sum(doc_len.values()) / len(doc_len)
    return InvertedIndex(
        postings=postings, doc_len=doc_len, avgdl=avgdl, n_docs=len(docs), k1=k1, b=b
    )


def bm25_scores(index: InvertedIndex, query: Sequence[str]) -> dict[str, float]:
    """Raw BM25 scores for every document matching at least one query term.

    Repeated query terms count once (plain sum over unique terms).
    """
    scores: dict[str, float] = {}
    for term in dict.fromkeys(query):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc_id, tf in plist:
            norm = index.k1 * (1.0 - index.b + index.b * index.doc_len[doc_id] / index.avgdl)
            scores[doc_id] = scores.get(doc_id, 0.0) + idf * tf * (index.k1 + 1.0) / (tf + norm)
    return scores


def bm25_search(index: InvertedIndex, query: Sequence[str], k: int) -> RankedList:
    """Top-k documents by BM25; ties broken by ascending doc id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not query:
        return []
    return _rank(bm25_scores(index, query), k)


def minmax_normalize(scores: Sequence[float]) -> list[float]:
    """Scale scores to [0, 1]; an all-equal list maps to all 1.0."""
    if not scores:
        raise EmptyList("cannot normalize an empty score list")
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return [1.0] * len(scores)
    return [(x - lo) / (hi - lo) for x in scores]


def interpolate(bm25_norm: float, dense_cos: float, lam: float) -> float:
    """lambda-weighted mix of normalized BM25 and dense cosine scores."""
    if not 0.0 <= lam <= 1.0:
        raise LambdaOutOfRange(f"lambda must be in [0, 1], got {lam}")
    return lam * bm25_norm + (1.0 - lam) * dense_cos


class DenseStore:
    """Unit-norm document vectors keyed by doc id."""

    def __init__(self, dim: int, vectors: Mapping[str, np.ndarray]):
        self.dim = dim
        self.vectors: dict[str, np.ndarray] = dict(vectors)

    def __len__(self) -> int:
        return len(self.vectors)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.vectors

    @classmethod
    def from_vectors(cls, raw: Mapping[str, np.ndarray]) -> "DenseStore":
        """Build a store from arbitrary vectors, normalizing to unit length."""
        if not raw:
            raise MalformedInput("dense store needs at least one vector")
        dim = len(next(iter(raw.values())))
        vectors = {}
        for doc_id, vec in raw.items():
            vec = np.asarray(vec, dtype=np.float32)
            if vec.shape != (dim,):
                raise DimensionMismatch(
                    f"vector for {doc_id!r} has shape {vec.shape}, expected ({dim},)"
                )
            vectors[doc_id] = _unit(vec, doc_id)
        return cls(dim=dim, vectors=vectors)

    def cosine(self, doc_id: str, query_vector: np.ndarray) -> float:
        """Cosine against a unit query vector, clamped at 0; missing doc -> 0."""
        vec = self.vectors.get(doc_id)
        if vec is None:
            return 0.0
        return max(0.0, float(np.dot(vec, query_vector)))


def _unit(vec: np.ndarray, doc_id: str) -> np.ndarray:
    norm = float(np.linalg.norm(vec.astype(np.float64)))
    if norm == 0.0 or not math.isfinite(norm):
        raise MalformedInput(f"vector for {doc_id!r} cannot be normalized")
    # Skip renormalization inside the unit-norm tolerance so that
    # save -> load -> save is byte stable.
    if abs(norm - 1.0) <= 1e-6:
        return vec
    return (vec.astype(np.float64) / norm).astype(np.float32)


def _read_exact(fh: BinaryIO, count: int, path: str | Path, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise MalformedInput(
            f"{path}: truncated {what} at byte offset {fh.tell() - len(data)}"
        )
    return data


def load_dense_store(path: str | Path) -> DenseStore:
    """Read a DVEC file; vectors are renormalized to unit norm on load."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _DVEC_MAGIC:
            raise MalformedInput(f"{path}: bad magic {magic!r}, expected DVEC")
        version, dim = struct.unpack("<II", _read_exact(fh, 8, path, "header"))
        if version != 1:
            raise MalformedInput(f"{path}: unsupported DVEC version {version}")
        if dim < 1:
            raise MalformedInput(f"{path}: dimension must be positive")
        vectors: dict[str, np.ndarray] = {}
        while True:
            head = fh.read(4)
            if not head:
                break
            if len(head) != 4:
                raise MalformedInput(
                    f"{path}: truncated record header at byte offset {fh.tell() - len(head)}"
                )
            (id_len,) = struct.unpack("<I", head)
            doc_id = _read_exact(fh, id_len, path, "record id").decode("utf-8")
            payload = _read_exact(fh, 4 * dim, path, f"vector for {doc_id!r}")
            vec = np.frombuffer(payload, dtype="<f4").astype(np.float32)
            if doc_id in vectors:
                logger.warning("duplicate vector id %r; last occurrence wins", doc_id)
            vectors[doc_id] = _unit(vec, doc_id)
    if not vectors:
        raise MalformedInput(f"{path}: DVEC file holds no vectors")
    return DenseStore(dim=dim, vectors=vectors)


def save_dense_store(store: DenseStore, path: str | Path) -> None:
    """Write a DVEC file; round-trip partner of :func:`load_dense_store`."""
    with open(path, "wb") as fh:
        fh.write(_DVEC_MAGIC)
        fh.write(struct.pack("<II", 1, store.dim))
        for doc_id, vec in store.vectors.items():
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(np.asarray(vec, dtype="<f4").tobytes())


def _interpolated(
    index: InvertedIndex,
    dense: DenseStore,
    query_tokens: Sequence[str],
    query_vector: np.ndarray,
    pool: Sequence[str],
    k: int,
    lam: float,
) -> RankedList:
    raw = bm25_scores(index, query_tokens)
    pool_scores = [raw.get(doc_id, 0.0) for doc_id in pool]
    normed = minmax_normalize(pool_scores)
    combined = {
        doc_id: interpolate(bm, dense.cosine(doc_id, query_vector), lam)
        for doc_id, bm in zip(pool, normed)
    }
    return _rank(combined, k)


def _check_query_vector(dense: DenseStore, query_vector: np.ndarray) -> np.ndarray:
    vec = np.asarray(query_vector, dtype=np.float64)
    if vec.shape != (dense.dim,):
        raise DimensionMismatch(
            f"query vector has shape {vec.shape}, store dim is {dense.dim}"
        )
    norm = float(np.linalg.norm(vec))
    if norm == 0.0 or not math.isfinite(norm):
        raise MalformedInput("query vector cannot be normalized")
    return vec / norm


def nir_search(
    index: InvertedIndex,
    dense: DenseStore,
    query_tokens: Sequence[str],
    query_vector: np.ndarray,
    k: int,
    lam: float,
    pool_size: int | None = None,
) -> RankedList:
    """Hybrid search over the whole collection (or a BM25-limited pool).

    With ``pool_size=None`` every indexed document is a candidate; BM25
    scores are min-max normalized over that pool before interpolation.
    """
    vec = _check_query_vector(dense, query_vector)
    if pool_size is None:
        pool = sorted(index.doc_len)
    else:
        pool = [doc_id for doc_id, _ in bm25_search(index, query_tokens, pool_size)]
        if not pool:
            return []
    return _interpolated(index, dense, query_tokens, vec, pool, k, lam)


def rerank_top(
    index: InvertedIndex,
    dense: DenseStore,
    query_tokens: Sequence[str],
    query_vector: np.ndarray,
    k: int,
    lam: float,
    pool_size: int = 200,
) -> RankedList:
    """Re-score only the BM25 top ``pool_size`` documents (default 200)."""
    if pool_size < k:
        raise ValueError(f"pool_size {pool_size} must be >= k {k}")
    return nir_search(index, dense, query_tokens, query_vector, k, lam, pool_size=pool_size)


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Persist an index as a QIDX binary snapshot."""
    doc_ids = list(index.doc_len)
    ordinal = {doc_id: i for i, doc_id in enumerate(doc_ids)}
    with open(path, "wb") as fh:
        fh.write(_QIDX_MAGIC)
        fh.write(struct.pack("<I", 1))
        fh.write(struct.pack("<dd", index.k1, index.b))
        fh.write(struct.pack("<I", len(doc_ids)))
        for doc_id in doc_ids:
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", index.doc_len[doc_id]))
        fh.write(struct.pack("<I", len(index.postings)))
        for term in sorted(index.postings):
            raw = term.encode("utf-8")
            plist = index.postings[term]
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", len(plist)))
            for doc_id, tf in plist:
                fh.write(struct.pack("<II", ordinal[doc_id], tf))


def load_index(path: str | Path) -> InvertedIndex:
    """Read a QIDX snapshot written by :func:`save_index`."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _QIDX_MAGIC:
            raise MalformedInput(f"{path}: bad magic {magic!r}, expected QIDX")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, path, "version"))
        if version != 1:
            raise MalformedInput(f"{path}: unsupported QIDX version {version}")
        k1, b = struct.unpack("<dd", _read_exact(fh, 16, path, "parameters"))
        (n_docs,) = struct.unpack("<I", _read_exact(fh, 4, path, "doc count"))
        if n_docs == 0:
            raise MalformedInput(f"{path}: snapshot holds no documents")
        doc_ids: list[str] = []
        doc_len: dict[str, int] = {}
        for _ in range(n_docs):
            (id_len,) = struct.unpack("<I", _read_exact(fh, 4, path, "doc id length"))
            doc_id = _read_exact(fh, id_len, path, "doc id").decode("utf-8")
            (length,) = struct.unpack("<I", _read_exact(fh, 4, path, "doc length"))
            doc_ids.append(doc_id)
            doc_len[doc_id] = length
        (n_terms,) = struct.unpack("<I", _read_exact(fh, 4, path, "term count"))
        postings: dict[str, list[tuple[str, int]]] = {}
        for _ in range(n_terms):
            (t_len,) = struct.unpack("<I", _read_exact(fh, 4, path, "term length"))
            term = _read_exact(fh, t_len, path, "term").decode("utf-8")
            (df,) = struct.unpack("<I", _read_exact(fh, 4, path, "posting count"))
            plist = []
            for _ in range(df):
                ord_, tf = struct.unpack(
                    "<II", _read_exact(fh, 8, path, f"posting of {term!r}")
                )
                if ord_ >= n_docs:
                    raise MalformedInput(f"{path}: posting references unknown document")
                plist.append((doc_ids[ord_], tf))
            postings[term] = plist
    avgdl = sum(doc_len.values()) / len(doc_len)
    return InvertedIndex(
        postings=postings, doc_len=doc_len, avgdl=avgdl, n_docs=n_docs, k1=k1, b=b
    )
