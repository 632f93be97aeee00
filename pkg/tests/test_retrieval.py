"""BM25, normalization, interpolation, and binary snapshot tests."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qfs.corpus import DocumentCollection
from qfs.errors import (
    DimensionMismatch,
    EmptyCollection,
    EmptyList,
    LambdaOutOfRange,
    MalformedInput,
)
from qfs.retrieval import (
    DenseStore,
    bm25_search,
    build_index,
    interpolate,
    load_dense_store,
    load_index,
    minmax_normalize,
    nir_search,
    rerank_top,
    save_dense_store,
    save_index,
)

from conftest import make_doc, random_unit_vectors


def collection_of(*texts: str) -> DocumentCollection:
    return DocumentCollection(
        [make_doc(f"d{i}", ("body", text)) for i, text in enumerate(texts, 1)]
    )


class TestBuildIndex:
    def test_postings_and_avgdl(self):
        index = build_index(collection_of("a b a"))
        assert index.postings["a"] == [("d1", 2)]
        assert index.postings["b"] == [("d1", 1)]
        assert index.avgdl == 3.0

    def test_avgdl_is_mean(self):
        index = build_index(collection_of("a b", "a b c d"))
        assert index.avgdl == 3.0

    def test_stopwords_absent_from_postings(self):
        index = build_index(collection_of("the cat sat"), stopwords=frozenset({"the"}))
        assert "the" not in index.postings
        assert index.doc_len["d1"] == 2

    def test_sections_concatenated(self):
        doc = make_doc("d1", ("title", "alpha beta"), ("abstract", "beta gamma"))
        index = build_index(DocumentCollection([doc]))
        assert index.postings["beta"] == [("d1", 2)]
        assert index.doc_len["d1"] == 4

    def test_empty_collection_rejected(self):
        with pytest.raises(EmptyCollection):
            build_index(DocumentCollection([]))


class TestBm25Search:
    def test_hand_computed_score(self):
        # N=2, df=1, tf=1, |d| = avgdl, k1=1.2, b=0.75:
        # idf = ln(1 + (2-1+0.5)/(1+0.5)) = ln 2; tf part = 2.2/2.2 = 1
        index = build_index(collection_of("apple banana", "cherry durian"))
        ranked = bm25_search(index, ["apple"], k=5)
        assert ranked == [("d1", pytest.approx(math.log(2.0), abs=1e-6))]

    def test_absent_term_contributes_zero(self):
        index = build_index(collection_of("apple banana", "cherry durian"))
        ranked = bm25_search(index, ["apple", "zzz"], k=5)
        assert ranked[0][1] == pytest.approx(math.log(2.0), abs=1e-6)

    def test_tie_broken_by_ascending_doc_id(self):
        index = build_index(collection_of("same text", "same text"))
        ranked = bm25_search(index, ["same"], k=5)
        assert [d for d, _ in ranked] == ["d1", "d2"]
        assert ranked[0][1] == pytest.approx(ranked[1][1])

    def test_empty_query_gives_empty_list(self):
        index = build_index(collection_of("a"))
        assert bm25_search(index, [], k=3) == []

    def test_scores_non_negative_and_k_respected(self):
        index = build_index(collection_of("a b", "a c", "a d", "b c"))
        ranked = bm25_search(index, ["a", "b"], k=2)
        assert len(ranked) == 2
        assert all(score >= 0.0 for _, score in ranked)

    def test_repeated_query_term_counts_once(self):
        index = build_index(collection_of("apple banana", "cherry durian"))
        once = bm25_search(index, ["apple"], k=5)
        twice = bm25_search(index, ["apple", "apple"], k=5)
        assert once == twice


class TestMinmaxNormalize:
    def test_basic(self):
        assert minmax_normalize([2, 4, 6]) == [0.0, 0.5, 1.0]

    def test_all_equal_maps_to_ones(self):
        assert minmax_normalize([5, 5]) == [1.0, 1.0]

    def test_unit_interval_fixed(self):
        assert minmax_normalize([0, 1]) == [0.0, 1.0]

    def test_empty_rejected(self):
        with pytest.raises(EmptyList):
            minmax_normalize([])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20))
    def test_bounds(self, scores):
        normed = minmax_normalize(scores)
        assert all(0.0 <= x <= 1.0 for x in normed)


class TestInterpolate:
    def test_midpoint(self):
        assert interpolate(1.0, 0.0, 0.5) == pytest.approx(0.5)

    def test_lambda_one_returns_bm25(self):
        assert interpolate(0.73, 0.2, 1.0) == pytest.approx(0.73)

    def test_lambda_zero_returns_dense(self):
        assert interpolate(0.73, 0.2, 0.0) == pytest.approx(0.2)

    def test_out_of_range_rejected(self):
        with pytest.raises(LambdaOutOfRange):
            interpolate(0.5, 0.5, 1.5)

    @given(
        st.floats(0, 1), st.floats(0, 1), st.floats(0, 1),
        st.floats(0, 1), st.floats(0, 1),
    )
    def test_monotone_in_each_argument(self, b1, b2, d1, d2, lam):
        lo_b, hi_b = sorted([b1, b2])
        lo_d, hi_d = sorted([d1, d2])
        assert interpolate(lo_b, lo_d, lam) <= interpolate(hi_b, lo_d, lam) + 1e-12
        assert interpolate(lo_b, lo_d, lam) <= interpolate(lo_b, hi_d, lam) + 1e-12


def hybrid_fixture(n_docs=6, dim=4, seed=3):
    """A corpus where every document matches the query with distinct scores."""
    texts = []
    for i in range(n_docs):
        # "shared" appears i+1 times next to unique filler, so BM25 varies
        texts.append(" ".join(["shared"] * (i + 1) + [f"unique{i} filler{i}"]))
    collection = collection_of(*texts)
    index = build_index(collection)
    rng = np.random.default_rng(seed)
    dense = DenseStore.from_vectors(
        random_unit_vectors(rng, [d.id for d in collection], dim)
    )
    q = rng.uniform(0.1, 1.0, size=dim)
    q_vec = q / np.linalg.norm(q)
    return index, dense, ["shared"], q_vec


class TestNirSearch:
    def test_lambda_one_matches_bm25_argsort(self):
        index, dense, query, q_vec = hybrid_fixture()
        pure = [d for d, _ in bm25_search(index, query, k=6)]
        hybrid = [d for d, _ in nir_search(index, dense, query, q_vec, k=6, lam=1.0)]
        assert hybrid == pure

    def test_lambda_zero_matches_cosine_argsort(self):
        index, dense, query, q_vec = hybrid_fixture()
        by_cos = sorted(
            dense.vectors, key=lambda d: (-dense.cosine(d, q_vec), d)
        )
        hybrid = [d for d, _ in nir_search(index, dense, query, q_vec, k=6, lam=0.0)]
        assert hybrid == by_cos

    def test_midpoint_on_two_doc_disagreement(self):
        # BM25 prefers d1 (more query term hits); cosine prefers d2.
        collection = collection_of("shared shared shared pad", "shared pad pad pad")
        index = build_index(collection)
        dense = DenseStore.from_vectors(
            {"d1": np.array([1.0, 0.0]), "d2": np.array([0.0, 1.0])}
        )
        q_vec = np.array([0.0, 1.0])
        ranked = nir_search(index, dense, ["shared"], q_vec, k=2, lam=0.5)
        # hand computation: bm25_norm d1=1, d2=0; cos d1=0, d2=1
        # both get 0.5 -> tie broken by ascending id
        assert [d for d, _ in ranked] == ["d1", "d2"]
        assert ranked[0][1] == pytest.approx(0.5)
        # tipping lambda slightly toward dense flips the order
        ranked = nir_search(index, dense, ["shared"], q_vec, k=2, lam=0.4)
        assert [d for d, _ in ranked] == ["d2", "d1"]

    def test_dimension_mismatch_rejected(self):
        index, dense, query, _ = hybrid_fixture(dim=4)
        with pytest.raises(DimensionMismatch):
            nir_search(index, dense, query, np.ones(3), k=2, lam=0.5)


class TestRerankTop:
    def test_pool_confines_output(self):
        index, dense, query, q_vec = hybrid_fixture(n_docs=8)
        pool = {d for d, _ in bm25_search(index, query, k=3)}
        ranked = rerank_top(index, dense, query, q_vec, k=3, lam=0.0, pool_size=3)
        assert {d for d, _ in ranked} <= pool

    def test_lambda_one_equals_bm25_top_k(self):
        index, dense, query, q_vec = hybrid_fixture(n_docs=8)
        expected = [d for d, _ in bm25_search(index, query, k=4)]
        ranked = rerank_top(index, dense, query, q_vec, k=4, lam=1.0, pool_size=6)
        assert [d for d, _ in ranked] == expected

    def test_pool_smaller_than_k_rejected(self):
        index, dense, query, q_vec = hybrid_fixture()
        with pytest.raises(ValueError):
            rerank_top(index, dense, query, q_vec, k=5, lam=0.5, pool_size=3)


class TestDenseStoreIO:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(11)
        store = DenseStore.from_vectors(random_unit_vectors(rng, ["a", "b"], 3))
        path = tmp_path / "v.dvec"
        save_dense_store(store, path)
        loaded = load_dense_store(path)
        assert loaded.dim == 3 and len(loaded) == 2
        for doc_id, vec in store.vectors.items():
            assert np.array_equal(loaded.vectors[doc_id], vec)

    def test_zero_vector_rejected(self, tmp_path):
        import struct

        path = tmp_path / "z.dvec"
        with open(path, "wb") as fh:
            fh.write(b"DVEC")
            fh.write(struct.pack("<II", 1, 2))
            fh.write(struct.pack("<I", 1) + b"a")
            fh.write(np.zeros(2, dtype="<f4").tobytes())
        with pytest.raises(MalformedInput):
            load_dense_store(path)

    def test_truncated_record_rejected(self, tmp_path):
        import struct

        path = tmp_path / "t.dvec"
        with open(path, "wb") as fh:
            fh.write(b"DVEC")
            fh.write(struct.pack("<II", 1, 4))
            fh.write(struct.pack("<I", 1) + b"a")
            fh.write(np.ones(3, dtype="<f4").tobytes())  # one float short
        with pytest.raises(MalformedInput) as err:
            load_dense_store(path)
        assert "byte offset" in str(err.value)

    def test_loader_renormalizes(self, tmp_path):
        import struct

        path = tmp_path / "n.dvec"
        with open(path, "wb") as fh:
            fh.write(b"DVEC")
            fh.write(struct.pack("<II", 1, 2))
            fh.write(struct.pack("<I", 1) + b"a")
            fh.write(np.array([3.0, 4.0], dtype="<f4").tobytes())
        store = load_dense_store(path)
        assert np.linalg.norm(store.vectors["a"]) == pytest.approx(1.0, abs=1e-6)


class TestIndexSnapshot:
    def test_roundtrip_preserves_search(self, tmp_path):
        index = build_index(collection_of("a b a", "b c", "c d a"))
        path = tmp_path / "idx.qidx"
        save_index(index, path)
        loaded = load_index(path)
        assert loaded.n_docs == index.n_docs
        assert loaded.avgdl == pytest.approx(index.avgdl)
        assert bm25_search(loaded, ["a", "c"], k=3) == bm25_search(index, ["a", "c"], k=3)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.qidx"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(MalformedInput):
            load_index(path)
