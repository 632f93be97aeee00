"""Word-vector loading and CEMB interchange round-trips."""

from __future__ import annotations

import struct

import numpy as np
import pytest

from qfs.embeddings import (
    ContextEmbeddingRecord,
    embed_tokens,
    load_context_embeddings,
    load_word_embeddings,
    random_oov_vector,
    read_context_embeddings,
    write_context_embeddings,
)
from qfs.errors import DimensionMismatch, MalformedInput, MaskAllFalse


def write_vectors(tmp_path, text, name="vectors.txt"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadWordEmbeddings:
    def test_basic_load(self, tmp_path):
        path = write_vectors(tmp_path, "2 3\ncat 1 2 3\ndog 4 5 6\n")
        table = load_word_embeddings(path)
        assert len(table) == 2 and table.dim == 3
        assert np.array_equal(table.lookup("cat"), [1.0, 2.0, 3.0])

    def test_short_line_rejected(self, tmp_path):
        path = write_vectors(tmp_path, "1 3\ncat 1 2\n")
        with pytest.raises(DimensionMismatch):
            load_word_embeddings(path)

    def test_duplicate_word_last_wins(self, tmp_path, caplog):
        path = write_vectors(tmp_path, "1 2\ncat 1 1\ncat 9 9\n")
        with caplog.at_level("WARNING"):
            table = load_word_embeddings(path)
        assert np.array_equal(table.lookup("cat"), [9.0, 9.0])
        assert any("duplicate" in r.message for r in caplog.records)

    def test_count_mismatch_rejected(self, tmp_path):
        path = write_vectors(tmp_path, "3 2\ncat 1 1\n")
        with pytest.raises(MalformedInput):
            load_word_embeddings(path)

    def test_bad_header_rejected(self, tmp_path):
        path = write_vectors(tmp_path, "hello\n")
        with pytest.raises(MalformedInput):
            load_word_embeddings(path)

    def test_custom_oov_vector(self, tmp_path):
        path = write_vectors(tmp_path, "1 2\ncat 1 1\n")
        table = load_word_embeddings(path, oov_vector=random_oov_vector(2, seed=1))
        assert table.lookup("unseen").shape == (2,)
        assert not np.array_equal(table.lookup("unseen"), np.zeros(2))


class TestEmbedTokens:
    def test_clip_length(self, tmp_path):
        path = write_vectors(tmp_path, "1 2\nw 1 1\n")
        table = load_word_embeddings(path)
        matrix = embed_tokens(table, ["w"] * 350, clip_len=300)
        assert matrix.shape == (300, 2)

    def test_oov_rows_share_vector(self, tmp_path):
        path = write_vectors(tmp_path, "1 2\nw 1 1\n")
        table = load_word_embeddings(path)
        matrix = embed_tokens(table, ["x", "y"], clip_len=10)
        assert np.array_equal(matrix[0], matrix[1])
        assert np.array_equal(matrix[0], table.oov_vector)

    def test_empty_tokens(self, tmp_path):
        path = write_vectors(tmp_path, "1 2\nw 1 1\n")
        table = load_word_embeddings(path)
        assert embed_tokens(table, [], clip_len=5).shape == (0, 2)

    def test_rows_match_lookups(self, tmp_path):
        path = write_vectors(tmp_path, "2 2\na 1 2\nb 3 4\n")
        table = load_word_embeddings(path)
        matrix = embed_tokens(table, ["b", "a"], clip_len=5)
        assert np.array_equal(matrix[0], table.lookup("b"))
        assert np.array_equal(matrix[1], table.lookup("a"))


def random_record(rng: np.random.Generator, pair_id: str, dim: int) -> ContextEmbeddingRecord:
    n = int(rng.integers(1, 7))
    mask = rng.random(n) < 0.5
    if not mask.any():
        mask[int(rng.integers(0, n))] = True
    return ContextEmbeddingRecord(
        pair_id=pair_id,
        tokens=rng.normal(size=(n, dim)).astype(np.float32),
        sentence_mask=mask,
    )


class TestCembRoundTrip:
    def test_single_record(self, tmp_path):
        rng = np.random.default_rng(0)
        rec = ContextEmbeddingRecord(
            pair_id="q1#0",
            tokens=rng.normal(size=(4, 8)).astype(np.float32),
            sentence_mask=np.array([True, False, True, True]),
        )
        path = tmp_path / "one.cemb"
        assert write_context_embeddings(path, [rec]) == 1
        loaded = list(read_context_embeddings(path))
        assert loaded == [rec]

    def test_three_records_bit_exact(self, tmp_path):
        rng = np.random.default_rng(5)
        records = [random_record(rng, f"q#{i}", 6) for i in range(3)]
        path = tmp_path / "three.cemb"
        assert write_context_embeddings(path, records) == 3
        assert list(read_context_embeddings(path)) == records

    def test_empty_file_roundtrip(self, tmp_path):
        path = tmp_path / "empty.cemb"
        assert write_context_embeddings(path, []) == 0
        assert list(read_context_embeddings(path)) == []

    def test_mixed_dims_rejected(self, tmp_path):
        rng = np.random.default_rng(1)
        records = [random_record(rng, "a#0", 4), random_record(rng, "a#1", 5)]
        with pytest.raises(DimensionMismatch):
            write_context_embeddings(tmp_path / "bad.cemb", records)

    def test_all_false_mask_rejected_on_read(self, tmp_path):
        # build the record bytes by hand; the constructor would refuse it
        path = tmp_path / "mask.cemb"
        with open(path, "wb") as fh:
            fh.write(b"CEMB")
            fh.write(struct.pack("<II", 1, 2))
            fh.write(struct.pack("<I", 3) + b"x#0")
            fh.write(struct.pack("<I", 2))
            fh.write(b"\x00")  # 2-token mask, no bits set
            fh.write(np.zeros((2, 2), dtype="<f4").tobytes())
        with pytest.raises(MaskAllFalse):
            list(read_context_embeddings(path))

    def test_truncated_record_names_offset(self, tmp_path):
        rng = np.random.default_rng(2)
        path = tmp_path / "trunc.cemb"
        write_context_embeddings(path, [random_record(rng, "q#0", 4)])
        data = path.read_bytes()
        path.write_bytes(data[:-3])
        with pytest.raises(MalformedInput) as err:
            list(read_context_embeddings(path))
        assert "byte offset" in str(err.value)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.cemb"
        path.write_bytes(b"XEMB" + b"\x00" * 8)
        with pytest.raises(MalformedInput):
            list(read_context_embeddings(path))

    def test_load_as_mapping(self, tmp_path):
        rng = np.random.default_rng(3)
        records = [random_record(rng, f"q1#{i}", 3) for i in range(4)]
        path = tmp_path / "map.cemb"
        write_context_embeddings(path, records)
        store = load_context_embeddings(path)
        assert set(store) == {f"q1#{i}" for i in range(4)}


class TestRecordValidation:
    def test_mask_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            ContextEmbeddingRecord(
                pair_id="x",
                tokens=np.zeros((3, 2), dtype=np.float32),
                sentence_mask=np.array([True, False]),
            )

    def test_empty_matrix_rejected(self):
        with pytest.raises(MalformedInput):
            ContextEmbeddingRecord(
                pair_id="x",
                tokens=np.zeros((0, 2), dtype=np.float32),
                sentence_mask=np.zeros(0, dtype=bool),
            )

    def test_pooled_is_masked_mean(self):
        rec = ContextEmbeddingRecord(
            pair_id="x",
            tokens=np.array([[1, 3], [3, 5], [100, 100]], dtype=np.float32),
            sentence_mask=np.array([True, True, False]),
        )
        assert np.allclose(rec.pooled(), [2.0, 4.0])
