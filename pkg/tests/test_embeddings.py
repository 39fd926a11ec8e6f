import numpy as np
import pytest

from relata.embeddings import (
    EmbeddingTable,
    Vocabulary,
    load_any,
    load_table,
    load_text_vectors,
    lookup,
    save_table,
)
from relata.errors import FormatError, OOVError


def _write(tmp_path, text, name="vec.txt"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_minimal_text_file(tmp_path):
    t = load_text_vectors(_write(tmp_path, "a 1.0 0.0\nb 0.0 1.0"))
    assert len(t) == 2 and t.dim == 2
    assert np.array_equal(t.row("b"), [0.0, 1.0])


def test_inconsistent_dimension_reports_line(tmp_path):
    with pytest.raises(FormatError, match=r":2:"):
        load_text_vectors(_write(tmp_path, "a 1 2 3\nb 1 2\n"))


def test_expected_dimension_enforced(tmp_path):
    with pytest.raises(FormatError, match=r":1:"):
        load_text_vectors(_write(tmp_path, "a 1 2 3\n"), expected_dim=2)


def test_unreadable_number(tmp_path):
    with pytest.raises(FormatError, match=r":1: unreadable"):
        load_text_vectors(_write(tmp_path, "a 1 x\n"))


def test_duplicate_token_first_wins(tmp_path):
    t = load_text_vectors(_write(tmp_path, "a 1 1\nb 2 2\na 3 3\n"))
    assert len(t) == 2
    assert t.duplicates == 1
    assert np.array_equal(t.row("a"), [1, 1])


def test_lookup_is_exact_and_case_sensitive():
    t = EmbeddingTable(Vocabulary(["dog", "cat"]), np.eye(2))
    assert np.array_equal(lookup(t, "dog"), [1, 0])
    assert lookup(t, "bird") is None
    assert lookup(t, "Dog") is None
    for w in t.vocab:
        assert np.array_equal(t.lookup(w), t.matrix[t.vocab.index(w)])


def test_vocabulary_is_dense_bijection():
    v = Vocabulary(["x", "y", "x", "z"])
    assert len(v) == 3
    assert [v.index(w) for w in v] == [0, 1, 2]
    assert [v.word(i) for i in range(3)] == ["x", "y", "z"]
    with pytest.raises(OOVError):
        v.index("missing")


def test_matrix_must_match_vocabulary():
    with pytest.raises(FormatError):
        EmbeddingTable(Vocabulary(["a"]), np.zeros((2, 3)))


def _random_table(seed=0, n=7, d=5):
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(n - 1)] + ["ünï"]
    return EmbeddingTable(Vocabulary(words), rng.normal(size=(n, d)).astype(np.float32))


def test_binary_round_trip_is_bit_exact(tmp_path):
    t = _random_table()
    save_table(t, tmp_path / "t.bin")
    back = load_table(tmp_path / "t.bin")
    assert back.vocab == t.vocab
    assert back.matrix.tobytes() == t.matrix.tobytes()
    assert back.trainable == t.trainable


def test_round_trip_after_training_update(tmp_path):
    t = _random_table(1)
    t.matrix[2] += np.float32(0.125)
    t.matrix[0, 1] = np.nextafter(np.float32(1), np.float32(2))
    save_table(t, tmp_path / "t.bin")
    assert load_table(tmp_path / "t.bin").matrix.tobytes() == t.matrix.tobytes()


def test_truncated_binary_is_format_error(tmp_path):
    save_table(_random_table(), tmp_path / "t.bin")
    data = (tmp_path / "t.bin").read_bytes()
    for cut in (5, 20, len(data) - 1):
        (tmp_path / "cut.bin").write_bytes(data[:cut])
        with pytest.raises(FormatError):
            load_table(tmp_path / "cut.bin")


def test_version_mismatch_is_format_error(tmp_path):
    save_table(_random_table(), tmp_path / "t.bin")
    data = bytearray((tmp_path / "t.bin").read_bytes())
    data[len(b"RELATA-EMB")] = 99
    (tmp_path / "v.bin").write_bytes(bytes(data))
    with pytest.raises(FormatError, match="version"):
        load_table(tmp_path / "v.bin")


def test_load_any_sniffs_format(tmp_path):
    t = _random_table()
    save_table(t, tmp_path / "t.bin")
    assert load_any(tmp_path / "t.bin").vocab == t.vocab
    assert len(load_any(_write(tmp_path, "a 1 2\n"))) == 1


def test_with_words_appends_fill_rows():
    t = _random_table(n=3, d=2)
    ext = t.with_words(["w0", "new"])
    assert len(ext) == 4
    assert np.array_equal(ext.row("new"), [0, 0])
    assert np.array_equal(ext.row("w1"), t.row("w1"))
