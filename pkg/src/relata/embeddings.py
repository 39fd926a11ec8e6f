"""Pretrained word vectors: text loader, vocabulary, binary round trip."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from relata._binio import Reader, Writer
from relata.errors import FormatError, OOVError

log = logging.getLogger(__name__)

EMB_MAGIC = b"RELATA-EMB"
EMB_VERSION = 1


class Vocabulary:
    """Bijection between words and dense indices ``0..len-1``."""

    def __init__(self, words=()):
        self._index: dict[str, int] = {}
        self._words: list[str] = []
        for w in words:
            self.add(w)

    def add(self, word: str) -> int:
        idx = self._index.get(word)
        if idx is None:
            idx = self._index[word] = len(self._words)
            self._words.append(word)
        return idx

    def index(self, word: str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise OOVError(word) from None

    def get(self, word: str, default=None):
        return self._index.get(word, default)

    def word(self, idx: int) -> str:
        return self._words[idx]

    @property
    def words(self) -> list[str]:
        return list(self._words)

    def __contains__(self, word) -> bool:
        return word in self._index

    def __len__(self) -> int:
        return len(self._words)

    def __iter__(self):
        return iter(self._words)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._words == other._words


@dataclass
class EmbeddingTable:
    vocab: Vocabulary
    matrix: np.ndarray
    trainable: bool = True
    duplicates: int = field(default=0, compare=False)

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.float32)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.vocab):
            raise FormatError(
                f"embedding matrix shape {self.matrix.shape} does not match "
                f"vocabulary of {len(self.vocab)} words"
            )

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, word) -> bool:
        return word in self.vocab

    def lookup(self, word: str) -> np.ndarray | None:
        """Row for ``word`` or ``None``; case-sensitive, no fallback vector."""
        idx = self.vocab.get(word)
        return None if idx is None else self.matrix[idx]

    def row(self, word: str) -> np.ndarray:
        return self.matrix[self.vocab.index(word)]

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(Vocabulary(self.vocab.words), self.matrix.copy(), self.trainable)

    def with_words(self, extra, fill=0.0) -> "EmbeddingTable":
        """Copy of the table extended by rows for any ``extra`` words it lacks."""
        vocab = Vocabulary(self.vocab.words)
        new = [w for w in extra if vocab.add(w) >= len(self.vocab)]
        rows = np.full((len(new), self.dim), fill, dtype=np.float32)
        return EmbeddingTable(vocab, np.vstack([self.matrix, rows]), self.trainable)


def lookup(table: EmbeddingTable, word: str) -> np.ndarray | None:
    return table.lookup(word)


def load_text_vectors(path, expected_dim: int | None = None) -> EmbeddingTable:
    """Parse ``token v1 ... vd`` lines; the first occurrence of a token wins."""
    path = Path(path)
    vocab = Vocabulary()
    rows: list[np.ndarray] = []
    dim = expected_dim
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            if len(values) != dim or dim == 0:
                raise FormatError(
                    f"{path}:{lineno}: expected {dim} values, found {len(values)}"
                )
            try:
                vec = np.array([float(v) for v in values], dtype=np.float32)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: unreadable number ({exc})") from None
            if not np.all(np.isfinite(vec)):
                raise FormatError(f"{path}:{lineno}: non-finite value")
            if token in vocab:
                duplicates += 1
                continue
            vocab.add(token)
            rows.append(vec)
    if not rows:
        raise FormatError(f"{path}: no vectors found")
    if duplicates:
        log.warning("%s: %d duplicate tokens ignored (first occurrence kept)", path, duplicates)
    table = EmbeddingTable(vocab, np.vstack(rows))
    table.duplicates = duplicates
    return table


def write_table(w: Writer, table: EmbeddingTable) -> None:
    w.raw(EMB_MAGIC)
    w.u32(EMB_VERSION)
    w.u32(len(table))
    w.u32(table.dim)
    w.u32(int(table.trainable))
    for word in table.vocab:
        w.text(word)
    w.floats(table.matrix)


def read_table(r: Reader) -> EmbeddingTable:
    r.magic(EMB_MAGIC, EMB_VERSION)
    n, dim, trainable = r.u32(), r.u32(), r.u32()
    words = [r.text() for _ in range(n)]
    vocab = Vocabulary(words)
    if len(vocab) != n:
        raise FormatError(f"{r.source}: duplicate words in vocabulary block")
    matrix = r.floats(n * dim).reshape(n, dim)
    return EmbeddingTable(vocab, matrix, bool(trainable))


def save_table(table: EmbeddingTable, path) -> None:
    buf = io.BytesIO()
    write_table(Writer(buf), table)
    Path(path).write_bytes(buf.getvalue())


def load_table(path) -> EmbeddingTable:
    r = Reader(Path(path).read_bytes(), str(path))
    table = read_table(r)
    r.finish()
    return table


def load_any(path, expected_dim: int | None = None) -> EmbeddingTable:
    """Load a binary table or a text vector file, sniffing the magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(len(EMB_MAGIC))
    if head == EMB_MAGIC:
        table = load_table(path)
        if expected_dim is not None and table.dim != expected_dim:
            raise FormatError(f"{path}: dimension {table.dim}, expected {expected_dim}")
        return table
    return load_text_vectors(path, expected_dim)
