"""Corpus mining: target pairs, lemmas, and the (left, right, pattern) triple store."""

from __future__ import annotations

import json
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from relata import __version__, kernels
from relata.errors import ArgumentError, FormatError

log = logging.getLogger(__name__)

MIN_PATTERN_LEN = 1
MAX_PATTERN_LEN = 3
CHUNK_LINES = 20000

Pair = tuple[str, str]
Pattern = tuple[str, ...]


def normalize_sentence(line: str) -> list[str]:
    return [t.lower() for t in line.split()]


class LemmaDict:
    """Surface form to lemma lookup; unknown forms map to themselves."""

    def __init__(self, mapping: Mapping[str, str] | None = None):
        self._map: dict[str, str] = {}
        for surface, lemma in (mapping or {}).items():
            self._map[surface.lower()] = lemma.lower()
        for surface, lemma in self._map.items():
            target = self._map.get(lemma, lemma)
            if target != lemma:
                raise FormatError(
                    f"lemma {lemma!r} (of {surface!r}) is not a fixed point: maps to {target!r}"
                )

    @classmethod
    def load(cls, path) -> "LemmaDict":
        mapping: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2 or not parts[0] or not parts[1]:
                    raise FormatError(f"{path}:{lineno}: expected 'surface<TAB>lemma'")
                mapping.setdefault(parts[0].strip(), parts[1].strip())
        return cls(mapping)

    def __call__(self, token: str) -> str:
        return self._map.get(token, token)

    def __len__(self) -> int:
        return len(self._map)

    def items(self):
        return self._map.items()


IDENTITY = LemmaDict()


def lemmatize(token: str, lemmas: LemmaDict | None = None) -> str:
    return (lemmas or IDENTITY)(token)


class TargetPairSet:
    """Ordered target pairs ``(a_i, b_i)`` with order-insensitive membership.

    A pair whose reversal is already present is treated as a duplicate.
    """

    def __init__(self, pairs: Iterable[Pair]):
        self._pairs: list[Pair] = []
        self._index: dict[Pair, tuple[int, bool]] = {}
        for a, b in pairs:
            if a == b:
                raise ArgumentError(f"target pair with identical words: {a}:{b}")
            if (a, b) in self._index:
                continue
            i = len(self._pairs)
            self._pairs.append((a, b))
            self._index[(a, b)] = (i, True)
            self._index[(b, a)] = (i, False)
        if not self._pairs:
            raise ArgumentError("empty target pair set")

    @classmethod
    def load(cls, path, lemmas: LemmaDict | None = None) -> "TargetPairSet":
        """Read one pair per line as ``a:b`` or ``a<TAB>b``."""
        pairs = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                pair = parse_pair(line, f"{path}:{lineno}")
                pairs.append(tuple(lemmatize(t, lemmas) for t in pair))
        if not pairs:
            raise ArgumentError("empty target pair set")
        return cls(pairs)

    def save(self, path) -> None:
        Path(path).write_text("".join(f"{a}:{b}\n" for a, b in self._pairs), encoding="utf-8")

    @property
    def pairs(self) -> list[Pair]:
        return list(self._pairs)

    def locate(self, x: str, y: str) -> tuple[int, bool] | None:
        """``(i, forward)`` if ``(x, y)`` is pair ``i`` or its reversal."""
        return self._index.get((x, y))

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self._index

    def __len__(self) -> int:
        return len(self._pairs)

    def __iter__(self) -> Iterator[Pair]:
        return iter(self._pairs)

    def words(self) -> list[str]:
        return sorted({w for p in self._pairs for w in p})


def parse_pair(text: str, where: str = "") -> Pair:
    if "\t" in text:
        parts = text.split("\t")
    elif ":" in text:
        parts = text.split(":")
    else:
        parts = text.split()
    parts = [p.strip().lower() for p in parts]
    if len(parts) != 2 or not all(parts):
        raise FormatError(f"{where}: cannot parse word pair {text!r}")
    return parts[0], parts[1]


@dataclass(frozen=True, order=True)
class Triple:
    left: str
    right: str
    pattern: Pattern
    count: int = 1


class _Matcher:
    """Integer encoding of the target pairs for the window-scan kernel."""

    def __init__(self, w: TargetPairSet, lemmas: LemmaDict | None):
        self.lemmas = lemmas or IDENTITY
        words = w.words()
        self.ids = {word: i for i, word in enumerate(words)}
        self.base = max(len(words), 1)
        keys = []
        for a, b in w:
            ia, ib = self.ids[a], self.ids[b]
            keys.extend((ia * self.base + ib, ib * self.base + ia))
        self.keys = np.unique(np.asarray(keys, dtype=np.int64))
        self._cache: dict[str, int] = {}

    def token_id(self, token: str) -> int:
        i = self._cache.get(token)
        if i is None:
            i = self._cache[token] = self.ids.get(self.lemmas(token), -1)
        return i

    def scan(self, sentences: Sequence[list[str]], min_len: int, max_len: int):
        ids: list[int] = []
        offsets = [0]
        for toks in sentences:
            ids.extend(self.token_id(t) for t in toks)
            offsets.append(len(ids))
        i, j = kernels.scan_windows(
            np.asarray(ids, dtype=np.int64), np.asarray(offsets, dtype=np.int64),
            self.keys, self.base, min_len, max_len,
        )
        return i, j, offsets


def _check_bounds(min_len: int, max_len: int) -> None:
    if not 1 <= min_len <= max_len:
        raise ArgumentError(f"pattern length bounds must satisfy 1 <= min <= max, got {min_len}, {max_len}")


def _emit(sentences, matcher: _Matcher, min_len, max_len) -> Iterator[tuple[str, str, Pattern]]:
    flat = [t for toks in sentences for t in toks]
    i_arr, j_arr, _ = matcher.scan(sentences, min_len, max_len)
    lem = matcher.lemmas
    for i, j in zip(i_arr.tolist(), j_arr.tolist()):
        yield lem(flat[i]), lem(flat[j]), tuple(flat[i + 1:j])


def extract_triples(tokens: Sequence[str], w: TargetPairSet, lemmas: LemmaDict | None = None,
                    min_len: int = MIN_PATTERN_LEN, max_len: int = MAX_PATTERN_LEN) -> list[Triple]:
    """All pattern windows of one normalized sentence connecting a target pair."""
    _check_bounds(min_len, max_len)
    matcher = _Matcher(w, lemmas)
    return [Triple(l, r, p, 1) for l, r, p in _emit([list(tokens)], matcher, min_len, max_len)]


class TripleStore:
    """Immutable multiset of ``(left, right, pattern)`` co-occurrences."""

    def __init__(self, counts: Mapping[tuple[str, str, Pattern], int] | None = None,
                 n_sentences: int = 0):
        clean = {}
        for key, c in (counts or {}).items():
            if c > 0:
                clean[(key[0], key[1], tuple(key[2]))] = int(c)
        self._counts = MappingProxyType(clean)
        self.n_sentences = n_sentences

    @classmethod
    def from_triples(cls, triples: Iterable[Triple], n_sentences: int = 0) -> "TripleStore":
        counts: Counter = Counter()
        for t in triples:
            counts[(t.left, t.right, tuple(t.pattern))] += t.count
        return cls(counts, n_sentences)

    @property
    def counts(self) -> Mapping[tuple[str, str, Pattern], int]:
        return self._counts

    def triples(self) -> list[Triple]:
        return [Triple(l, r, p, c) for (l, r, p), c in sorted(self._counts.items(), key=_sort_key)]

    def __iter__(self):
        return iter(self.triples())

    def __len__(self) -> int:
        return len(self._counts)

    def __bool__(self) -> bool:
        return bool(self._counts)

    def __eq__(self, other) -> bool:
        return isinstance(other, TripleStore) and dict(self._counts) == dict(other._counts)

    def __add__(self, other: "TripleStore") -> "TripleStore":
        merged = Counter(self._counts)
        merged.update(other._counts)
        return TripleStore(merged, self.n_sentences + other.n_sentences)

    def total(self) -> int:
        return sum(self._counts.values())

    def pattern_counts(self) -> Counter:
        out: Counter = Counter()
        for (_, _, p), c in self._counts.items():
            out[p] += c
        return out

    def pairs(self) -> set[Pair]:
        return {(l, r) for l, r, _ in self._counts}

    def filter(self, keep) -> "TripleStore":
        return TripleStore({k: c for k, c in self._counts.items() if keep(*k)}, self.n_sentences)

    def to_tsv(self, meta: Mapping | None = None) -> str:
        lines = [f"# relata {__version__}\n"]
        if meta is not None:
            lines.append(f"# config {json.dumps(dict(meta), sort_keys=True)}\n")
        for t in self.triples():
            lines.append(f"{t.left}\t{t.right}\t{' '.join(t.pattern)}\t{t.count}\n")
        return "".join(lines)

    def save_tsv(self, path, meta: Mapping | None = None) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_tsv(meta))

    @classmethod
    def load_tsv(cls, path) -> "TripleStore":
        counts: dict = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if line.startswith("# ") or not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 4:
                    raise FormatError(f"{path}:{lineno}: expected 4 tab-separated fields")
                left, right, pattern, count = parts
                try:
                    c = int(count)
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: bad count {count!r}") from None
                toks = tuple(pattern.split(" "))
                if c <= 0 or not left or not right or not all(toks):
                    raise FormatError(f"{path}:{lineno}: malformed triple")
                key = (left, right, toks)
                counts[key] = counts.get(key, 0) + c
        return cls(counts)


def _sort_key(item):
    (l, r, p), _ = item
    return (l, r, " ".join(p))


def _count_chunk(args) -> tuple[Counter, int]:
    lines, w, lemmas, min_len, max_len = args
    matcher = _Matcher(w, lemmas)
    sentences = [normalize_sentence(line) for line in lines]
    return Counter(_emit(sentences, matcher, min_len, max_len)), len(lines)


def _chunks(paths: Sequence, size: int) -> Iterator[list[str]]:
    for path in paths:
        try:
            fh = open(path, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot read corpus file {path}: {exc.strerror}") from exc
        with fh:
            buf: list[str] = []
            for line in fh:
                buf.append(line)
                if len(buf) >= size:
                    yield buf
                    buf = []
            if buf:
                yield buf


def count_lines(lines: Iterable[str], w: TargetPairSet, lemmas: LemmaDict | None = None,
                *, min_len: int = MIN_PATTERN_LEN, max_len: int = MAX_PATTERN_LEN) -> TripleStore:
    """In-memory variant of :func:`build_triple_store` over raw sentence lines."""
    _check_bounds(min_len, max_len)
    counts, n = _count_chunk((list(lines), w, lemmas, min_len, max_len))
    return TripleStore(counts, n)


def build_triple_store(corpus_paths: Sequence, w: TargetPairSet, lemmas: LemmaDict | None = None,
                       *, min_len: int = MIN_PATTERN_LEN, max_len: int = MAX_PATTERN_LEN,
                       workers: int = 1, chunk_lines: int = CHUNK_LINES) -> TripleStore:
    """Count pattern windows over whole corpus files, one sentence per line.

    ``workers > 1`` spreads line chunks over processes; the per-chunk counts
    are summed, so the result does not depend on ``workers`` or ``chunk_lines``.
    """
    _check_bounds(min_len, max_len)
    for p in corpus_paths:
        if not Path(p).is_file():
            raise OSError(f"cannot read corpus file {p}")
    jobs = ((chunk, w, lemmas, min_len, max_len) for chunk in _chunks(corpus_paths, chunk_lines))
    total: Counter = Counter()
    n_sentences = 0
    if workers <= 1:
        results = map(_count_chunk, jobs)
        for counts, n in results:
            total.update(counts)
            n_sentences += n
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for counts, n in pool.map(_count_chunk, jobs):
                total.update(counts)
                n_sentences += n
    log.info("scanned %d sentences, %d triple occurrences", n_sentences, sum(total.values()))
    return TripleStore(total, n_sentences)
