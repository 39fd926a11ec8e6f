"""Latent relational analysis: wildcard patterns, PPMI pair-pattern matrix, SVD."""

from __future__ import annotations

import io
import itertools
import logging
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from relata import kernels
from relata._binio import Reader, Writer
from relata.core.svd import truncated_svd
from relata.corpus import Pair, Pattern, TargetPairSet, TripleStore
from relata.errors import ArgumentError, DegenerateMatrixError, EmptyFeatureError, FormatError

log = logging.getLogger(__name__)

WILDCARD = "*"
DEFAULT_DIM = 300
DEFAULT_CAP_MULT = 20
LRA_MAGIC = b"RELATA-LRA"
LRA_VERSION = 1


def generalize(pattern: Pattern) -> list[Pattern]:
    """Every variant of ``pattern`` with any subset of positions wildcarded."""
    pattern = tuple(pattern)
    if not 1 <= len(pattern) <= 3:
        raise ArgumentError(f"pattern length {len(pattern)} outside [1, 3]")
    choices = [(tok, WILDCARD) if tok != WILDCARD else (WILDCARD,) for tok in pattern]
    return sorted(set(itertools.product(*choices)))


def pattern_text(p: Pattern) -> str:
    return " ".join(p)


@dataclass
class FeatureSet:
    patterns: list[Pattern]
    index: dict[Pattern, int] = field(init=False)

    def __post_init__(self):
        self.patterns = [tuple(p) for p in self.patterns]
        self.index = {p: i for i, p in enumerate(self.patterns)}
        if len(self.index) != len(self.patterns):
            raise ArgumentError("duplicate patterns in feature set")

    def __len__(self) -> int:
        return len(self.patterns)

    def __contains__(self, p) -> bool:
        return tuple(p) in self.index


def _unordered(a: str, b: str) -> Pair:
    return (a, b) if a <= b else (b, a)


def select_features(store: TripleStore, w: TargetPairSet, cap: int | None = None,
                    cap_mult: int = DEFAULT_CAP_MULT, scoring: str = "pairs") -> FeatureSet:
    """Keep the ``cap`` (default ``cap_mult * |W|``) best generalized patterns.

    ``scoring="pairs"`` ranks a pattern by the number of distinct unordered
    target pairs whose triples generate it; ``"frequency"`` by summed counts.
    Ties go to the lexicographically smaller pattern text.
    """
    if not store:
        raise EmptyFeatureError("empty triple store: no patterns to select")
    if scoring not in ("pairs", "frequency"):
        raise ArgumentError(f"unknown feature scoring {scoring!r}")
    cap = cap_mult * len(w) if cap is None else cap
    if cap < 1:
        raise ArgumentError(f"feature cap must be positive, got {cap}")
    support: dict[Pattern, set] = defaultdict(set)
    freq: dict[Pattern, int] = defaultdict(int)
    for (left, right, p), c in store.counts.items():
        if w.locate(left, right) is None:
            continue
        key = _unordered(left, right)
        for g in generalize(p):
            support[g].add(key)
            freq[g] += c
    if not support:
        raise EmptyFeatureError("no triple in the store matches the target pairs")
    score = {g: len(s) for g, s in support.items()} if scoring == "pairs" else dict(freq)
    ranked = sorted(score, key=lambda g: (-score[g], pattern_text(g)))
    return FeatureSet(ranked[:cap])


@dataclass
class PairPatternMatrix:
    """Rows: pairs then reversed pairs. Columns: ``X p Y`` then ``Y p X``."""

    values: np.ndarray
    pairs: list[Pair]
    features: FeatureSet

    @property
    def n(self) -> int:
        return len(self.pairs)

    @property
    def m(self) -> int:
        return len(self.features)

    def row_of(self, x: str, y: str) -> int | None:
        for i, (a, b) in enumerate(self.pairs):
            if (a, b) == (x, y):
                return i
            if (b, a) == (x, y):
                return self.n + i
        return None

    def row_pair(self, r: int) -> Pair:
        a, b = self.pairs[r % self.n]
        return (a, b) if r < self.n else (b, a)

    def col_of(self, pattern: Pattern, swapped: bool = False) -> int:
        return self.features.index[tuple(pattern)] + (self.m if swapped else 0)

    def col_label(self, c: int) -> str:
        p = pattern_text(self.features.patterns[c % self.m])
        return f"X {p} Y" if c < self.m else f"Y {p} X"


def build_matrix(store: TripleStore, features: FeatureSet, w: TargetPairSet) -> PairPatternMatrix:
    """Count matrix: triple ``(x, y, p')`` adds its count at row ``(x, y)``,
    column ``X g Y`` and at row ``(y, x)``, column ``Y g X``, for every
    generalization ``g`` of ``p'`` in the feature set.
    """
    n, m = len(w), len(features)
    rows, cols, vals = [], [], []
    for (x, y, p), c in store.counts.items():
        loc = w.locate(x, y)
        if loc is None:
            continue
        i, forward = loc
        r_xy = i if forward else n + i
        r_yx = n + i if forward else i
        for g in generalize(p):
            j = features.index.get(g)
            if j is None:
                continue
            rows.extend((r_xy, r_yx))
            cols.extend((j, m + j))
            vals.extend((c, c))
    dense = np.zeros((2 * n, 2 * m), dtype=np.float64)
    if rows:
        np.add.at(dense, (np.asarray(rows), np.asarray(cols)), np.asarray(vals, dtype=np.float64))
    return PairPatternMatrix(dense, w.pairs, features)


def ppmi(m):
    """PPMI weighting; accepts a :class:`PairPatternMatrix` or a plain array."""
    values = m.values if isinstance(m, PairPatternMatrix) else np.asarray(m, dtype=np.float64)
    if values.ndim != 2:
        raise ArgumentError(f"ppmi needs a matrix, got shape {values.shape}")
    if np.any(values < 0):
        raise ArgumentError("ppmi needs nonnegative counts")
    if not values.sum() > 0:
        raise DegenerateMatrixError("all-zero count matrix")
    out = kernels.ppmi_dense(values)
    if isinstance(m, PairPatternMatrix):
        return PairPatternMatrix(out, m.pairs, m.features)
    return out


@dataclass
class LraModel:
    """Pair vectors from the rows of ``U_k diag(S_k)``.

    ``vectors`` holds forward rows (pair ``i``) then reversed rows (pair
    ``n + i``); ``no_pattern`` flags pairs with empty rows in both directions.
    """

    pairs: list[Pair]
    vectors: np.ndarray
    no_pattern: set[Pair]
    meta: dict = field(default_factory=dict)
    _index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        n = len(self.pairs)
        self._index = {}
        for i, (a, b) in enumerate(self.pairs):
            self._index[(a, b)] = i
            self._index.setdefault((b, a), n + i)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def is_flagged(self, a: str, b: str) -> bool:
        return (a, b) in self.no_pattern or (b, a) in self.no_pattern

    def vector(self, a: str, b: str) -> np.ndarray | None:
        """Vector of ``(a, b)``; ``None`` for unknown or no-pattern pairs."""
        r = self._index.get((a, b))
        if r is None or self.is_flagged(a, b):
            return None
        return self.vectors[r]

    def save(self, path) -> None:
        buf = io.BytesIO()
        w = Writer(buf)
        w.raw(LRA_MAGIC)
        w.u32(LRA_VERSION)
        w.meta(self.meta)
        w.u32(self.dim)
        w.u32(len(self.pairs))
        for a, b in self.pairs:
            w.text(a)
            w.text(b)
            w.u32(int((a, b) in self.no_pattern))
        w.floats(self.vectors)
        Path(path).write_bytes(buf.getvalue())

    @classmethod
    def load(cls, path) -> "LraModel":
        r = Reader(Path(path).read_bytes(), str(path))
        r.magic(LRA_MAGIC, LRA_VERSION)
        meta = r.meta()
        k, n = r.u32(), r.u32()
        pairs, flagged = [], set()
        for _ in range(n):
            a, b = r.text(), r.text()
            pairs.append((a, b))
            if r.u32():
                flagged.add((a, b))
        vectors = r.floats(2 * n * k).reshape(2 * n, k)
        r.finish()
        if len(set(pairs)) != n:
            raise FormatError(f"{path}: duplicate pairs")
        return cls(pairs, vectors, flagged, meta)


def reduce(m: PairPatternMatrix, k: int = DEFAULT_DIM, counts: PairPatternMatrix | None = None) -> LraModel:
    """Project the weighted matrix onto its top-``k`` singular directions.

    ``counts`` (the unweighted matrix) decides the no-pattern flags when
    given; otherwise ``m`` itself is used.
    """
    limit = min(m.values.shape)
    if limit == 0:
        raise DegenerateMatrixError("empty pair-pattern matrix")
    if k > limit:
        warnings.warn(f"SVD dimension {k} exceeds min(2n, 2m) = {limit}; clamped", stacklevel=2)
        k = limit
    if not np.any(m.values):
        raise DegenerateMatrixError("all-zero pair-pattern matrix")
    u, s, _ = truncated_svd(m.values, k)
    vectors = u * s
    n = m.n
    ref = (counts if counts is not None else m).values
    empty = ~ref.any(axis=1)
    flagged = {m.pairs[i] for i in range(n) if empty[i] and empty[n + i]}
    return LraModel(m.pairs, vectors, flagged)


def cosine(u, v) -> float:
    """Cosine similarity; 0 when either vector is zero."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def lra_score(model: LraModel, pair_x: Pair, pair_y: Pair) -> float:
    vx, vy = model.vector(*pair_x), model.vector(*pair_y)
    if vx is None or vy is None:
        return 0.0
    return cosine(vx, vy)


def train_lra(store: TripleStore, w: TargetPairSet, k: int = DEFAULT_DIM,
              cap_mult: int = DEFAULT_CAP_MULT, scoring: str = "pairs") -> tuple[LraModel, FeatureSet]:
    """Feature selection, matrix build, PPMI and SVD in one call."""
    features = select_features(store, w, cap_mult=cap_mult, scoring=scoring)
    counts = build_matrix(store, features, w)
    model = reduce(ppmi(counts), k, counts=counts)
    log.info("LRA: %d pairs, %d features, dim %d, %d no-pattern pairs",
             len(w), len(features), model.dim, len(model.no_pattern))
    return model, features
