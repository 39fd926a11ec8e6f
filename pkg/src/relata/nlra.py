"""Neural latent relational analysis.

Word pairs are encoded by an MLP over ``[v_a; v_b; v_b - v_a]``, patterns by
an LSTM over their token embeddings, and both are trained so that observed
(pair, pattern) co-occurrences score high against sampled negative patterns.
A pair's final representation is ``[h(a, b); h(b, a)]``.
"""

from __future__ import annotations

import io
import logging
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from relata import __version__
from relata._binio import Reader, Writer
from relata.core.autodiff import (
    Tensor,
    add,
    backward,
    concat,
    log_sigmoid,
    mul,
    neg,
    scale,
    sub,
    sum_,
    take,
    tanh,
)
from relata.core.nn import BatchNormLayer, Linear, LstmParams, lstm_encode
from relata.core.optim import AdaGrad
from relata.corpus import Pattern, TripleStore
from relata.embeddings import EmbeddingTable, read_table, write_table
from relata.errors import ArgumentError, FormatError, OOVError, TrainingDataError

log = logging.getLogger(__name__)

UNK = "<unk>"
NLRA_MAGIC = b"RELATA-NLRA"
NLRA_VERSION = 1
MLP_LAYERS = 3
MAX_REJECTIONS = 10


@dataclass
class TrainingConfig:
    epochs: int = 50
    lr: float = 0.01
    negatives: int = 10
    batch_size: int = 128
    seed: int = 0
    hidden: int = 300
    max_replicas: int = 100
    neg_power: float = 1.0
    update_embeddings: bool = True
    adagrad_eps: float = 1e-8

    def __post_init__(self):
        for name in ("epochs", "batch_size", "hidden", "max_replicas"):
            if int(getattr(self, name)) < 1:
                raise ArgumentError(f"training config: {name} must be positive")
        if self.negatives < 0:
            raise ArgumentError("training config: negatives must be >= 0")
        if self.lr <= 0 or self.adagrad_eps <= 0 or self.neg_power <= 0:
            raise ArgumentError("training config: lr, adagrad_eps and neg_power must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


class PairEncoder:
    """Three affine layers, each followed by batch norm and tanh."""

    def __init__(self, layers: list[tuple[Linear, BatchNormLayer]]):
        self.layers = layers

    @classmethod
    def init(cls, rng, dim: int, hidden: int, dtype=np.float32, n_layers: int = MLP_LAYERS):
        layers = []
        width = 3 * dim
        for _ in range(n_layers):
            layers.append((Linear.init(rng, width, hidden, dtype), BatchNormLayer.init(hidden, dtype)))
            width = hidden
        return cls(layers)

    def __call__(self, x) -> Tensor:
        for lin, bn in self.layers:
            x = tanh(bn(lin(x)))
        return x

    def parameters(self) -> dict[str, Tensor]:
        out = {}
        for k, (lin, bn) in enumerate(self.layers):
            out[f"pair.{k}.weight"] = lin.weight
            out[f"pair.{k}.bias"] = lin.bias
            out[f"pair.{k}.bn.gamma"] = bn.gamma
            out[f"pair.{k}.bn.beta"] = bn.beta
        return out

    def buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for k, (_, bn) in enumerate(self.layers):
            out[f"pair.{k}.bn.running_mean"] = bn.running_mean
            out[f"pair.{k}.bn.running_var"] = bn.running_var
        return out

    def set_training(self, flag: bool) -> None:
        for _, bn in self.layers:
            bn.training = flag


class PatternEncoder:
    """LSTM over pattern token embeddings; the last hidden state is the embedding."""

    def __init__(self, lstm: LstmParams):
        self.lstm = lstm

    @classmethod
    def init(cls, rng, dim: int, hidden: int, dtype=np.float32):
        return cls(LstmParams.init(rng, dim, hidden, dtype))

    def __call__(self, steps) -> Tensor:
        return lstm_encode(steps, self.lstm)

    def parameters(self) -> dict[str, Tensor]:
        return {
            "pattern.w_input": self.lstm.w_input,
            "pattern.w_hidden": self.lstm.w_hidden,
            "pattern.bias": self.lstm.bias,
        }


class NegativeSampler:
    """Draws pattern indices with probability proportional to ``count ** power``."""

    def __init__(self, counts: Sequence[float], rng: np.random.Generator | int = 0, power: float = 1.0):
        weights = np.asarray(counts, dtype=np.float64) ** power
        if weights.ndim != 1 or weights.size == 0 or not np.all(weights >= 0) or weights.sum() <= 0:
            raise ArgumentError("negative sampler needs a nonempty nonnegative weight table")
        self.cdf = np.cumsum(weights / weights.sum())
        self.cdf[-1] = 1.0
        self.rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
        self.collisions_kept = 0

    def draw(self, size) -> np.ndarray:
        return np.searchsorted(self.cdf, self.rng.random(size), side="right").astype(np.int64)

    def sample(self, positives: np.ndarray, k: int) -> np.ndarray:
        """``(len(positives), k)`` negatives; draws equal to the positive are
        redrawn up to ``MAX_REJECTIONS`` times, then kept."""
        positives = np.asarray(positives, dtype=np.int64)
        out = self.draw((positives.shape[0], k))
        for _ in range(MAX_REJECTIONS):
            clash = out == positives[:, None]
            if not clash.any():
                break
            out[clash] = self.draw(int(clash.sum()))
        else:
            clash = out == positives[:, None]
            if clash.any():
                self.collisions_kept += int(clash.sum())
        return out


@dataclass
class Batch:
    left: np.ndarray
    right: np.ndarray
    positive: np.ndarray
    negative: np.ndarray


class NlraModel:
    def __init__(self, table: EmbeddingTable, pair_encoder: PairEncoder,
                 pattern_encoder: PatternEncoder, config: TrainingConfig, meta: dict | None = None):
        if UNK not in table:
            table = table.with_words([UNK])
        self.table = table
        self.pair_encoder = pair_encoder
        self.pattern_encoder = pattern_encoder
        self.config = config
        self.meta = dict(meta or {})
        self.unk = table.vocab.index(UNK)

    @classmethod
    def init(cls, table: EmbeddingTable, config: TrainingConfig | None = None,
             dtype=np.float32, rng: np.random.Generator | None = None) -> "NlraModel":
        config = config or TrainingConfig()
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        table = table.with_words([UNK]) if UNK not in table else table.copy()
        table.matrix = np.ascontiguousarray(table.matrix, dtype=dtype)
        pair = PairEncoder.init(rng, table.dim, config.hidden, dtype)
        pattern = PatternEncoder.init(rng, table.dim, config.hidden, dtype)
        return cls(table, pair, pattern, config)

    @property
    def dim(self) -> int:
        return self.table.dim

    @property
    def hidden(self) -> int:
        return self.config.hidden

    @property
    def dtype(self):
        return self.pattern_encoder.lstm.w_input.dtype

    def parameters(self) -> dict[str, Tensor]:
        return {**self.pair_encoder.parameters(), **self.pattern_encoder.parameters()}

    def set_training(self, flag: bool) -> None:
        self.pair_encoder.set_training(flag)

    @property
    def training(self) -> bool:
        return self.pair_encoder.layers[0][1].training

    def word_id(self, word: str) -> int:
        if word == UNK:
            raise OOVError(word)
        return self.table.vocab.index(word)

    def pattern_ids(self, pattern: Pattern) -> tuple[int, ...]:
        if not pattern:
            raise ArgumentError("empty pattern")
        v = self.table.vocab
        return tuple(v.get(t, self.unk) for t in pattern)

    # ------------------------------------------------------------ graph building

    def _rows(self, word_ids: np.ndarray, trainable: bool) -> tuple[Tensor, np.ndarray]:
        words = np.unique(word_ids)
        mat = self.table.matrix
        rows = Tensor(mat[words].astype(self.dtype, copy=False), requires_grad=trainable)
        return rows, words

    def _pairs_graph(self, rows: Tensor, words: np.ndarray, left: np.ndarray, right: np.ndarray) -> Tensor:
        va = take(rows, np.searchsorted(words, left))
        vb = take(rows, np.searchsorted(words, right))
        return self.pair_encoder(concat([va, vb, sub(vb, va)], axis=1))

    def _patterns_graph(self, rows: Tensor, words: np.ndarray,
                        token_ids: Sequence[tuple[int, ...]]) -> tuple[Tensor, np.ndarray]:
        """Encode patterns grouped by length; returns (rows, position of each input)."""
        by_len: dict[int, list[int]] = {}
        for i, toks in enumerate(token_ids):
            by_len.setdefault(len(toks), []).append(i)
        parts, order = [], []
        for length in sorted(by_len):
            members = by_len[length]
            toks = np.asarray([token_ids[i] for i in members], dtype=np.int64)
            steps = [take(rows, np.searchsorted(words, toks[:, t])) for t in range(length)]
            parts.append(self.pattern_encoder(steps))
            order.extend(members)
        position = np.empty(len(token_ids), dtype=np.int64)
        position[np.asarray(order, dtype=np.int64)] = np.arange(len(order))
        return concat(parts, axis=0), position

    def objective(self, batch: Batch, patterns: Sequence[tuple[int, ...]],
                  trainable_rows: bool = True) -> tuple[Tensor, Tensor, np.ndarray]:
        """Negative-sampling objective summed over the batch (to be maximized).

        ``patterns`` maps pattern index to token ids. Returns the scalar
        objective, the gathered embedding-row leaf and the word ids it holds.
        """
        b = batch.left.shape[0]
        if b == 0:
            raise ArgumentError("empty batch")
        neg_idx = batch.negative.reshape(b, -1)
        k = neg_idx.shape[1]
        used = np.unique(np.concatenate([batch.positive, neg_idx.ravel()]))
        used_tokens = [patterns[i] for i in used]
        all_words = np.concatenate(
            [batch.left, batch.right, np.fromiter((t for p in used_tokens for t in p), dtype=np.int64)]
        )
        rows, words = self._rows(all_words, trainable_rows)
        h = self._pairs_graph(rows, words, batch.left, batch.right)
        pat, position = self._patterns_graph(rows, words, used_tokens)
        slot = position[np.searchsorted(used, batch.positive)]
        pos_scores = sum_(mul(h, take(pat, slot)), axis=1)
        total = sum_(log_sigmoid(pos_scores))
        if k:
            nslot = position[np.searchsorted(used, neg_idx.ravel())]
            hn = take(h, np.repeat(np.arange(b), k))
            nscores = sum_(mul(hn, take(pat, nslot)), axis=1)
            total = add(total, sum_(log_sigmoid(neg(nscores))))
        return total, rows, words

    # ------------------------------------------------------------ inference

    def _pair_matrix(self, ordered: list[tuple[str, str]]) -> np.ndarray:
        left = np.asarray([self.word_id(a) for a, _ in ordered], dtype=np.int64)
        right = np.asarray([self.word_id(b) for _, b in ordered], dtype=np.int64)
        was = self.training
        self.set_training(False)
        try:
            rows, words = self._rows(np.concatenate([left, right]), False)
            return self._pairs_graph(rows, words, left, right).data
        finally:
            self.set_training(was)

    def encode_pair(self, a: str, b: str) -> np.ndarray:
        """``h(a, b)`` in inference mode."""
        return self._pair_matrix([(a, b)])[0].copy()

    def encode_pattern(self, pattern: Pattern) -> np.ndarray:
        ids = self.pattern_ids(tuple(pattern))
        rows, words = self._rows(np.asarray(ids, dtype=np.int64), False)
        pat, _ = self._patterns_graph(rows, words, [ids])
        return pat.data[0].copy()

    def pair_representations(self, pairs: Sequence[tuple[str, str]]) -> np.ndarray:
        """``[h(a, b); h(b, a)]`` for each pair, width ``2 * hidden``."""
        if not pairs:
            return np.zeros((0, 2 * self.hidden), dtype=self.dtype)
        ordered = sorted({p for a, b in pairs for p in ((a, b), (b, a))})
        h = self._pair_matrix(ordered)
        row = {p: i for i, p in enumerate(ordered)}
        return np.stack([np.concatenate([h[row[(a, b)]], h[row[(b, a)]]]) for a, b in pairs])

    def pair_representation(self, a: str, b: str) -> np.ndarray:
        return self.pair_representations([(a, b)])[0]

    # ------------------------------------------------------------ persistence

    def _arrays(self) -> dict[str, np.ndarray]:
        out = {name: t.data for name, t in self.parameters().items()}
        out.update(self.pair_encoder.buffers())
        return out

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        w = Writer(buf)
        w.raw(NLRA_MAGIC)
        w.u32(NLRA_VERSION)
        w.meta({**self.meta, "training_config": self.config.to_dict(), "version": __version__})
        write_table(w, self.table)
        arrays = self._arrays()
        w.u32(len(arrays))
        for name in sorted(arrays):
            w.text(name)
            w.array(arrays[name])
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "NlraModel":
        r = Reader(Path(path).read_bytes(), str(path))
        r.magic(NLRA_MAGIC, NLRA_VERSION)
        meta = r.meta()
        config = TrainingConfig.from_dict(meta.pop("training_config", {}))
        meta.pop("version", None)
        table = read_table(r)
        arrays = {}
        for _ in range(r.u32()):
            name = r.text()
            arrays[name] = r.array()
        r.finish()
        model = cls.init(table, config, rng=np.random.default_rng(0))
        model.table = table
        model.unk = table.vocab.index(UNK)
        targets = dict(model.parameters())
        buffers = model.pair_encoder.buffers()
        if set(arrays) != set(targets) | set(buffers):
            raise FormatError(f"{path}: parameter set does not match the model layout")
        for name, arr in arrays.items():
            dest = targets[name].data if name in targets else buffers[name]
            if dest.shape != arr.shape:
                raise FormatError(f"{path}: {name} has shape {arr.shape}, expected {dest.shape}")
            dest[...] = arr
        model.meta = meta
        model.set_training(False)
        return model


# ---------------------------------------------------------------- training

def nlra_loss(model: NlraModel, positives: Sequence[tuple[str, str, Pattern]],
              sampler: NegativeSampler, patterns: Sequence[Pattern]) -> Tensor:
    """Objective ``sum log s(v_p . h) + sum log s(-v_p' . h)`` over a batch.

    ``positives`` are textual-order ``(a, b, pattern)`` triples whose patterns
    appear in ``patterns``, the list the sampler indexes.
    """
    if not positives:
        raise ArgumentError("empty batch")
    index = {tuple(p): i for i, p in enumerate(patterns)}
    token_ids = [model.pattern_ids(tuple(p)) for p in patterns]
    pos = np.asarray([index[tuple(p)] for _, _, p in positives], dtype=np.int64)
    batch = Batch(
        np.asarray([model.word_id(a) for a, _, _ in positives], dtype=np.int64),
        np.asarray([model.word_id(b) for _, b, _ in positives], dtype=np.int64),
        pos,
        sampler.sample(pos, model.config.negatives),
    )
    total, _, _ = model.objective(batch, token_ids)
    return total


@dataclass
class _Stream:
    left: np.ndarray
    right: np.ndarray
    pattern: np.ndarray
    replicas: np.ndarray
    patterns: list[Pattern] = field(default_factory=list)
    pattern_freq: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _prepare(store: TripleStore, model: NlraModel, max_replicas: int) -> _Stream:
    vocab = model.table.vocab
    usable = store.filter(lambda l, r, p: l in vocab and r in vocab and l != UNK and r != UNK)
    dropped = len(store) - len(usable)
    if dropped:
        log.warning("dropped %d triples whose pair words are out of vocabulary", dropped)
    if not usable:
        raise TrainingDataError("no usable triples: every pair has an out-of-vocabulary word")
    triples = usable.triples()
    patterns = sorted({t.pattern for t in triples})
    pindex = {p: i for i, p in enumerate(patterns)}
    freq = np.zeros(len(patterns))
    for t in triples:
        freq[pindex[t.pattern]] += t.count
    return _Stream(
        np.asarray([vocab.index(t.left) for t in triples], dtype=np.int64),
        np.asarray([vocab.index(t.right) for t in triples], dtype=np.int64),
        np.asarray([pindex[t.pattern] for t in triples], dtype=np.int64),
        np.minimum(np.asarray([t.count for t in triples]), max_replicas),
        patterns,
        freq,
    )


def _batches(order: np.ndarray, size: int) -> list[np.ndarray]:
    chunks = [order[i:i + size] for i in range(0, len(order), size)]
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate([chunks[-2], chunks.pop()])
    return chunks


def train(store: TripleStore, table: EmbeddingTable, config: TrainingConfig | None = None,
          dtype=np.float32, callback=None) -> NlraModel:
    """Fit the pair and pattern encoders with minibatch AdaGrad.

    Each triple is replicated ``min(count, max_replicas)`` times per epoch.
    ``callback(epoch, mean_loss)`` is invoked after every epoch.
    """
    config = config or TrainingConfig()
    seeds = np.random.SeedSequence(config.seed).spawn(2)
    model = NlraModel.init(table, config, dtype=dtype, rng=np.random.default_rng(seeds[0]))
    rng = np.random.default_rng(seeds[1])
    stream = _prepare(store, model, config.max_replicas)
    token_ids = [model.pattern_ids(p) for p in stream.patterns]
    sampler = NegativeSampler(stream.pattern_freq, rng, config.neg_power)
    positions = np.repeat(np.arange(len(stream.left)), stream.replicas)
    if len(positions) < 2:
        raise TrainingDataError("batch normalization needs at least 2 positive occurrences")
    update_rows = config.update_embeddings and table.trainable
    opt = AdaGrad(config.lr, config.adagrad_eps)
    params = model.parameters()
    model.set_training(True)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(positions)
        epoch_total = 0.0
        for idx in _batches(order, config.batch_size):
            pos = stream.pattern[idx]
            batch = Batch(stream.left[idx], stream.right[idx], pos, sampler.sample(pos, config.negatives))
            total, rows, words = model.objective(batch, token_ids, trainable_rows=update_rows)
            loss = scale(total, -1.0 / len(idx))
            for p in params.values():
                p.zero_grad()
            backward(loss)
            for name, p in params.items():
                opt.step(name, p, p.grad)
            if update_rows:
                opt.step_rows("embeddings", model.table.matrix, words, rows.grad)
            epoch_total += -float(total.data)
        mean_loss = epoch_total / len(positions)
        history.append(mean_loss)
        log.info("epoch %d/%d  loss %.6f", epoch + 1, config.epochs, mean_loss)
        if callback is not None:
            callback(epoch, mean_loss)
    if sampler.collisions_kept:
        warnings.warn(
            f"{sampler.collisions_kept} negatives equal to their positive pattern were kept "
            f"after {MAX_REJECTIONS} redraws (very few distinct patterns)",
            stacklevel=2,
        )
    model.set_training(False)
    model.meta["loss_history"] = history
    return model

