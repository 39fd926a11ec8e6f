"""Randomized gradient-check cases shared by the core tests and the acceptance run."""

import numpy as np

from relata.core import (
    BatchNormLayer,
    LstmParams,
    add,
    affine,
    batch_norm,
    concat,
    dot,
    log_sigmoid,
    lstm_encode,
    lstm_step,
    matmul,
    mean,
    mul,
    neg,
    reshape,
    scale,
    sigmoid,
    split,
    sub,
    sum_,
    take,
    tanh,
)


def _dims(rng, n):
    return [int(d) for d in rng.integers(1, 9, size=n)]


def _bn(training):
    def fn(x, gamma, beta):
        layer = BatchNormLayer(gamma, beta, np.zeros(x.shape[1]), np.ones(x.shape[1]) * 1.5,
                               training=training)
        return batch_norm(x, layer)
    return fn


def _lstm_step(x, h, c, wi, wh, b):
    params = LstmParams(wi, wh, b)
    h2, c2 = lstm_step(x, h, c, params)
    return concat([h2, c2], axis=1)


def _lstm_encode(x, wi, wh, b):
    # x stacks three timesteps along the batch axis
    return lstm_encode(split(x, 3, axis=0), LstmParams(wi, wh, b))


def _take(a):
    idx = np.array([0, a.shape[0] - 1, 0, a.shape[0] // 2])
    return take(a, idx)


def cases():
    """(name, fn, make_inputs(rng)) triples."""
    def same(k):
        def make(rng):
            r, c = _dims(rng, 2)
            return [rng.standard_normal((r, c)) for _ in range(k)]
        return make

    def mm(rng):
        a, b, c = _dims(rng, 3)
        return [rng.standard_normal((a, b)), rng.standard_normal((b, c))]

    def aff(rng):
        a, b, c = _dims(rng, 3)
        return [rng.standard_normal((a, b)), rng.standard_normal((b, c)), rng.standard_normal(c)]

    def vec2(rng):
        n = _dims(rng, 1)[0]
        return [rng.standard_normal(n), rng.standard_normal(n)]

    def cat3(rng):
        r = _dims(rng, 1)[0]
        return [rng.standard_normal((r, c)) for c in _dims(rng, 3)]

    def split_in(rng):
        r, c = _dims(rng, 2)
        return [rng.standard_normal((r, 2 * c))]

    def bn_in(rng):
        r = int(rng.integers(2, 9))
        c = _dims(rng, 1)[0]
        return [rng.standard_normal((r, c)) * 2 + 1, rng.standard_normal(c), rng.standard_normal(c)]

    def lstm_in(rng):
        b, d, h = _dims(rng, 3)
        return [rng.standard_normal((b, d)), rng.standard_normal((b, h)), rng.standard_normal((b, h)),
                rng.standard_normal((d, 4 * h)) * 0.5, rng.standard_normal((h, 4 * h)) * 0.5,
                rng.standard_normal(4 * h)]

    def lstm_seq(rng):
        b, d, h = _dims(rng, 3)
        return [rng.standard_normal((3 * b, d)), rng.standard_normal((d, 4 * h)) * 0.5,
                rng.standard_normal((h, 4 * h)) * 0.5, rng.standard_normal(4 * h)]

    return [
        ("add", add, same(2)),
        ("sub", sub, same(2)),
        ("mul", mul, same(2)),
        ("neg", neg, same(1)),
        ("scale", lambda a: scale(a, -1.7), same(1)),
        ("tanh", tanh, same(1)),
        ("sigmoid", sigmoid, same(1)),
        ("log_sigmoid", log_sigmoid, lambda rng: [rng.standard_normal((3, 4)) * 6]),
        ("matmul", matmul, mm),
        ("affine", affine, aff),
        ("dot", dot, vec2),
        ("concat", lambda a, b, c: concat([a, b, c], axis=1), cat3),
        ("split", lambda a: concat(split(a, 2, axis=1)[::-1], axis=1), split_in),
        ("take", _take, same(1)),
        ("reshape", lambda a: reshape(a, (-1,)), same(1)),
        ("sum", lambda a: sum_(a, axis=0), same(1)),
        ("mean", lambda a: mean(a, axis=1), same(1)),
        ("batch_norm_train", _bn(True), bn_in),
        ("batch_norm_infer", _bn(False), bn_in),
        ("lstm_step", _lstm_step, lstm_in),
        ("lstm_encode", _lstm_encode, lstm_seq),
    ]


def nlra_loss_errors(seed, dim=4, hidden=4, negatives=3):
    """Relative errors of every NLRA parameter gradient (and the gathered
    embedding rows) against central differences of the batch objective."""
    from relata.core import backward
    from relata.core.gradcheck import FD_STEP, relative_error
    from relata.embeddings import EmbeddingTable, Vocabulary
    from relata.nlra import Batch, NlraModel, TrainingConfig

    rng = np.random.default_rng(seed)
    words = ["a", "b", "c", "d", "is", "of", "the", "x"]
    table = EmbeddingTable(Vocabulary(words), rng.standard_normal((len(words), dim)).astype(np.float32))
    config = TrainingConfig(hidden=hidden, negatives=negatives)
    model = NlraModel.init(table, config, dtype=np.float64, rng=rng)
    # float64 random init so perturbations are not lost to rounding
    for p in model.parameters().values():
        p.data[...] += rng.standard_normal(p.shape) * 0.1
    model.set_training(True)
    patterns = [model.pattern_ids(p) for p in (("is",), ("of", "the"), ("x", "is", "of"), ("qq",))]
    b = 5
    batch = Batch(rng.integers(0, 4, size=b), rng.integers(0, 4, size=b),
                  rng.integers(0, len(patterns), size=b),
                  rng.integers(0, len(patterns), size=b * negatives))

    def value():
        return model.objective(batch, patterns, trainable_rows=False)[0].item()

    total, rows, row_words = model.objective(batch, patterns, trainable_rows=True)
    params = model.parameters()
    for p in params.values():
        p.zero_grad()
    backward(total)

    def fd(arr):
        out = np.zeros_like(arr)
        for j in np.ndindex(arr.shape):
            old = arr[j]
            arr[j] = old + FD_STEP
            up = value()
            arr[j] = old - FD_STEP
            down = value()
            arr[j] = old
            out[j] = (up - down) / (2 * FD_STEP)
        return out

    errors = {name: relative_error(p.grad, fd(p.data)) for name, p in params.items()}
    emb = model.table.matrix
    numeric_rows = np.stack([fd(emb[w]) for w in row_words])  # emb[w] is a view
    errors["embeddings"] = relative_error(rows.grad, numeric_rows)
    return errors

