"""Pure-Python implementations of the hot kernels.

These define the reference behaviour; ``_ckernels.pyx`` mirrors them.
"""

import numpy as np


def scan_windows(ids, offsets, keys, base, min_gap, max_gap):
    """Find token windows whose endpoints form a target pair.

    ``ids`` holds one endpoint id per token (-1 if the token is not a target
    word), sentences are delimited by ``offsets``, and ``keys`` is the sorted
    array of ``left * base + right`` codes for every admissible ordered pair.
    Returns global ``(i, j)`` token positions with ``min_gap <= j - i - 1 <= max_gap``.
    """
    keyset = set(np.asarray(keys).tolist())
    ids = np.asarray(ids).tolist()
    offsets = np.asarray(offsets).tolist()
    out_i, out_j = [], []
    for s in range(len(offsets) - 1):
        start, stop = offsets[s], offsets[s + 1]
        for i in range(start, stop):
            a = ids[i]
            if a < 0:
                continue
            for gap in range(min_gap, max_gap + 1):
                j = i + gap + 1
                if j >= stop:
                    break
                b = ids[j]
                if b >= 0 and a * base + b in keyset:
                    out_i.append(i)
                    out_j.append(j)
    return np.asarray(out_i, dtype=np.int64), np.asarray(out_j, dtype=np.int64)


def adagrad_dense(param, grad, accum, lr, eps):
    """In place: ``accum += g**2``; ``param -= lr * g / (sqrt(accum) + eps)``."""
    accum += grad * grad
    param -= lr * grad / (np.sqrt(accum) + eps)


def adagrad_rows(param, rows, grad_rows, accum, lr, eps):
    """Row-sparse AdaGrad step on ``param[rows]``; ``rows`` must be unique."""
    rows = np.asarray(rows, dtype=np.int64)
    acc = accum[rows] + grad_rows * grad_rows
    accum[rows] = acc
    param[rows] -= lr * grad_rows / (np.sqrt(acc) + eps)


def ppmi_dense(counts):
    """Positive PMI of a nonnegative count matrix with positive total."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    rows = counts.sum(axis=1, keepdims=True)
    cols = counts.sum(axis=0, keepdims=True)
    out = np.zeros_like(counts)
    nz = counts > 0
    expected = (rows * cols)[nz]
    out[nz] = np.log(counts[nz] * total / expected)
    np.maximum(out, 0.0, out=out)
    return out
