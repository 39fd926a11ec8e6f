"""Randomized truncated SVD (range finder with power iterations)."""

from __future__ import annotations

import numpy as np

from relata.errors import ArgumentError, DimensionError, NumericError

SVD_SEED = 20180601
POWER_ITERATIONS = 4
OVERSAMPLES = 10


def truncated_svd(m, k: int, n_iter: int = POWER_ITERATIONS, oversamples: int = OVERSAMPLES,
                  seed: int = SVD_SEED):
    """Top-``k`` singular triplets of ``m``.

    Returns ``(u, s, v)`` with ``u`` of shape (rows, k), ``s`` descending and
    ``v`` of shape (cols, k), so ``u @ diag(s) @ v.T`` approximates ``m``.
    Column signs are fixed so the largest-magnitude entry of each ``u``
    column is positive.
    """
    a = np.asarray(m.data if hasattr(m, "requires_grad") else m, dtype=np.float64)
    if a.ndim != 2:
        raise DimensionError(f"truncated_svd needs a matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericError("non-finite value in matrix")
    rows, cols = a.shape
    if not isinstance(k, (int, np.integer)) or k < 1 or k > min(rows, cols):
        raise ArgumentError(f"k={k} outside [1, {min(rows, cols)}] for a {rows}x{cols} matrix")

    rng = np.random.default_rng(seed)
    width = min(k + oversamples, rows, cols)
    q, _ = np.linalg.qr(a @ rng.standard_normal((cols, width)))
    for _ in range(n_iter):
        z, _ = np.linalg.qr(a.T @ q)
        q, _ = np.linalg.qr(a @ z)

    ub, s, vt = np.linalg.svd(q.T @ a, full_matrices=False)
    u = q @ ub[:, :k]
    s = s[:k]
    v = vt[:k].T
    pivot = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[pivot, np.arange(k)])
    signs[signs == 0] = 1.0
    return u * signs, s, v * signs
