import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from relata import _pykernels, kernels

BACKENDS = kernels.available_backends()
native = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")


def _scan_inputs(seed):
    rng = np.random.default_rng(seed)
    n_ids, base = 6, 6
    lengths = rng.integers(0, 15, size=40)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    ids = rng.integers(-1, n_ids, size=int(offsets[-1])).astype(np.int64)
    keys = np.unique(rng.integers(0, n_ids, size=8) * base + rng.integers(0, n_ids, size=8)).astype(np.int64)
    return ids, offsets, keys, base


def test_backend_selection():
    assert kernels.BACKEND in ("cython", "python")
    assert "python" in BACKENDS


@native
@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("gaps", [(1, 3), (2, 2), (1, 5)])
def test_scan_backends_agree(seed, gaps):
    args = _scan_inputs(seed)
    a = BACKENDS["python"].scan_windows(*args, *gaps)
    b = BACKENDS["cython"].scan_windows(*args, *gaps)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


@pytest.mark.parametrize("seed", range(5))
def test_scan_matches_double_loop(seed):
    ids, offsets, keys, base = _scan_inputs(seed)
    expect = []
    keyset = set(keys.tolist())
    for s in range(len(offsets) - 1):
        for i in range(offsets[s], offsets[s + 1]):
            for j in range(i + 1, offsets[s + 1]):
                if 1 <= j - i - 1 <= 3 and ids[i] >= 0 and ids[j] >= 0 and ids[i] * base + ids[j] in keyset:
                    expect.append((i, j))
    i_arr, j_arr = kernels.scan_windows(ids, offsets, keys, base, 1, 3)
    assert sorted(zip(i_arr.tolist(), j_arr.tolist())) == expect


@pytest.mark.parametrize("name", sorted(BACKENDS))
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_adagrad_kernels(name, dtype):
    mod = BACKENDS[name]
    rng = np.random.default_rng(0)
    p = rng.normal(size=(5, 3)).astype(dtype)
    g = rng.normal(size=(5, 3)).astype(dtype)
    acc = np.abs(rng.normal(size=(5, 3))).astype(dtype)
    ref_p, ref_acc = p.copy(), acc.copy()
    _pykernels.adagrad_dense(ref_p, g, ref_acc, 0.1, 1e-8)
    mod.adagrad_dense(p, g, acc, 0.1, 1e-8)
    assert np.allclose(p, ref_p, rtol=1e-6) and np.allclose(acc, ref_acc, rtol=1e-6)
    rows = np.array([4, 0])
    p2, acc2 = ref_p.copy(), ref_acc.copy()
    mod.adagrad_rows(p2, rows, g[rows], acc2, 0.1, 1e-8)
    _pykernels.adagrad_rows(ref_p, rows, g[rows], ref_acc, 0.1, 1e-8)
    assert np.allclose(p2, ref_p, rtol=1e-6) and np.allclose(acc2, ref_acc, rtol=1e-6)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_ppmi_kernels(name):
    counts = np.random.default_rng(3).integers(0, 5, size=(7, 9)).astype(float)
    counts[2] = 0
    assert np.allclose(BACKENDS[name].ppmi_dense(counts), _pykernels.ppmi_dense(counts), atol=1e-12)


def test_pure_python_override():
    env = dict(os.environ, RELATA_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from relata import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_benchmark_runs():
    bench = Path(__file__).parents[1] / "benchmarks" / "bench_kernels.py"
    out = subprocess.run([sys.executable, str(bench), "--repeat", "1"], capture_output=True, text=True, check=True)
    for name in ("scan_windows", "adagrad_dense", "adagrad_rows", "ppmi_dense"):
        assert name in out.stdout
