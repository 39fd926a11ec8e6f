"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--scale S]

Both backends run on identical inputs; outputs are checked for agreement
before timings are reported.
"""

import argparse
import time

import numpy as np

from relata.kernels import available_backends


def _scan_inputs(rng, scale):
    n_sent, vocab, n_targets = 2000 * scale, 500, 60
    lengths = rng.integers(5, 30, size=n_sent)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    tokens = rng.integers(0, vocab, size=int(offsets[-1]))
    ids = np.where(tokens < n_targets, tokens, -1).astype(np.int64)
    base = n_targets
    left = rng.integers(0, n_targets, size=200)
    right = rng.integers(0, n_targets, size=200)
    keys = np.unique(left * base + right).astype(np.int64)
    return (ids, offsets, keys, base, 1, 5)


def _adagrad_inputs(rng, scale):
    shape = (2000 * scale, 100)
    return (rng.standard_normal(shape), rng.standard_normal(shape), np.abs(rng.standard_normal(shape)), 0.1, 1e-8)


def _rows_inputs(rng, scale):
    shape = (5000 * scale, 100)
    rows = np.sort(rng.choice(shape[0], size=shape[0] // 10, replace=False)).astype(np.int64)
    return (rng.standard_normal(shape), rows, rng.standard_normal((len(rows), shape[1])),
            np.abs(rng.standard_normal(shape)), 0.1, 1e-8)


def _ppmi_inputs(rng, scale):
    counts = rng.integers(0, 5, size=(400 * scale, 600)).astype(np.float64)
    counts[rng.random(counts.shape) < 0.8] = 0
    return (counts,)


def _copy(args):
    return tuple(a.copy() if isinstance(a, np.ndarray) else a for a in args)


def _run(kernel, args):
    """Returns the kernel's output, or the mutated arrays for in-place kernels."""
    out = kernel(*args)
    if out is None:
        return tuple(a for a in args if isinstance(a, np.ndarray))
    return out if isinstance(out, tuple) else (out,)


def bench(name, make, repeat, scale):
    rng = np.random.default_rng(0)
    args = make(rng, scale)
    results, times = {}, {}
    for backend, module in available_backends().items():
        kernel = getattr(module, name)
        results[backend] = _run(kernel, _copy(args))
        best = float("inf")
        for _ in range(repeat):
            fresh = _copy(args)
            t0 = time.perf_counter()
            kernel(*fresh)
            best = min(best, time.perf_counter() - t0)
        times[backend] = best
    ref = results["python"]
    for backend, got in results.items():
        for a, b in zip(ref, got):
            if not np.allclose(a, b, rtol=1e-12, atol=1e-12):
                raise SystemExit(f"{name}: {backend} disagrees with the python backend")
    return times


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--scale", type=int, default=1)
    args = ap.parse_args(argv)
    backends = list(available_backends())
    if "cython" not in backends:
        print("compiled extension not built; only the python backend is available")
    print(f"{'kernel':<16}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, make in (("scan_windows", _scan_inputs), ("adagrad_dense", _adagrad_inputs),
                       ("adagrad_rows", _rows_inputs), ("ppmi_dense", _ppmi_inputs)):
        times = bench(name, make, args.repeat, args.scale)
        line = f"{name:<16}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends)
        if "cython" in times:
            line += f"{times['python'] / times['cython']:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
