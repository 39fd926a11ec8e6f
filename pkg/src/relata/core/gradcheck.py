"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from relata.core.autodiff import Tensor, backward, mul, sum_

FD_STEP = 1e-4
# central differences of an O(1) objective carry ~1e-12 roundoff; gradients
# whose norms both fall below this are treated as zero
ZERO_FLOOR = 1e-8


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-wise ``|a - n| / max(|a|, |n|)``; 0 when both vanish."""
    a, n = np.ravel(analytic), np.ravel(numeric)
    scale = max(np.linalg.norm(a), np.linalg.norm(n))
    if scale < ZERO_FLOOR:
        return 0.0
    return float(np.linalg.norm(a - n) / scale)


def check_gradients(fn: Callable[..., Tensor], inputs: Sequence[np.ndarray], rng=None,
                    step: float = FD_STEP) -> list[float]:
    """Compare backprop against central differences for every input.

    ``fn`` maps float64 Tensors to a Tensor of any shape; it is reduced to a
    scalar by a fixed random projection so every output entry matters.
    Returns one relative error per input.
    """
    rng = np.random.default_rng(rng)
    inputs = [np.array(x, dtype=np.float64) for x in inputs]
    probe = None

    def scalar(arrays, track):
        nonlocal probe
        leaves = [Tensor(a, requires_grad=track) for a in arrays]
        out = fn(*leaves)
        if probe is None:
            probe = rng.standard_normal(out.shape)
        return sum_(mul(out, Tensor(probe))), leaves

    root, leaves = scalar(inputs, True)
    backward(root)
    errors = []
    for i, x in enumerate(inputs):
        numeric = np.zeros_like(x)
        flat = numeric.reshape(-1)
        for j in range(x.size):
            bumped = [a.copy() for a in inputs]
            bumped[i].reshape(-1)[j] += step
            up = scalar(bumped, False)[0].item()
            bumped[i].reshape(-1)[j] -= 2 * step
            down = scalar(bumped, False)[0].item()
            flat[j] = (up - down) / (2 * step)
        errors.append(relative_error(leaves[i].grad, numeric))
    return errors
