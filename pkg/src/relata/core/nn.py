"""Layers needed by the pair and pattern encoders: affine, batch norm, LSTM."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from relata.core.autodiff import (
    DEFAULT_DTYPE,
    Tensor,
    _node,
    _require_finite,
    add,
    affine,
    as_tensor,
    matmul,
    mul,
    sigmoid,
    split,
    tanh,
)
from relata.errors import ArgumentError, DegenerateBatchError, DimensionError

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, dtype=DEFAULT_DTYPE):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


@dataclass
class Linear:
    weight: Tensor
    bias: Tensor

    @classmethod
    def init(cls, rng, n_in: int, n_out: int, dtype=DEFAULT_DTYPE) -> "Linear":
        return cls(
            Tensor(glorot_uniform(rng, n_in, n_out, dtype), requires_grad=True),
            Tensor(np.zeros(n_out, dtype=dtype), requires_grad=True),
        )

    def __call__(self, x) -> Tensor:
        return affine(x, self.weight, self.bias)


@dataclass
class BatchNormLayer:
    """Per-feature batch normalization with running statistics.

    ``training`` selects batch statistics (and updates the running ones);
    otherwise the running mean and variance are used.
    """

    gamma: Tensor
    beta: Tensor
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = BN_MOMENTUM
    eps: float = BN_EPS
    training: bool = True

    @classmethod
    def init(cls, width: int, dtype=DEFAULT_DTYPE, **kwargs) -> "BatchNormLayer":
        return cls(
            Tensor(np.ones(width, dtype=dtype), requires_grad=True),
            Tensor(np.zeros(width, dtype=dtype), requires_grad=True),
            np.zeros(width, dtype=dtype),
            np.ones(width, dtype=dtype),
            **kwargs,
        )

    @property
    def width(self) -> int:
        return self.gamma.shape[0]

    def __call__(self, x) -> Tensor:
        return batch_norm(x, self)


def batch_norm(x, layer: BatchNormLayer) -> Tensor:
    x = as_tensor(x)
    _require_finite(x.data)
    if x.data.ndim != 2 or x.shape[1] != layer.width:
        raise DimensionError(f"batch_norm: input {x.shape} vs feature width {layer.width}")
    gamma, beta = layer.gamma, layer.beta
    xd = x.data
    dt = xd.dtype

    if layer.training:
        n = xd.shape[0]
        if n < 2:
            raise DegenerateBatchError("batch normalization in training mode needs >= 2 rows")
        x64 = xd.astype(np.float64)
        mu = x64.mean(axis=0)
        var = x64.var(axis=0)
        inv_std = 1.0 / np.sqrt(var + layer.eps)
        xhat = ((x64 - mu) * inv_std).astype(dt)
        m = layer.momentum
        layer.running_mean[:] = (1 - m) * layer.running_mean + m * mu
        layer.running_var[:] = (1 - m) * layer.running_var + m * var * n / (n - 1)
        inv_std = inv_std.astype(dt)
        gd = gamma.data

        def grad_x(g):
            dxhat = (g * gd).astype(np.float64)
            xh = xhat.astype(np.float64)
            dx = (n * dxhat - dxhat.sum(axis=0) - xh * (dxhat * xh).sum(axis=0)) * (inv_std / n)
            return dx.astype(dt)
    else:
        inv_std = (1.0 / np.sqrt(layer.running_var.astype(np.float64) + layer.eps)).astype(dt)
        xhat = (xd - layer.running_mean) * inv_std
        gd = gamma.data

        def grad_x(g):
            return g * gd * inv_std

    out = xhat * gamma.data + beta.data
    return _node(
        out,
        (
            (x, grad_x),
            (gamma, lambda g: (g * xhat).sum(axis=0, dtype=np.float64).astype(dt)),
            (beta, lambda g: g.sum(axis=0, dtype=np.float64).astype(dt)),
        ),
    )


@dataclass
class LstmParams:
    """Weights of an LSTM cell; gates are laid out [input, forget, candidate, output]."""

    w_input: Tensor
    w_hidden: Tensor
    bias: Tensor
    input_width: int = field(init=False)
    hidden_width: int = field(init=False)

    def __post_init__(self):
        self.input_width, four_h = self.w_input.shape
        if four_h % 4:
            raise DimensionError(f"LSTM input weights {self.w_input.shape}: gate width not divisible by 4")
        self.hidden_width = four_h // 4
        h = self.hidden_width
        if self.w_hidden.shape != (h, 4 * h) or self.bias.shape != (4 * h,):
            raise DimensionError(
                f"LSTM weight shapes inconsistent: {self.w_input.shape}, "
                f"{self.w_hidden.shape}, {self.bias.shape}"
            )

    @classmethod
    def init(cls, rng, input_width: int, hidden_width: int, dtype=DEFAULT_DTYPE) -> "LstmParams":
        h = hidden_width
        bias = np.zeros(4 * h, dtype=dtype)
        bias[h:2 * h] = 1.0
        return cls(
            Tensor(glorot_uniform(rng, input_width, 4 * h, dtype), requires_grad=True),
            Tensor(glorot_uniform(rng, h, 4 * h, dtype), requires_grad=True),
            Tensor(bias, requires_grad=True),
        )

    def zeros_state(self, batch: int, dtype=None) -> tuple[Tensor, Tensor]:
        dt = dtype or self.w_input.dtype
        z = np.zeros((batch, self.hidden_width), dtype=dt)
        return Tensor(z), Tensor(z.copy())


def lstm_step(x, h_prev, c_prev, params: LstmParams) -> tuple[Tensor, Tensor]:
    """One LSTM transition on a batch: returns ``(h, c)``."""
    x, h_prev, c_prev = as_tensor(x), as_tensor(h_prev), as_tensor(c_prev)
    if x.data.ndim != 2 or x.shape[1] != params.input_width:
        raise DimensionError(f"lstm_step: input {x.shape} vs input width {params.input_width}")
    expect = (x.shape[0], params.hidden_width)
    if h_prev.shape != expect or c_prev.shape != expect:
        raise DimensionError(
            f"lstm_step: state shapes {h_prev.shape}, {c_prev.shape} vs expected {expect}"
        )
    pre = add(affine(x, params.w_input, params.bias), matmul(h_prev, params.w_hidden))
    i, f, g, o = split(pre, 4, axis=1)
    i, f, g, o = sigmoid(i), sigmoid(f), tanh(g), sigmoid(o)
    c = add(mul(f, c_prev), mul(i, g))
    h = mul(o, tanh(c))
    return h, c


def lstm_encode(steps: list, params: LstmParams) -> Tensor:
    """Run the cell over a list of equal-batch inputs; return the last hidden state."""
    if not steps:
        raise ArgumentError("lstm_encode needs at least one step")
    first = as_tensor(steps[0])
    h, c = params.zeros_state(first.shape[0], first.dtype)
    for x in steps:
        h, c = lstm_step(x, h, c, params)
    return h
