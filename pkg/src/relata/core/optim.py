"""AdaGrad, dense and row-sparse."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from relata import kernels
from relata.core.autodiff import Tensor
from relata.errors import ArgumentError, DimensionError, NumericError


@dataclass
class AdaGradState:
    accumulator: np.ndarray
    lr: float = 0.01
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0 or self.eps <= 0:
            raise ArgumentError("AdaGrad learning rate and epsilon must be positive")

    @classmethod
    def like(cls, param: np.ndarray, lr: float = 0.01, eps: float = 1e-8) -> "AdaGradState":
        return cls(np.zeros_like(param), lr, eps)


def _data(param) -> np.ndarray:
    return param.data if isinstance(param, Tensor) else param


def adagrad_update(param, grad, state: AdaGradState) -> None:
    """Descend one AdaGrad step in place on ``param`` (an array or Tensor)."""
    p = _data(param)
    grad = np.asarray(grad, dtype=p.dtype)
    if grad.shape != p.shape or state.accumulator.shape != p.shape:
        raise DimensionError(
            f"adagrad_update: param {p.shape}, grad {grad.shape}, "
            f"accumulator {state.accumulator.shape}"
        )
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite gradient")
    kernels.adagrad_dense(p, grad, state.accumulator, state.lr, state.eps)


def adagrad_update_rows(param, rows, grad_rows, state: AdaGradState) -> None:
    """AdaGrad step restricted to ``param[rows]``; ``rows`` must be unique."""
    p = _data(param)
    rows = np.asarray(rows, dtype=np.int64)
    grad_rows = np.asarray(grad_rows, dtype=p.dtype)
    if grad_rows.shape != (rows.shape[0],) + p.shape[1:]:
        raise DimensionError(f"adagrad_update_rows: {rows.shape[0]} rows vs grad {grad_rows.shape}")
    if not np.all(np.isfinite(grad_rows)):
        raise NumericError("non-finite gradient")
    kernels.adagrad_rows(p, rows, grad_rows, state.accumulator, state.lr, state.eps)


class AdaGrad:
    """Holds one :class:`AdaGradState` per named parameter."""

    def __init__(self, lr: float = 0.01, eps: float = 1e-8):
        self.lr = lr
        self.eps = eps
        self.states: dict[str, AdaGradState] = {}

    def _state(self, name, p):
        st = self.states.get(name)
        if st is None:
            st = self.states[name] = AdaGradState.like(p, self.lr, self.eps)
        return st

    def step(self, name: str, param, grad) -> None:
        p = _data(param)
        adagrad_update(p, grad, self._state(name, p))

    def step_rows(self, name: str, param, rows, grad_rows) -> None:
        p = _data(param)
        adagrad_update_rows(p, rows, grad_rows, self._state(name, p))
