"""Numeric substrate: autodiff tensors, layers, AdaGrad and truncated SVD."""

from relata.core.autodiff import (
    Tensor,
    add,
    affine,
    as_tensor,
    backward,
    concat,
    dot,
    log_sigmoid,
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
from relata.core.nn import BatchNormLayer, Linear, LstmParams, batch_norm, lstm_encode, lstm_step
from relata.core.optim import AdaGrad, AdaGradState, adagrad_update, adagrad_update_rows
from relata.core.svd import truncated_svd

__all__ = [
    "AdaGrad",
    "AdaGradState",
    "BatchNormLayer",
    "Linear",
    "LstmParams",
    "Tensor",
    "adagrad_update",
    "adagrad_update_rows",
    "add",
    "affine",
    "as_tensor",
    "backward",
    "batch_norm",
    "concat",
    "dot",
    "log_sigmoid",
    "lstm_encode",
    "lstm_step",
    "matmul",
    "mean",
    "mul",
    "neg",
    "reshape",
    "scale",
    "sigmoid",
    "split",
    "sub",
    "sum_",
    "take",
    "tanh",
    "truncated_svd",
]
