"""Minimal differentiable layer stack: autograd core, layers, ADAM, checkpoints."""

from .autograd import (
    GraphStateError,
    ShapeError,
    Tensor,
    concat,
    conv2d,
    dropout,
    gather_rows,
    matmul,
    maxpool2d,
    mean,
    relu,
    reshape,
    sigmoid,
    square,
    take_index,
    tanh,
    total,
)
from .checkpoint import CheckpointError, load_params, restore_params, save_params
from .layers import (
    Conv2d,
    ConvLSTMCell,
    Dense,
    Dropout,
    Layer,
    MultiKernelConv,
    conv2d_forward,
    convlstm_step,
    dropout_forward,
    maxpool_forward,
    multikernel_conv_forward,
    xavier_uniform,
)
from .optim import Adam, adam_step

__all__ = [
    "Adam",
    "CheckpointError",
    "Conv2d",
    "ConvLSTMCell",
    "Dense",
    "Dropout",
    "GraphStateError",
    "Layer",
    "MultiKernelConv",
    "ShapeError",
    "Tensor",
    "adam_step",
    "concat",
    "conv2d",
    "conv2d_forward",
    "convlstm_step",
    "dropout",
    "dropout_forward",
    "gather_rows",
    "load_params",
    "matmul",
    "maxpool2d",
    "maxpool_forward",
    "mean",
    "multikernel_conv_forward",
    "relu",
    "reshape",
    "restore_params",
    "save_params",
    "sigmoid",
    "square",
    "take_index",
    "tanh",
    "total",
    "xavier_uniform",
]
