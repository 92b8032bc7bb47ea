"""Minimal reverse-mode autodiff with the kernels the detector needs."""
from .checkpoint import dumps as checkpoint_dumps, loads as checkpoint_loads
from .core import DiffArray, Graph, add, constant, index, mul, parameter, reshape, scale, total, transpose
from .gradcheck import gradient_check
from .nn import (affine, conv2d, global_avg_pool, l1_loss, log_softmax, max_pool2d, relu, roi_pool,
                 smooth_l1_loss, softmax, softmax_cross_entropy)
from .optim import SGD, sgd_step, step_lr

__all__ = [
    "DiffArray", "Graph", "add", "constant", "index", "mul", "parameter", "reshape", "scale", "total",
    "transpose", "gradient_check", "affine", "conv2d", "global_avg_pool", "l1_loss", "log_softmax",
    "max_pool2d", "relu", "roi_pool", "smooth_l1_loss", "softmax", "softmax_cross_entropy", "SGD",
    "sgd_step", "step_lr", "checkpoint_dumps", "checkpoint_loads",
]
