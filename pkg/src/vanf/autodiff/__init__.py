from .gradcheck import GradCheckReport, grad_check
from .tensor import (
    Tape,
    Tensor,
    abs_,
    active_tape,
    add,
    bilinear_sample,
    broadcast_to,
    clip,
    composite_rays,
    concat,
    conv2d,
    default_dtype,
    div,
    exp,
    getitem,
    log,
    matmul,
    mean,
    mul,
    neg,
    quadrature_weights,
    relu,
    no_grad,
    reshape,
    transpose,
    set_default_dtype,
    sigmoid,
    softplus,
    sub,
    sum_,
    tanh,
    upsample_nearest2x,
)

__all__ = [
    "GradCheckReport",
    "Tape",
    "Tensor",
    "abs_",
    "active_tape",
    "add",
    "bilinear_sample",
    "broadcast_to",
    "clip",
    "composite_rays",
    "concat",
    "conv2d",
    "default_dtype",
    "div",
    "exp",
    "getitem",
    "grad_check",
    "log",
    "matmul",
    "mean",
    "mul",
    "neg",
    "quadrature_weights",
    "relu",
    "no_grad",
    "reshape",
    "transpose",
    "set_default_dtype",
    "sigmoid",
    "softplus",
    "sub",
    "sum_",
    "tanh",
    "upsample_nearest2x",
]
