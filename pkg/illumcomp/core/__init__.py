"""
Core tensor package: dense arrays, tape-based differentiation, image ops.
"""

from illumcomp.core.tensor import (
    OpNode,
    Tape,
    Tensor,
    absolute,
    add,
    as_tensor,
    concat,
    div,
    mean_all,
    mul,
    relu,
    reshape,
    safe_div,
    stack_mean,
    sub,
    sum_all,
    tanh,
)
from illumcomp.core.ops import bilinear_sample, blend, box_filter, conv2d, upsample2x
from illumcomp.core.gradcheck import GradCheckReport, grad_check

__all__ = [
    "OpNode",
    "Tape",
    "Tensor",
    "absolute",
    "add",
    "as_tensor",
    "concat",
    "div",
    "mean_all",
    "mul",
    "relu",
    "reshape",
    "safe_div",
    "stack_mean",
    "sub",
    "sum_all",
    "tanh",
    "bilinear_sample",
    "blend",
    "box_filter",
    "conv2d",
    "upsample2x",
    "GradCheckReport",
    "grad_check",
]
