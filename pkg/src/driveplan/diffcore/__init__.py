from .tensor import (
    DiffcoreError,
    NumericError,
    ShapeError,
    TapeError,
    Tape,
    Tensor,
    add,
    add_rowvec,
    attach,
    backward,
    block_mean_rows,
    clamp,
    concat,
    cos,
    custom_op,
    div,
    exp,
    gather_rows,
    huber,
    linear,
    log,
    masked_max_rows,
    matmul,
    mean_over,
    mul,
    multi_head_attention,
    narrow,
    neg,
    relu,
    reshape,
    sigmoid,
    sin,
    softmax,
    sqrt,
    sub,
    sum_all,
    sum_over,
    tanh,
    transpose,
)
from .params import FORMAT_VERSION, MAGIC, ParamStore, ParamStoreError
from .gradcheck import max_relative_error, numeric_gradient

__all__ = [
    "DiffcoreError", "NumericError", "ShapeError", "TapeError",
    "Tape", "Tensor", "attach", "backward",
    "add", "sub", "mul", "div", "neg", "matmul", "add_rowvec",
    "tanh", "sigmoid", "relu", "exp", "log", "sqrt", "cos", "sin",
    "huber", "clamp", "softmax", "concat", "narrow", "gather_rows", "linear",
    "block_mean_rows", "mean_over", "sum_over", "sum_all", "multi_head_attention",
    "masked_max_rows", "reshape", "transpose", "custom_op",
    "ParamStore", "ParamStoreError", "MAGIC", "FORMAT_VERSION",
    "numeric_gradient", "max_relative_error",
]
