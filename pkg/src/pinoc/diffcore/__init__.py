"""Array math with nested differentiation: reverse-mode parameter gradients
of scalars whose computation contains forward-mode coordinate jets."""

from .tensor import (
    GraphError,
    NumericError,
    Tensor,
    add,
    as_tensor,
    clear_grads,
    concat,
    constant,
    cos,
    div,
    exp,
    gate,
    grad_params,
    matmul,
    matvec,
    mul,
    neg,
    param,
    per_point_grad_norm_sq,
    repeat_rows,
    reshape,
    sin,
    square,
    stack,
    sub,
    take,
    tanh,
    tmean,
    tsum,
)
from .jets import (
    CoordJets,
    Jet2,
    jcos,
    jet_eval,
    jets_add,
    jets_affine,
    jets_chunk_dot,
    jets_gate,
    jets_mul,
    jets_scale,
    jets_sub,
    jets_tanh,
    jexp,
    jsin,
    jsquare,
    jtanh,
    lift_const,
    lift_coords,
)
from .gradcheck import check_gradient, finite_diff_grad

__all__ = [
    "GraphError",
    "NumericError",
    "Tensor",
    "add",
    "as_tensor",
    "clear_grads",
    "concat",
    "constant",
    "cos",
    "div",
    "exp",
    "gate",
    "grad_params",
    "matmul",
    "matvec",
    "mul",
    "neg",
    "param",
    "per_point_grad_norm_sq",
    "repeat_rows",
    "reshape",
    "sin",
    "square",
    "stack",
    "sub",
    "take",
    "tanh",
    "tmean",
    "tsum",
    "CoordJets",
    "Jet2",
    "jcos",
    "jet_eval",
    "jets_add",
    "jets_affine",
    "jets_chunk_dot",
    "jets_gate",
    "jets_mul",
    "jets_scale",
    "jets_sub",
    "jets_tanh",
    "jexp",
    "jsin",
    "jsquare",
    "jtanh",
    "lift_const",
    "lift_coords",
    "check_gradient",
    "finite_diff_grad",
]
