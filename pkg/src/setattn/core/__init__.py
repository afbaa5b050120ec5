from setattn.core.tape import Node, ShapeError, Tape, TapeError, backward, softmax_column
from setattn.core.mlp import MlpSpec, activation_forward, affine_forward, init_mlp, mlp_apply, mlp_forward

__all__ = [
    "MlpSpec",
    "Node",
    "ShapeError",
    "Tape",
    "TapeError",
    "activation_forward",
    "affine_forward",
    "backward",
    "init_mlp",
    "mlp_apply",
    "mlp_forward",
    "softmax_column",
]
