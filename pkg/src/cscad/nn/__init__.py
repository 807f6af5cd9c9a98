from .autograd import Tensor, concat
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (
    ACTIVATIONS,
    BatchNorm1d,
    GcnLayer,
    Linear,
    Lstm,
    glorot_uniform,
)
from .optim import Adam

__all__ = [
    "Tensor",
    "concat",
    "Linear",
    "BatchNorm1d",
    "GcnLayer",
    "Lstm",
    "ACTIVATIONS",
    "glorot_uniform",
    "Adam",
    "save_checkpoint",
    "load_checkpoint",
]
