"""Small reverse-mode autodiff engine with the layers the estimators need."""

from .functional import (batch_norm, channel_scale, conv1d, global_avg_pool, linear, mse_loss, relu, reshape,
                         sigmoid, weighted_mse_loss)
from .layers import (Attention, BatchNorm, Conv1D, Dense, Flatten, GlobalAvgPool, Layer, ReLU, Reshape, Sigmoid,
                     xavier_uniform)
from .model import Model, load_checkpoint, save_checkpoint
from .optim import Adam, AdamState, adam_step
from .tensor import NonFiniteError, Tensor

__all__ = [
    "Tensor", "NonFiniteError",
    "conv1d", "linear", "batch_norm", "relu", "sigmoid", "global_avg_pool", "channel_scale", "reshape",
    "mse_loss", "weighted_mse_loss",
    "Layer", "Conv1D", "Dense", "BatchNorm", "ReLU", "Sigmoid", "GlobalAvgPool", "Attention", "Reshape", "Flatten",
    "xavier_uniform", "Model", "save_checkpoint", "load_checkpoint", "Adam", "AdamState", "adam_step",
]
