from .layers import Fc, Lstm, concat, fc_forward, lstm_forward, sigmoid, softplus
from .adam import AdamState, adam_step
from .training import TrainConfig, TrainResult, train
from .gradcheck import grad_check
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "Fc", "Lstm", "concat", "fc_forward", "lstm_forward", "sigmoid", "softplus",
    "AdamState", "adam_step", "TrainConfig", "TrainResult", "train",
    "grad_check", "load_checkpoint", "save_checkpoint",
]
