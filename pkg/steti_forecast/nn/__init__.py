from .activations import sigmoid, tanh
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .layers import LstmParams, LstmState, bilstm_forward, lstm_cell_forward, lstm_layer_forward
from .model import Architecture, ModelParams, backward, init_params, model_forward, predict
from .optimizers import Adadelta, Adam, BaseOptimizer, RMSprop, create_optimizer
from .training import EarlyStopping, TrainingHistory, train

__all__ = [
    "Adadelta",
    "Adam",
    "Architecture",
    "BaseOptimizer",
    "Checkpoint",
    "EarlyStopping",
    "LstmParams",
    "LstmState",
    "ModelParams",
    "RMSprop",
    "TrainingHistory",
    "backward",
    "bilstm_forward",
    "create_optimizer",
    "init_params",
    "load_checkpoint",
    "lstm_cell_forward",
    "lstm_layer_forward",
    "model_forward",
    "predict",
    "save_checkpoint",
    "sigmoid",
    "tanh",
    "train",
]
