from .densenet import DenseNet1D, DenseNetConfig, load_network, save_network
from .estimator import DenseNetClassifier
from .gradcam import CamMap, average_cam, grad_cam
from .training import TrainConfig, predict_window, train_cnn

__all__ = [
    "CamMap",
    "DenseNet1D",
    "DenseNetClassifier",
    "DenseNetConfig",
    "TrainConfig",
    "average_cam",
    "grad_cam",
    "load_network",
    "predict_window",
    "save_network",
    "train_cnn",
]
