"""sklearn-compatible wrapper around the DenseNet training/prediction functions."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import ShapeMismatch
from .densenet import DenseNet1D, DenseNetConfig, load_network, save_network
from .gradcam import grad_cam_batch
from .inputs import InputScaler, build_input, channels_for
from .training import TrainConfig, train_cnn


class DenseNetClassifier(ClassifierMixin, BaseEstimator):
    """Per-instance ARDS classifier on ``(n, instance_length)`` flow instances.

    ``input_mode`` selects raw flow, the DC-centred magnitude spectrum or both as two
    channels. Inputs are standardised with statistics from the training set.
    """

    def __init__(
        self,
        input_mode="raw",
        blocks=(4, 4),
        growth_rate=8,
        stem_channels=16,
        learning_rate=0.001,
        momentum=0.0,
        batch_size=32,
        epochs=10,
        scaling="channel",
        random_state=0,
    ):
        self.input_mode = input_mode
        self.blocks = blocks
        self.growth_rate = growth_rate
        self.stem_channels = stem_channels
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.batch_size = batch_size
        self.epochs = epochs
        self.scaling = scaling
        self.random_state = random_state

    def model_config(self, length: int) -> DenseNetConfig:
        return DenseNetConfig(
            input_channels=channels_for(self.input_mode),
            input_length=length,
            stem_channels=self.stem_channels,
            blocks=tuple(self.blocks),
            growth_rate=self.growth_rate,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.momentum, self.batch_size, self.epochs, int(self.random_state))

    def fit(self, X, y, on_epoch=None, rng=None):
        """``on_epoch(epoch, self)`` lets callers score held-out data after every epoch."""
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        y = np.asarray(y, dtype=np.int64)
        raw = build_input(X, self.input_mode)
        self.scaler_ = InputScaler(self.scaling).fit(raw)
        cfg = self.model_config(X.shape[1])
        callback = None if on_epoch is None else (lambda epoch, _net: on_epoch(epoch, self))
        if rng is None:
            rng = np.random.default_rng(int(self.random_state))
        self.network_ = DenseNet1D(cfg, rng)
        result = train_cnn(
            self.scaler_.transform(raw), y, self.train_config(), rng=rng, network=self.network_,
            on_epoch=callback, keep_snapshots=False,
        )
        self.loss_trace_ = result.loss_trace
        return self

    def network_input(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ShapeMismatch(f"instances have {X.shape[1]} samples; model expects {self.n_features_in_}")
        return self.scaler_.transform(build_input(X, self.input_mode))

    def predict_proba(self, X):
        return self.network_.predict_proba(self.network_input(X))

    def predict(self, X):
        return (self.predict_proba(X)[:, 1] > 0.5).astype(np.int64)

    def window_proba(self, windows) -> np.ndarray:
        """Mean instance ARDS probability for each ``(n_instances, length)`` window."""
        windows = [np.asarray(w, dtype=np.float64) for w in windows]
        if not windows:
            return np.zeros(0)
        p = self.predict_proba(np.concatenate(windows))[:, 1]
        bounds = np.cumsum([0] + [w.shape[0] for w in windows])
        return np.array([p[a:b].mean() for a, b in zip(bounds[:-1], bounds[1:])])

    def randomized_copy(self, seed=0) -> "DenseNetClassifier":
        """Same configuration and input scaling, freshly initialised untrained weights."""
        check_is_fitted(self, "network_")
        other = DenseNetClassifier(**self.get_params())
        other.network_ = DenseNet1D(self.network_.config, np.random.default_rng(seed))
        other.scaler_ = self.scaler_
        other.loss_trace_ = []
        other.classes_ = self.classes_
        other.n_features_in_ = self.n_features_in_
        return other

    def grad_cam(self, X, target_class=1) -> np.ndarray:
        return grad_cam_batch(self.network_, self.network_input(X), target_class)

    def save(self, path):
        check_is_fitted(self, "network_")
        extra = {"estimator": self.get_params(), "scaling": self.scaler_.kind, "loss_trace": self.loss_trace_}
        extra["estimator"]["blocks"] = list(self.blocks)
        return save_network(self.network_, path, extra, self.scaler_.to_arrays())

    @classmethod
    def load(cls, path) -> "DenseNetClassifier":
        net, extra, aux = load_network(path)
        params = dict(extra["estimator"])
        params["blocks"] = tuple(params["blocks"])
        est = cls(**params)
        est.network_ = net
        est.scaler_ = InputScaler.from_arrays(extra["scaling"], aux["scaler_mean"], aux["scaler_scale"])
        est.loss_trace_ = extra.get("loss_trace", [])
        est.classes_ = np.array([0, 1])
        est.n_features_in_ = net.config.input_length
        return est
