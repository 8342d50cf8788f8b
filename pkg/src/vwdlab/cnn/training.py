"""Mini-batch SGD for :class:`DenseNet1D`."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from ..errors import ConfigInvalid, DivergenceDetected, SingleClassTraining
from .densenet import DenseNet1D, DenseNetConfig


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    momentum: float = 0.0
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ConfigInvalid("learning_rate must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ConfigInvalid("momentum must lie in [0, 1)")
        if self.batch_size < 2:
            raise ConfigInvalid("batch_size must be >= 2 (batch-norm statistics)")
        if self.epochs < 1:
            raise ConfigInvalid("epochs must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    network: DenseNet1D
    loss_trace: list[float]
    snapshots: list[dict] = field(default_factory=list)
    batch_losses: list[float] = field(default_factory=list)


def batch_slices(n: int, batch_size: int) -> list[slice]:
    """Consecutive batches; a trailing batch of one sample is merged into its predecessor."""
    starts = list(range(0, n, batch_size))
    if len(starts) > 1 and n - starts[-1] == 1:
        starts.pop()
    return [slice(a, b) for a, b in zip(starts, starts[1:] + [n])]


def train_cnn(
    x,
    y,
    train_cfg: TrainConfig = TrainConfig(),
    model_cfg: DenseNetConfig | None = None,
    rng: np.random.Generator | None = None,
    network: DenseNet1D | None = None,
    on_epoch: Callable[[int, DenseNet1D], None] | None = None,
    keep_snapshots: bool = True,
) -> TrainResult:
    """Train on network-ready inputs ``x`` of shape ``(n, channels, length)``.

    ``rng`` drives both initialisation and shuffling; by default it is derived from
    ``train_cfg.seed``. ``on_epoch(epoch, network)`` runs after each epoch (1-based).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape[0] != y.shape[0]:
        raise ConfigInvalid(f"{x.shape[0]} inputs but {y.shape[0]} labels")
    if np.unique(y).size < 2:
        raise SingleClassTraining("CNN training needs both classes")
    if rng is None:
        rng = np.random.default_rng(train_cfg.seed)
    if network is None:
        if model_cfg is None:
            model_cfg = DenseNetConfig(input_channels=x.shape[1], input_length=x.shape[2])
        network = DenseNet1D(model_cfg, rng)
    network.check_input(x[:1])

    lr, mu = train_cfg.learning_rate, train_cfg.momentum
    velocity = {k: np.zeros_like(v) for k, v in network.params.items()}
    result = TrainResult(network, [])
    for epoch in range(1, train_cfg.epochs + 1):
        order = rng.permutation(x.shape[0])
        total, seen = 0.0, 0
        for sl in batch_slices(x.shape[0], train_cfg.batch_size):
            idx = order[sl]
            loss, grads, _ = network.loss_and_grads(x[idx], y[idx])
            if not np.isfinite(loss):
                raise DivergenceDetected(f"non-finite loss at epoch {epoch}")
            steps = {}
            for name, g in grads.items():
                v = velocity[name]
                v *= mu
                v += g
                steps[name] = lr * v
            network.apply_update(steps)
            total += loss * idx.size
            seen += idx.size
            result.batch_losses.append(loss)
        result.loss_trace.append(total / seen)
        if keep_snapshots:
            result.snapshots.append(network.state())
        if on_epoch is not None:
            on_epoch(epoch, network)
    return result


def predict_instances(network: DenseNet1D, x) -> np.ndarray:
    """Eval-mode ARDS probability per instance."""
    return network.predict_proba(x)[:, 1]


def window_probability(instance_probs) -> float:
    """Window ARDS probability: mean of its instance probabilities."""
    p = np.asarray(instance_probs, dtype=np.float64)
    if p.size == 0:
        raise ConfigInvalid("a window needs at least one instance")
    return float(p.mean())


def predict_window(network: DenseNet1D, window_input) -> tuple[float, bool]:
    """``(probability, is_ards)`` for one window given its network-ready instances."""
    prob = window_probability(predict_instances(network, window_input))
    return prob, prob > 0.5
