"""1-D DenseNet with hand-written reverse-mode differentiation (float64)."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import BatchTooSmall, ConfigInvalid, ShapeMismatch, StaleCache
from . import layers as L


@dataclass(frozen=True)
class DenseNetConfig:
    input_channels: int = 1
    input_length: int = 224
    stem_channels: int = 16
    stem_kernel: int = 7
    blocks: tuple[int, ...] = (4, 4)
    growth_rate: int = 8
    compression: float = 0.5
    bn_momentum: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(int(b) for b in self.blocks))
        if min(self.input_channels, self.input_length, self.stem_channels, self.growth_rate) < 1:
            raise ConfigInvalid("all DenseNet sizes must be positive")
        if not self.blocks or min(self.blocks) < 1:
            raise ConfigInvalid("need at least one dense block with at least one layer")
        if not 0 < self.compression <= 1:
            raise ConfigInvalid("compression must lie in (0, 1]")
        if min(self.stage_lengths()) < 1:
            raise ConfigInvalid(f"input_length {self.input_length} too short for {len(self.blocks)} blocks")

    @classmethod
    def full_depth(cls, **kw) -> "DenseNetConfig":
        """Stem conv + 14 dense layers + 2 transitions + classifier = 18 weighted layers."""
        kw.setdefault("blocks", (5, 5, 4))
        return cls(**kw)

    def stage_lengths(self) -> list[int]:
        n = L.conv_out_len(self.input_length, self.stem_kernel, 2, self.stem_kernel // 2)
        n = L.conv_out_len(n, 3, 2, 1)
        out = [n]
        for _ in self.blocks[1:]:
            n //= 2
            out.append(n)
        return out

    @property
    def feature_length(self) -> int:
        return self.stage_lengths()[-1]

    def channel_plan(self) -> list[tuple[int, int]]:
        """``(channels entering, channels leaving)`` for each dense block."""
        c = self.stem_channels
        plan = []
        for i, n in enumerate(self.blocks):
            out = c + n * self.growth_rate
            plan.append((c, out))
            c = out if i == len(self.blocks) - 1 else max(1, int(out * self.compression))
        return plan

    @property
    def n_weighted_layers(self) -> int:
        return 1 + sum(self.blocks) + (len(self.blocks) - 1) + 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["blocks"] = list(self.blocks)
        return d


class DenseNet1D:
    """Parameters, buffers and the forward/backward graph of one network.

    ``version`` increments on every parameter update so that stale forward caches are
    rejected by :meth:`backward`.
    """

    def __init__(self, config: DenseNetConfig, rng: np.random.Generator | None = None):
        self.config = config
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self.version = 0
        self._init(rng if rng is not None else np.random.default_rng(0))

    # -- construction ---------------------------------------------------------
    def _conv(self, rng, name, out_c, in_c, k):
        bound = np.sqrt(6.0 / (in_c * k))
        self.params[name] = rng.uniform(-bound, bound, size=(out_c, in_c, k))

    def _bn(self, name, c):
        self.params[f"{name}.gamma"] = np.ones(c)
        self.params[f"{name}.beta"] = np.zeros(c)
        self.buffers[f"{name}.running_mean"] = np.zeros(c)
        self.buffers[f"{name}.running_var"] = np.ones(c)

    def _init(self, rng):
        cfg = self.config
        self._conv(rng, "stem.conv", cfg.stem_channels, cfg.input_channels, cfg.stem_kernel)
        self._bn("stem.bn", cfg.stem_channels)
        plan = cfg.channel_plan()
        for b, ((c_in, c_out), n) in enumerate(zip(plan, cfg.blocks)):
            c = c_in
            for i in range(n):
                self._bn(f"block{b}.layer{i}.bn", c)
                self._conv(rng, f"block{b}.layer{i}.conv", cfg.growth_rate, c, 3)
                c += cfg.growth_rate
            if b < len(cfg.blocks) - 1:
                self._bn(f"trans{b}.bn", c_out)
                self._conv(rng, f"trans{b}.conv", plan[b + 1][0], c_out, 1)
        c_final = plan[-1][1]
        self._bn("final.bn", c_final)
        bound = np.sqrt(6.0 / c_final)
        self.params["fc.w"] = rng.uniform(-bound, bound, size=(2, c_final))
        self.params["fc.b"] = np.zeros(2)

    def reinitialize(self, rng) -> "DenseNet1D":
        return DenseNet1D(self.config, rng)

    # -- helpers ----------------------------------------------------------------
    def _bn_fwd(self, name, x, train):
        p, b = self.params, self.buffers
        return L.batchnorm_forward(
            x, p[f"{name}.gamma"], p[f"{name}.beta"], b[f"{name}.running_mean"], b[f"{name}.running_var"],
            train, self.config.bn_momentum,
        )

    def _bn_relu_conv(self, name, x, train, stride=1, pad=0):
        h, c_bn = self._bn_fwd(f"{name}.bn", x, train)
        h, c_relu = L.relu_forward(h)
        h, c_conv = L.conv1d_forward(h, self.params[f"{name}.conv"], stride, pad)
        return h, (c_bn, c_relu, c_conv)

    def _bn_relu_conv_back(self, name, d, caches, grads):
        c_bn, c_relu, c_conv = caches
        d, grads[f"{name}.conv"] = L.conv1d_backward(d, c_conv)
        d = L.relu_backward(d, c_relu)
        d, grads[f"{name}.bn.gamma"], grads[f"{name}.bn.beta"] = L.batchnorm_backward(d, c_bn)
        return d

    def check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2 and self.config.input_channels == 1:
            x = x[:, None, :]
        cfg = self.config
        if x.ndim != 3 or x.shape[1:] != (cfg.input_channels, cfg.input_length):
            raise ShapeMismatch(
                f"expected input (batch, {cfg.input_channels}, {cfg.input_length}), got {x.shape}"
            )
        return x

    # -- graph ------------------------------------------------------------------
    def forward(self, x, train: bool = False):
        """Logits ``(batch, 2)`` and the activation cache needed by :meth:`backward`."""
        x = self.check_input(x)
        if train and x.shape[0] < 2:
            raise BatchTooSmall("train-mode forward needs at least 2 samples for batch statistics")
        cfg, p = self.config, self.params
        cache = {"version": self.version, "train": train, "batch": x.shape[0]}
        h, c_conv = L.conv1d_forward(x, p["stem.conv"], 2, cfg.stem_kernel // 2)
        h, c_bn = self._bn_fwd("stem.bn", h, train)
        h, c_relu = L.relu_forward(h)
        h, c_pool = L.maxpool1d_forward(h, 3, 2, 1)
        cache["stem"] = (c_conv, c_bn, c_relu, c_pool)
        for b, n in enumerate(cfg.blocks):
            for i in range(n):
                name = f"block{b}.layer{i}"
                y, cache[name] = self._bn_relu_conv(name, h, train, 1, 1)
                cache[name + ".split"] = h.shape[1]
                h = np.concatenate([h, y], axis=1)
            if b < len(cfg.blocks) - 1:
                h, c_t = self._bn_relu_conv(f"trans{b}", h, train)
                h, c_avg = L.avgpool1d_forward(h, 2)
                cache[f"trans{b}"] = (c_t, c_avg)
        cache["features"] = h
        h, c_bn = self._bn_fwd("final.bn", h, train)
        h, c_relu = L.relu_forward(h)
        length = h.shape[2]
        pooled = h.mean(axis=2)
        logits, c_fc = L.linear_forward(pooled, p["fc.w"], p["fc.b"])
        cache["head"] = (c_bn, c_relu, length, c_fc)
        return logits, cache

    def _check_cache(self, cache):
        if cache.get("version") != self.version:
            raise StaleCache(f"cache from parameter version {cache.get('version')}, network is at {self.version}")

    def head_backward(self, cache, dlogits, grads=None):
        """Gradient w.r.t. the last dense-block output for an upstream logit gradient."""
        self._check_cache(cache)
        grads = {} if grads is None else grads
        c_bn, c_relu, length, c_fc = cache["head"]
        dpooled, grads["fc.w"], grads["fc.b"] = L.linear_backward(dlogits, c_fc, self.params["fc.w"])
        d = np.repeat(dpooled[:, :, None] / length, length, axis=2)
        d = L.relu_backward(d, c_relu)
        d, grads["final.bn.gamma"], grads["final.bn.beta"] = L.batchnorm_backward(d, c_bn)
        return d

    def backward(self, cache, dlogits) -> dict[str, np.ndarray]:
        """Gradients of every parameter given the upstream gradient on the logits."""
        grads: dict[str, np.ndarray] = {}
        cfg = self.config
        d = self.head_backward(cache, dlogits, grads)
        for b in reversed(range(len(cfg.blocks))):
            if b < len(cfg.blocks) - 1:
                c_t, c_avg = cache[f"trans{b}"]
                d = L.avgpool1d_backward(d, c_avg)
                d = self._bn_relu_conv_back(f"trans{b}", d, c_t, grads)
            for i in reversed(range(cfg.blocks[b])):
                name = f"block{b}.layer{i}"
                split = cache[name + ".split"]
                d_keep, d_new = d[:, :split], d[:, split:]
                d = d_keep + self._bn_relu_conv_back(name, d_new, cache[name], grads)
        c_conv, c_bn, c_relu, c_pool = cache["stem"]
        d = L.maxpool1d_backward(d, c_pool)
        d = L.relu_backward(d, c_relu)
        d, grads["stem.bn.gamma"], grads["stem.bn.beta"] = L.batchnorm_backward(d, c_bn)
        _, grads["stem.conv"] = L.conv1d_backward(d, c_conv)
        return grads

    def loss_and_grads(self, x, y):
        """Train-mode forward, mean cross-entropy and parameter gradients."""
        logits, cache = self.forward(x, train=True)
        loss, dlogits = L.softmax_cross_entropy(logits, np.asarray(y, dtype=np.int64))
        return loss, self.backward(cache, dlogits), logits

    def predict_proba(self, x, batch_size: int = 256) -> np.ndarray:
        x = self.check_input(x)
        out = [L.softmax(self.forward(x[i : i + batch_size], train=False)[0]) for i in range(0, x.shape[0], batch_size)]
        return np.concatenate(out) if out else np.zeros((0, 2))

    def apply_update(self, steps: dict[str, np.ndarray]):
        for name, step in steps.items():
            self.params[name] -= step
        self.version += 1

    # -- state ------------------------------------------------------------------
    def state(self) -> dict[str, np.ndarray]:
        return {**{f"param:{k}": v.copy() for k, v in self.params.items()}, **{f"buffer:{k}": v.copy() for k, v in self.buffers.items()}}

    def load_state(self, state: dict[str, np.ndarray]):
        for key, value in state.items():
            kind, name = key.split(":", 1)
            target = self.params if kind == "param" else self.buffers
            if name not in target or target[name].shape != value.shape:
                raise ShapeMismatch(f"state entry {name!r} does not match the configuration")
            target[name] = np.array(value, dtype=np.float64)
        self.version += 1

    def copy(self) -> "DenseNet1D":
        other = DenseNet1D.__new__(DenseNet1D)
        other.config = self.config
        other.params = {k: v.copy() for k, v in self.params.items()}
        other.buffers = {k: v.copy() for k, v in self.buffers.items()}
        other.version = 0
        return other

    def n_parameters(self) -> int:
        return int(sum(v.size for v in self.params.values()))


def save_network(net: DenseNet1D, path, extra: dict | None = None, arrays: dict | None = None) -> Path:
    """``.npz`` with a JSON header (config + ``extra``), one array per parameter/buffer and
    any auxiliary ``arrays`` (stored under an ``aux__`` prefix)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"format": "vwdlab-densenet1d/1", "config": net.config.to_dict(), "extra": extra or {}}
    stored = {k.replace(":", "__", 1): v for k, v in net.state().items()}
    stored.update({f"aux__{k}": np.asarray(v) for k, v in (arrays or {}).items()})
    with open(path, "wb") as fh:
        np.savez(fh, __header__=np.array(json.dumps(header, sort_keys=True)), **stored)
    return path


def load_network(path) -> tuple[DenseNet1D, dict, dict]:
    """Inverse of :func:`save_network`: ``(network, extra, arrays)``."""
    with np.load(Path(path), allow_pickle=False) as data:
        header = json.loads(str(data["__header__"]))
        cfg = DenseNetConfig(**header["config"])
        net = DenseNet1D(cfg)
        state = {k.replace("__", ":", 1): data[k] for k in data.files if k.startswith(("param__", "buffer__"))}
        net.load_state(state)
        aux = {k[len("aux__") :]: data[k] for k in data.files if k.startswith("aux__")}
    net.version = 0
    return net, header.get("extra", {}), aux
