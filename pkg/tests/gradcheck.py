"""Central finite-difference check shared by the unit and acceptance tests."""

import numpy as np

from vwdlab.cnn.layers import softmax_cross_entropy

LAYER_TYPES = {
    "conv": lambda name: name.endswith(".conv"),
    "affine": lambda name: name.startswith("fc."),
    "batchnorm": lambda name: name.endswith(".gamma") or name.endswith(".beta"),
}


def loss_at(net, x, y):
    logits, _ = net.forward(x, train=True)
    return softmax_cross_entropy(logits, y)[0]


def sample_coords(net, layer_type, n, rng):
    """``n`` (name, flat index) pairs drawn across every tensor of one layer type."""
    names = [k for k in sorted(net.params) if LAYER_TYPES[layer_type](k)]
    sizes = np.array([net.params[k].size for k in names])
    flat = rng.choice(sizes.sum(), size=min(n, sizes.sum()), replace=False)
    bounds = np.cumsum(sizes)
    out = []
    for f in flat:
        t = int(np.searchsorted(bounds, f, side="right"))
        out.append((names[t], int(f - (bounds[t - 1] if t else 0))))
    return out


def max_relative_error(net, x, y, coords, eps=1e-5):
    _, grads, _ = net.loss_and_grads(x, y)
    worst = 0.0
    for name, i in coords:
        p = net.params[name].reshape(-1)
        old = p[i]
        p[i] = old + eps
        up = loss_at(net, x, y)
        p[i] = old - eps
        down = loss_at(net, x, y)
        p[i] = old
        numeric = (up - down) / (2 * eps)
        analytic = grads[name].reshape(-1)[i]
        denom = max(abs(numeric) + abs(analytic), 1e-8)
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst
