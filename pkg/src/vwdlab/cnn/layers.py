"""Forward/backward primitives for 1-D feature maps shaped ``(batch, channels, length)``.

Every ``*_forward`` returns ``(out, cache)``; the matching ``*_backward`` takes the upstream
gradient and that cache.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

BN_EPS = 1e-5


def conv_out_len(length, kernel, stride=1, pad=0):
    return (length + 2 * pad - kernel) // stride + 1


def conv1d_forward(x, w, stride=1, pad=0):
    B, C, L = x.shape
    O, C_w, K = w.shape
    assert C == C_w, "channel mismatch"
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad))) if pad else x
    L_out = conv_out_len(L, K, stride, pad)
    win = sliding_window_view(xp, K, axis=2)[:, :, : stride * (L_out - 1) + 1 : stride, :]
    cols = np.ascontiguousarray(win.transpose(0, 2, 1, 3)).reshape(B * L_out, C * K)
    out = (cols @ w.reshape(O, C * K).T).reshape(B, L_out, O).transpose(0, 2, 1)
    return np.ascontiguousarray(out), (cols, x.shape, w, stride, pad, L_out)


def conv1d_backward(dout, cache):
    cols, (B, C, L), w, stride, pad, L_out = cache
    O, _, K = w.shape
    d2 = dout.transpose(0, 2, 1).reshape(B * L_out, O)
    dw = (d2.T @ cols).reshape(O, C, K)
    dcols = (d2 @ w.reshape(O, C * K)).reshape(B, L_out, C, K).transpose(0, 2, 1, 3)
    dxp = np.zeros((B, C, L + 2 * pad))
    span = stride * (L_out - 1) + 1
    for k in range(K):
        dxp[:, :, k : k + span : stride] += dcols[:, :, :, k]
    return dxp[:, :, pad : pad + L], dw


def batchnorm_forward(x, gamma, beta, running_mean, running_var, train, momentum=0.1):
    """Per-channel batch norm; in train mode updates the running buffers in place."""
    if train:
        n = x.shape[0] * x.shape[2]
        mu = x.mean(axis=(0, 2))
        var = x.var(axis=(0, 2))
        running_mean *= 1 - momentum
        running_mean += momentum * mu
        running_var *= 1 - momentum
        running_var += momentum * var * n / max(n - 1, 1)
    else:
        mu, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mu[None, :, None]) * inv_std[None, :, None]
    out = gamma[None, :, None] * xhat + beta[None, :, None]
    return out, (xhat, inv_std, gamma, train)


def batchnorm_backward(dout, cache):
    xhat, inv_std, gamma, train = cache
    dgamma = (dout * xhat).sum(axis=(0, 2))
    dbeta = dout.sum(axis=(0, 2))
    dxhat = dout * gamma[None, :, None]
    if not train:
        return dxhat * inv_std[None, :, None], dgamma, dbeta
    n = dout.shape[0] * dout.shape[2]
    dx = (
        inv_std[None, :, None]
        / n
        * (n * dxhat - dxhat.sum(axis=(0, 2))[None, :, None] - xhat * (dxhat * xhat).sum(axis=(0, 2))[None, :, None])
    )
    return dx, dgamma, dbeta


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(dout, mask):
    return dout * mask


def maxpool1d_forward(x, kernel=3, stride=2, pad=1):
    B, C, L = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)), constant_values=-np.inf) if pad else x
    L_out = conv_out_len(L, kernel, stride, pad)
    win = sliding_window_view(xp, kernel, axis=2)[:, :, : stride * (L_out - 1) + 1 : stride, :]
    arg = win.argmax(axis=3)
    out = np.take_along_axis(win, arg[..., None], axis=3)[..., 0]
    return out, (arg, x.shape, kernel, stride, pad, L_out)


def maxpool1d_backward(dout, cache):
    arg, (B, C, L), kernel, stride, pad, L_out = cache
    dxp = np.zeros((B, C, L + 2 * pad))
    span = stride * (L_out - 1) + 1
    for k in range(kernel):
        dxp[:, :, k : k + span : stride] += dout * (arg == k)
    return dxp[:, :, pad : pad + L]


def avgpool1d_forward(x, kernel=2):
    B, C, L = x.shape
    L_out = L // kernel
    out = x[:, :, : L_out * kernel].reshape(B, C, L_out, kernel).mean(axis=3)
    return out, (x.shape, kernel)


def avgpool1d_backward(dout, cache):
    (B, C, L), kernel = cache
    L_out = dout.shape[2]
    dx = np.zeros((B, C, L))
    dx[:, :, : L_out * kernel] = np.repeat(dout / kernel, kernel, axis=2)
    return dx


def linear_forward(x, w, b):
    return x @ w.T + b, x


def linear_backward(dout, x, w):
    return dout @ w, dout.T @ x, dout.sum(axis=0)


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, y):
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    B = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    log_p = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -log_p[np.arange(B), y].mean()
    d = np.exp(log_p)
    d[np.arange(B), y] -= 1.0
    return float(loss), d / B
