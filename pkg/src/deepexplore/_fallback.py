"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures, same parameter layout. Used when the extension is not built
or when ``DEEPEXPLORE_PURE_PYTHON=1`` is set.
"""

import numpy as np


def _layers(params, dims):
    off = 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        W = params[off:off + fan_in * fan_out].reshape(fan_in, fan_out)
        off += fan_in * fan_out
        b = params[off:off + fan_out]
        off += fan_out
        yield W, b


def _forward_pass(params, dims, slope, table, rows):
    h = table[rows]
    pre = []
    layers = list(_layers(params, dims))
    for l, (W, b) in enumerate(layers):
        z = h @ W + b
        pre.append((h, z))
        if l < len(layers) - 1:
            h = np.where(z > 0.0, z, slope * z)
    return layers, pre


def mlp_forward(params, dims, slope, table, rows):
    if len(rows) == 0:
        return np.zeros((0, int(dims[-1])))
    _, pre = _forward_pass(params, dims, slope, table, rows)
    return pre[-1][1]


def mlp_td_grad(params, dims, slope, table, rows, actions, targets, reg, grad):
    B = len(rows)
    layers, pre = _forward_pass(params, dims, slope, table, rows)
    q = pre[-1][1]
    idx = np.arange(B)
    res = q[idx, actions] - targets
    loss = float(res @ res) / B
    d = np.zeros_like(q)
    d[idx, actions] = 2.0 * res / B

    grads = []
    for l in range(len(layers) - 1, -1, -1):
        h_in, _ = pre[l]
        W, _ = layers[l]
        grads.append((h_in.T @ d, d.sum(axis=0)))
        if l > 0:
            z_prev = pre[l - 1][1]
            d = (d @ W.T) * np.where(z_prev > 0.0, 1.0, slope)
    off = 0
    for gW, gb in reversed(grads):
        grad[off:off + gW.size] = gW.ravel()
        off += gW.size
        grad[off:off + gb.size] = gb
        off += gb.size

    if reg != 0.0:
        grad += 2.0 * reg * params
        loss += reg * float(params @ params)
    return loss


def adam_update(theta, g, m, v, alpha_k, beta1, beta2, eps, noise_scale, z):
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    denom = np.sqrt(v) + eps
    theta -= alpha_k * m / denom
    if z is not None:
        theta += np.sqrt(noise_scale * alpha_k / denom) * z
