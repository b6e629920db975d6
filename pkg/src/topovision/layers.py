"""From-scratch neural building blocks: valid convolution, pooling,
activations, dropout, and the softmax cross-entropy head.

Everything is float64 and batched with shape (batch, channels, h, w) for
maps and (batch, features) for vectors.  Each forward returns a cache
consumed by the matching backward; backwards return exact analytic
gradients (verified against finite differences in the test suite).
"""

import numpy as np

LEAKY_SLOPE = 0.01

ACTIVATIONS = ("relu", "leaky_relu", "elu")

POOL_KINDS = ("max", "average")


def activation_forward(name, a):
    """Apply the named activation to pre-activations ``a``."""
    if name == "relu":
        return np.maximum(a, 0.0)
    if name == "leaky_relu":
        return np.where(a > 0.0, a, LEAKY_SLOPE * a)
    if name == "elu":
        return np.where(a > 0.0, a, np.expm1(np.minimum(a, 0.0)))
    raise ValueError(f"unknown activation {name!r}; expected one of {ACTIVATIONS}")


def activation_backward(name, a, grad_out):
    """Gradient through the activation given the pre-activations."""
    if name == "relu":
        return grad_out * (a > 0.0)
    if name == "leaky_relu":
        return grad_out * np.where(a > 0.0, 1.0, LEAKY_SLOPE)
    if name == "elu":
        return grad_out * np.where(a > 0.0, 1.0, np.exp(np.minimum(a, 0.0)))
    raise ValueError(f"unknown activation {name!r}; expected one of {ACTIVATIONS}")


def uniform_init(rng, shape, fan_in):
    """Uniform(-r, r) with r = 1/sqrt(fan_in)."""
    r = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-r, r, size=shape)


def _im2col(x, k):
    b, c, h, w = x.shape
    out_h, out_w = h - k + 1, w - k + 1
    windows = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(2, 3))
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(b, out_h * out_w, c * k * k)
    return np.ascontiguousarray(cols), out_h, out_w


def conv_forward(x, weights, bias):
    """Valid cross-correlation, stride 1: (b, c_in, h, w) -> (b, c_out, h', w')."""
    c_out, c_in, k, _ = weights.shape
    b, c, h, w = x.shape
    if c != c_in:
        raise ValueError(f"input has {c} channels but kernel expects {c_in}")
    if h < k or w < k:
        raise ValueError(f"input {h}x{w} is smaller than the {k}x{k} kernel")
    cols, out_h, out_w = _im2col(x, k)
    flat = cols @ weights.reshape(c_out, -1).T + bias
    out = flat.transpose(0, 2, 1).reshape(b, c_out, out_h, out_w)
    cache = (x.shape, cols, weights.shape)
    return out, cache


def conv_backward(grad_out, cache, weights):
    """Gradients of conv_forward: returns (dx, dweights, dbias)."""
    x_shape, cols, _ = cache
    b, c_out, out_h, out_w = grad_out.shape
    grad_flat = grad_out.reshape(b, c_out, out_h * out_w).transpose(0, 2, 1)
    dweights = np.einsum("bpc,bpk->ck", grad_flat, cols).reshape(weights.shape)
    dbias = grad_out.sum(axis=(0, 2, 3))
    dcols = grad_flat @ weights.reshape(c_out, -1)
    dx = _col2im(dcols, x_shape, weights.shape[2])
    return dx, dweights, dbias


def _col2im(dcols, x_shape, k):
    b, c, h, w = x_shape
    out_h, out_w = h - k + 1, w - k + 1
    dcols = dcols.reshape(b, out_h, out_w, c, k, k)
    dx = np.zeros(x_shape, dtype=np.float64)
    for di in range(k):
        for dj in range(k):
            dx[:, :, di : di + out_h, dj : dj + out_w] += dcols[
                :, :, :, :, di, dj
            ].transpose(0, 3, 1, 2)
    return dx


def pool_forward(x, size, kind):
    """Non-overlapping pooling with stride = size; trailing rows/cols that
    do not fill a window are dropped (floor division shapes)."""
    if kind not in POOL_KINDS:
        raise ValueError(f"unknown pooling kind {kind!r}; expected one of {POOL_KINDS}")
    b, c, h, w = x.shape
    out_h, out_w = h // size, w // size
    if out_h < 1 or out_w < 1:
        raise ValueError(f"input {h}x{w} is smaller than the {size}x{size} pool window")
    trimmed = x[:, :, : out_h * size, : out_w * size]
    windows = trimmed.reshape(b, c, out_h, size, out_w, size)
    flat = windows.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, out_h, out_w, size * size)
    if kind == "max":
        argmax = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]
        cache = (x.shape, size, kind, argmax)
    else:
        out = flat.mean(axis=-1)
        cache = (x.shape, size, kind, None)
    return out, cache


def pool_backward(grad_out, cache):
    x_shape, size, kind, argmax = cache
    b, c, h, w = x_shape
    out_h, out_w = h // size, w // size
    dflat = np.zeros((b, c, out_h, out_w, size * size), dtype=np.float64)
    if kind == "max":
        np.put_along_axis(dflat, argmax[..., None], grad_out[..., None], axis=-1)
    else:
        dflat[:] = (grad_out / (size * size))[..., None]
    dwindows = dflat.reshape(b, c, out_h, out_w, size, size).transpose(0, 1, 2, 4, 3, 5)
    dx = np.zeros(x_shape, dtype=np.float64)
    dx[:, :, : out_h * size, : out_w * size] = dwindows.reshape(
        b, c, out_h * size, out_w * size
    )
    return dx


def dropout_forward(x, p, rng, training):
    """Inverted dropout; identity at inference or p == 0, all-zero at p >= 1."""
    if not training or p <= 0.0:
        return x, None
    if p >= 1.0:
        return np.zeros_like(x), (np.zeros(x.shape, dtype=bool), 0.0)
    mask = rng.uniform(size=x.shape) >= p
    scale = 1.0 / (1.0 - p)
    return x * mask * scale, (mask, scale)


def dropout_backward(grad_out, cache):
    if cache is None:
        return grad_out
    mask, scale = cache
    return grad_out * mask * scale


def softmax(logits):
    """Row-wise stable softmax."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over the batch.

    ``labels`` are integer class indices.  Returns (loss, probabilities,
    dlogits) where dlogits is already divided by the batch size.
    """
    b = logits.shape[0]
    shifted = logits - logits.max(axis=-1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    loss = -float(log_probs[np.arange(b), labels].mean())
    probs = np.exp(log_probs)
    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b
    return loss, probs, dlogits
