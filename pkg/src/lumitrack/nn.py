"""Neural-net layers on the autodiff core: linear, conv2d, transposed conv,
average pooling and bilinear resampling.

Each layer is a single tape node with a vectorized backward; convolutions go
through im2col so the heavy lifting lands in BLAS. Feature maps use the
(N, C, H, W) layout.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, as_tensor, from_op, _accum


def _im2col(x, kh, kw, stride, pad):
    """(N,C,H,W) -> (N, C*kh*kw, OH*OW) patch matrix."""
    n, c, h, w = x.shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    col = np.empty((n, c, kh, kw, oh, ow), dtype=x.dtype)
    for i in range(kh):
        for j in range(kw):
            col[:, :, i, j] = x[:, :, i : i + stride * oh : stride,
                                j : j + stride * ow : stride]
    return col.reshape(n, c * kh * kw, oh * ow), oh, ow


def _col2im(col, x_shape, kh, kw, stride, pad):
    """Adjoint of _im2col: scatter patches back into (N,C,H,W)."""
    n, c, h, w = x_shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    col = col.reshape(n, c, kh, kw, oh, ow)
    buf = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=col.dtype)
    for i in range(kh):
        for j in range(kw):
            buf[:, :, i : i + stride * oh : stride,
                j : j + stride * ow : stride] += col[:, :, i, j]
    if pad:
        buf = buf[:, :, pad : pad + h, pad : pad + w]
    return buf


def conv2d(x, weight, bias=None, stride=1, pad=0):
    """2-D convolution (cross-correlation). weight: (OC, C, kh, kw)."""
    x, weight = as_tensor(x), as_tensor(weight)
    oc, c, kh, kw = weight.shape
    if x.ndim != 4 or x.shape[1] != c:
        raise ValueError(
            f"conv2d expects input (N,{c},H,W), got {x.shape}"
        )
    col, oh, ow = _im2col(x.data, kh, kw, stride, pad)
    wm = weight.data.reshape(oc, c * kh * kw)
    out = np.matmul(wm, col).reshape(x.shape[0], oc, oh, ow)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data.reshape(1, oc, 1, 1)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def bwd(g):
        gm = g.reshape(x.shape[0], oc, oh * ow)
        if weight.requires_grad:
            gw = np.matmul(gm, col.transpose(0, 2, 1)).sum(axis=0)
            _accum(weight, gw.reshape(weight.shape))
        if bias is not None and bias.requires_grad:
            _accum(bias, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gcol = np.matmul(wm.T, gm)
            _accum(x, _col2im(gcol, x.shape, kh, kw, stride, pad))

    return from_op(out, parents, bwd)


def conv_transpose2d(x, weight, bias=None, stride=1, pad=0):
    """Transposed convolution. weight: (IC, OC, kh, kw).

    Output spatial size: (H-1)*stride - 2*pad + k.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    ic, oc, kh, kw = weight.shape
    if x.ndim != 4 or x.shape[1] != ic:
        raise ValueError(
            f"conv_transpose2d expects input (N,{ic},H,W), got {x.shape}"
        )
    n, _, h, w = x.shape
    oh = (h - 1) * stride - 2 * pad + kh
    ow = (w - 1) * stride - 2 * pad + kw
    wm = weight.data.reshape(ic, oc * kh * kw)
    xm = x.data.reshape(n, ic, h * w)
    col = np.matmul(wm.T, xm)
    out = _col2im(col, (n, oc, oh, ow), kh, kw, stride, pad)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data.reshape(1, oc, 1, 1)

    parents = (x, weight) if bias is None else (x, weight, bias)

    def bwd(g):
        gcol, goh, gow = _im2col(g, kh, kw, stride, pad)
        assert (goh, gow) == (h, w)
        if weight.requires_grad:
            gw = np.matmul(xm, gcol.transpose(0, 2, 1)).sum(axis=0)
            _accum(weight, gw.reshape(weight.shape))
        if bias is not None and bias.requires_grad:
            _accum(bias, g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            gx = np.matmul(wm, gcol)
            _accum(x, gx.reshape(x.shape))

    return from_op(out, parents, bwd)


def linear(x, weight, bias=None):
    """x @ weight.T + bias; weight: (OUT, IN), x: (..., IN)."""
    x, weight = as_tensor(x), as_tensor(weight)
    out_features, in_features = weight.shape
    lead = x.shape[:-1]
    xm = x.data.reshape(-1, in_features)
    out = xm @ weight.data.T
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data

    parents = (x, weight) if bias is None else (x, weight, bias)

    def bwd(g):
        gm = g.reshape(-1, out_features)
        if weight.requires_grad:
            _accum(weight, gm.T @ xm)
        if bias is not None and bias.requires_grad:
            _accum(bias, gm.sum(axis=0))
        if x.requires_grad:
            _accum(x, (gm @ weight.data).reshape(x.shape))

    return from_op(out.reshape(lead + (out_features,)), parents, bwd)


def avg_pool2d(x, k):
    """k x k average pooling; spatial dims must divide k exactly."""
    x = as_tensor(x)
    n, c, h, w = x.shape
    if h % k or w % k:
        raise ValueError(f"avg_pool2d: {h}x{w} not divisible by {k}")
    v = x.data.reshape(n, c, h // k, k, w // k, k).mean(axis=(3, 5))

    def bwd(g):
        if x.requires_grad:
            gg = np.broadcast_to(
                g[:, :, :, None, :, None] / (k * k),
                (n, c, h // k, k, w // k, k),
            )
            _accum(x, gg.reshape(x.shape))

    return from_op(v, (x,), bwd)


def _interp_matrix(n_out, n_in, scale):
    """Row-interpolation matrix for bilinear x`scale` upsampling.

    Output sample i reads source coordinate (i + 0.5)/scale - 0.5 with edge
    clamping (half-pixel-center convention).
    """
    m = np.zeros((n_out, n_in))
    src = (np.arange(n_out) + 0.5) / scale - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(int)
    i1 = np.minimum(i0 + 1, n_in - 1)
    t = src - i0
    m[np.arange(n_out), i0] += 1.0 - t
    m[np.arange(n_out), i1] += t
    return m


def bilinear_upsample(x, scale):
    """Bilinear x`scale` upsampling of (N,C,H,W); scale is a positive integer."""
    x = as_tensor(x)
    if int(scale) != scale or scale < 1:
        raise ValueError(f"upsample scale must be a positive integer, got {scale}")
    scale = int(scale)
    n, c, h, w = x.shape
    ry = _interp_matrix(h * scale, h, scale)
    rx = _interp_matrix(w * scale, w, scale)
    # rows: (N,C,W,H) @ (H,HO) then cols: (N,C,HO,W) @ (W,WO)
    tmp = np.matmul(x.data.transpose(0, 1, 3, 2), ry.T).transpose(0, 1, 3, 2)
    out = np.matmul(tmp, rx.T)

    def bwd(g):
        if x.requires_grad:
            t1 = np.matmul(g, rx)
            gx = np.matmul(t1.transpose(0, 1, 3, 2), ry).transpose(0, 1, 3, 2)
            _accum(x, gx)

    return from_op(out, (x,), bwd)


def laplacian2d(x):
    """Discrete image Laplacian [0 1 0; 1 -4 1; 0 1 0] per channel, zero padding.

    The stencil is self-adjoint under zero padding, so backward reapplies it.
    """
    x = as_tensor(x)

    def stencil(a):
        out = -4.0 * a
        out[:, :, 1:, :] += a[:, :, :-1, :]
        out[:, :, :-1, :] += a[:, :, 1:, :]
        out[:, :, :, 1:] += a[:, :, :, :-1]
        out[:, :, :, :-1] += a[:, :, :, 1:]
        return out

    def bwd(g):
        if x.requires_grad:
            _accum(x, stencil(g))

    return from_op(stencil(x.data), (x,), bwd)


# ---- initialization ---------------------------------------------------------


def he_normal(rng, shape, fan_in):
    return Tensor(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape),
                  requires_grad=True)


def zeros_param(shape):
    return Tensor(np.zeros(shape), requires_grad=True)
