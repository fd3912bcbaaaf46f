"""Layer zoo for the two fixed CNN architectures used by the pipeline.

Everything runs on plain numpy arrays in NCHW layout.  Each layer owns its
parameters and gradient buffers and implements an explicit backward pass;
there is no general autodiff graph.  Parameters default to float32 with
float64 accumulation in reductions; ``Sequential.cast`` switches the whole
stack to another dtype (used by the finite-difference gradient checker).
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Layer",
    "Conv2d",
    "BatchNorm2d",
    "ReLU",
    "ELU",
    "Flatten",
    "Linear",
    "Sequential",
    "ShapeError",
]


class ShapeError(ValueError):
    """Raised when an input does not match a layer's expected extents."""


def _check_4d(x: np.ndarray, who: str) -> None:
    if x.ndim != 4:
        raise ShapeError(f"{who}: expected a 4-d (N, C, H, W) array, got shape {x.shape}")


class Layer:
    """Base class: forward caches whatever backward needs."""

    name = "layer"

    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}

    def zero_grad(self) -> None:
        for g in self.grads().values():
            g[...] = 0.0

    def cast(self, dtype) -> None:
        pass


def conv_output_extent(size: int, kernel: int, stride: int, padding: int) -> int:
    out = (size + 2 * padding - kernel) // stride + 1
    if out <= 0:
        raise ShapeError(
            f"convolution arithmetic gives non-positive extent: "
            f"size={size} kernel={kernel} stride={stride} padding={padding}"
        )
    return out


def _im2col(x: np.ndarray, kernel: int, stride: int, padding: int) -> np.ndarray:
    """Unfold (N, C, H, W) into (N*OH*OW, C*k*k) patch rows."""
    n, c, h, w = x.shape
    oh = conv_output_extent(h, kernel, stride, padding)
    ow = conv_output_extent(w, kernel, stride, padding)
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = np.lib.stride_tricks.sliding_window_view(x, (kernel, kernel), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]  # (N, C, OH, OW, k, k)
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kernel * kernel)
    return np.ascontiguousarray(cols)


def _col2im(
    dcols: np.ndarray, x_shape: tuple, kernel: int, stride: int, padding: int
) -> np.ndarray:
    """Fold patch-row gradients back onto the input, accumulating overlaps."""
    n, c, h, w = x_shape
    oh = conv_output_extent(h, kernel, stride, padding)
    ow = conv_output_extent(w, kernel, stride, padding)
    dpad = np.zeros((n, c, h + 2 * padding, w + 2 * padding), dtype=dcols.dtype)
    d6 = dcols.reshape(n, oh, ow, c, kernel, kernel).transpose(0, 3, 1, 2, 4, 5)
    for i in range(kernel):
        for j in range(kernel):
            dpad[:, :, i : i + oh * stride : stride, j : j + ow * stride : stride] += d6[
                :, :, :, :, i, j
            ]
    if padding:
        return dpad[:, :, padding:-padding, padding:-padding]
    return dpad


def _shift_offsets(kernel: int, wp: int):
    return [(dy, dx, dy * wp + dx) for dy in range(kernel) for dx in range(kernel)]


def _conv3x3_s1p1_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Shift-and-GEMM convolution for the 3x3 / stride 1 / padding 1 case.

    Works on the flattened padded plane so no im2col matrix is ever built:
    for each kernel offset one (Cout x Cin) @ (Cin x H*Wp) GEMM accumulates
    into the output buffer.  The two pad columns per row receive junk that is
    sliced away at the end.
    """
    n, cin, h, w = x.shape
    cout = weight.shape[0]
    wp = w + 2
    # per-offset weight matrices must be contiguous or matmul leaves BLAS
    w_off = np.ascontiguousarray(weight.transpose(2, 3, 0, 1))
    out = np.empty((n, cout, h, w), dtype=x.dtype)
    tmp = np.empty((cout, h * wp), dtype=x.dtype)
    for b in range(n):
        # second bottom pad row keeps the largest shifted slice in bounds
        xp = np.pad(x[b], ((0, 0), (1, 2), (1, 1)))
        xf = xp.reshape(cin, -1)
        acc = np.zeros((cout, h * wp), dtype=x.dtype)
        for dy, dx, off in _shift_offsets(3, wp):
            np.matmul(w_off[dy, dx], xf[:, off : off + h * wp], out=tmp)
            acc += tmp
        out[b] = acc.reshape(cout, h, wp)[:, :, :w]
    out += bias[None, :, None, None]
    return out


def _conv3x3_s1p1_backward(
    x: np.ndarray, weight: np.ndarray, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Input/weight/bias gradients for the fast path, same shift-GEMM scheme."""
    n, cin, h, w = x.shape
    cout = weight.shape[0]
    wp = w + 2
    w_off_t = np.ascontiguousarray(weight.transpose(2, 3, 1, 0))  # (k, k, cin, cout)
    dweight = np.zeros((3, 3, cout, cin), dtype=np.float64)
    dbias = grad_out.sum(axis=(0, 2, 3), dtype=np.float64).astype(weight.dtype)
    dx = np.empty_like(x)
    tmp = np.empty((cin, h * wp), dtype=x.dtype)
    for b in range(n):
        xp = np.pad(x[b], ((0, 0), (1, 2), (1, 1)))
        xf = xp.reshape(cin, -1)
        # embed grad into the padded-width plane; junk columns must stay zero
        gbuf = np.zeros((cout, h, wp), dtype=x.dtype)
        gbuf[:, :, :w] = grad_out[b]
        gflat = gbuf.reshape(cout, -1)
        dxf = np.zeros((cin, (h + 3) * wp), dtype=x.dtype)
        for dy, dx_, off in _shift_offsets(3, wp):
            dweight[dy, dx_] += gflat @ xf[:, off : off + h * wp].T
            np.matmul(w_off_t[dy, dx_], gflat, out=tmp)
            dxf[:, off : off + h * wp] += tmp
        dx[b] = dxf.reshape(cin, h + 3, wp)[:, 1 : h + 1, 1 : w + 1]
    return dx, dweight.transpose(2, 3, 0, 1).astype(weight.dtype), dbias


class Conv2d(Layer):
    """2-d convolution (cross-correlation) via im2col + GEMM.

    The 3x3 / stride 1 / padding 1 configuration (the clustering network's
    only shape, at 240x240x100 the pipeline's hot spot) takes a shift-GEMM
    fast path instead; results are identical.  Weights use fan-in-scaled
    normal init, std = sqrt(2 / fan_in), which keeps activation scale stable
    under relu/elu even at large learning rates.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int = 3,
        stride: int = 1,
        padding: int = 0,
        rng: np.random.Generator | None = None,
        dtype=np.float32,
    ):
        rng = rng or np.random.default_rng()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel * kernel
        self.weight = rng.normal(
            0.0, math.sqrt(2.0 / fan_in), (out_channels, in_channels, kernel, kernel)
        ).astype(dtype)
        self.bias = np.zeros(out_channels, dtype=dtype)
        self.dweight = np.zeros_like(self.weight)
        self.dbias = np.zeros_like(self.bias)
        self._x = None
        self.name = "conv2d"

    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        _check_4d(x, "Conv2d")
        n, c, h, w = x.shape
        if c != self.in_channels:
            raise ShapeError(
                f"Conv2d: input has {c} channels, layer expects {self.in_channels}"
            )
        if self.kernel > h + 2 * self.padding or self.kernel > w + 2 * self.padding:
            raise ShapeError(
                f"Conv2d: kernel {self.kernel} exceeds padded input "
                f"{h + 2 * self.padding}x{w + 2 * self.padding}"
            )
        oh = conv_output_extent(h, self.kernel, self.stride, self.padding)
        ow = conv_output_extent(w, self.kernel, self.stride, self.padding)
        self._x = x
        if self._fast_path():
            return _conv3x3_s1p1_forward(x, self.weight, self.bias)
        cols = _im2col(x, self.kernel, self.stride, self.padding)
        w_mat = self.weight.reshape(self.out_channels, -1)
        out = cols @ w_mat.T + self.bias
        return out.reshape(n, oh, ow, self.out_channels).transpose(0, 3, 1, 2)

    def _fast_path(self) -> bool:
        return self.kernel == 3 and self.stride == 1 and self.padding == 1

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise RuntimeError("Conv2d.backward called before forward")
        x = self._x
        if self._fast_path():
            dx, dw, db = _conv3x3_s1p1_backward(x, self.weight, grad_out)
            self.dweight += dw
            self.dbias += db
            return dx
        n = x.shape[0]
        g_mat = grad_out.transpose(0, 2, 3, 1).reshape(-1, self.out_channels)
        g_mat = np.ascontiguousarray(g_mat)
        self.dbias += g_mat.sum(axis=0, dtype=np.float64).astype(self.bias.dtype)
        # im2col is rebuilt here rather than cached from forward: the unfolded
        # matrix is ~9x the input size and dominates peak memory at 240x240x100.
        cols = _im2col(x, self.kernel, self.stride, self.padding)
        self.dweight += (g_mat.T @ cols).reshape(self.weight.shape)
        dcols = g_mat @ self.weight.reshape(self.out_channels, -1)
        return _col2im(dcols, x.shape, self.kernel, self.stride, self.padding)

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def grads(self):
        return {"weight": self.dweight, "bias": self.dbias}

    def cast(self, dtype):
        self.weight = self.weight.astype(dtype)
        self.bias = self.bias.astype(dtype)
        self.dweight = np.zeros_like(self.weight)
        self.dbias = np.zeros_like(self.bias)


class BatchNorm2d(Layer):
    """Per-channel batch normalization over (N, H, W), current-batch stats only.

    The clustering network is only ever run in training mode and the DQN has
    no normalization layers, so no running averages are kept.  A zero-variance
    channel normalizes to zeros (epsilon keeps the division finite).
    """

    def __init__(self, channels: int, eps: float = 1e-5, dtype=np.float32):
        self.channels = channels
        self.eps = eps
        self.gain = np.ones(channels, dtype=dtype)
        self.shift = np.zeros(channels, dtype=dtype)
        self.dgain = np.zeros_like(self.gain)
        self.dshift = np.zeros_like(self.shift)
        self._xhat = None
        self._inv_std = None
        self.name = "batchnorm2d"

    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        _check_4d(x, "BatchNorm2d")
        n, c, h, w = x.shape
        if c != self.channels:
            raise ShapeError(f"BatchNorm2d: {c} channels, layer expects {self.channels}")
        if n * h * w < 2:
            raise ShapeError("BatchNorm2d: needs at least 2 values per channel")
        mean = x.mean(axis=(0, 2, 3), dtype=np.float64)
        var = x.var(axis=(0, 2, 3), dtype=np.float64)
        inv_std = (1.0 / np.sqrt(var + self.eps)).astype(x.dtype)
        xhat = (x - mean.astype(x.dtype)[:, None, None]) * inv_std[:, None, None]
        self._xhat = xhat
        self._inv_std = inv_std
        return self.gain[:, None, None] * xhat + self.shift[:, None, None]

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._xhat is None:
            raise RuntimeError("BatchNorm2d.backward called before forward")
        xhat = self._xhat
        m = grad_out.shape[0] * grad_out.shape[2] * grad_out.shape[3]
        self.dgain += np.sum(grad_out * xhat, axis=(0, 2, 3), dtype=np.float64).astype(
            self.dgain.dtype
        )
        self.dshift += np.sum(grad_out, axis=(0, 2, 3), dtype=np.float64).astype(
            self.dshift.dtype
        )
        dxhat = grad_out * self.gain[:, None, None]
        sum_dxhat = dxhat.sum(axis=(0, 2, 3), dtype=np.float64).astype(xhat.dtype)
        sum_dxhat_xhat = np.sum(dxhat * xhat, axis=(0, 2, 3), dtype=np.float64).astype(
            xhat.dtype
        )
        dx = (
            dxhat
            - sum_dxhat[:, None, None] / m
            - xhat * (sum_dxhat_xhat[:, None, None] / m)
        ) * self._inv_std[:, None, None]
        return dx

    def params(self):
        return {"gain": self.gain, "shift": self.shift}

    def grads(self):
        return {"gain": self.dgain, "shift": self.dshift}

    def cast(self, dtype):
        self.gain = self.gain.astype(dtype)
        self.shift = self.shift.astype(dtype)
        self.dgain = np.zeros_like(self.gain)
        self.dshift = np.zeros_like(self.shift)


class ReLU(Layer):
    name = "relu"

    def forward(self, x, training=True):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0).astype(x.dtype)

    def backward(self, grad_out):
        return np.where(self._mask, grad_out, 0.0).astype(grad_out.dtype)


class ELU(Layer):
    """elu(x) = x for x >= 0, exp(x) - 1 for x < 0."""

    name = "elu"

    def forward(self, x, training=True):
        neg = x < 0
        out = np.where(neg, np.expm1(x), x).astype(x.dtype)
        self._neg = neg
        self._out = out
        return out

    def backward(self, grad_out):
        # d/dx elu = 1 for x >= 0, exp(x) = elu(x) + 1 for x < 0
        deriv = np.where(self._neg, self._out + 1.0, 1.0)
        return (grad_out * deriv).astype(grad_out.dtype)


class Flatten(Layer):
    name = "flatten"

    def forward(self, x, training=True):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._shape)


class Linear(Layer):
    """Affine map y = x @ W + b with W of shape (in, out)."""

    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        rng = rng or np.random.default_rng()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = rng.normal(
            0.0, math.sqrt(2.0 / in_features), (in_features, out_features)
        ).astype(dtype)
        self.bias = np.zeros(out_features, dtype=dtype)
        self.dweight = np.zeros_like(self.weight)
        self.dbias = np.zeros_like(self.bias)
        self._x = None
        self.name = "linear"

    def forward(self, x, training=True):
        if x.ndim != 2:
            raise ShapeError(f"Linear: expected (N, F) input, got shape {x.shape}")
        if x.shape[1] != self.in_features:
            raise ShapeError(
                f"Linear: input has {x.shape[1]} features, layer expects {self.in_features}"
            )
        self._x = x
        return x @ self.weight + self.bias

    def backward(self, grad_out):
        if self._x is None:
            raise RuntimeError("Linear.backward called before forward")
        self.dweight += self._x.T @ grad_out
        self.dbias += grad_out.sum(axis=0, dtype=np.float64).astype(self.bias.dtype)
        return grad_out @ self.weight.T

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def grads(self):
        return {"weight": self.dweight, "bias": self.dbias}

    def cast(self, dtype):
        self.weight = self.weight.astype(dtype)
        self.bias = self.bias.astype(dtype)
        self.dweight = np.zeros_like(self.weight)
        self.dbias = np.zeros_like(self.bias)


class Sequential:
    """Ordered layer container with flat, stably named parameter access.

    Parameter names are ``"<index>.<layer-name>.<param>"`` and define the
    checkpoint record order.  A network instance is single-writer: training
    mutates it and must be externally serialized.
    """

    def __init__(self, layers: list[Layer]):
        self.layers = list(layers)

    def forward(self, x: np.ndarray, training: bool = True) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, training=training)
        return x

    __call__ = forward

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return grad_out

    def params(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for i, layer in enumerate(self.layers):
            for pname, arr in layer.params().items():
                out[f"{i}.{layer.name}.{pname}"] = arr
        return out

    def grads(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for i, layer in enumerate(self.layers):
            for pname, arr in layer.grads().items():
                out[f"{i}.{layer.name}.{pname}"] = arr
        return out

    def zero_grad(self) -> None:
        for layer in self.layers:
            layer.zero_grad()

    def cast(self, dtype) -> "Sequential":
        for layer in self.layers:
            layer.cast(dtype)
        return self

    def num_params(self) -> int:
        return sum(p.size for p in self.params().values())

    def set_params(self, values: dict[str, np.ndarray]) -> None:
        own = self.params()
        for name, arr in values.items():
            if name not in own:
                raise KeyError(f"unknown parameter {name!r}")
            if own[name].shape != arr.shape:
                raise ShapeError(
                    f"parameter {name!r}: checkpoint shape {arr.shape} != model {own[name].shape}"
                )
            own[name][...] = arr.astype(own[name].dtype)
