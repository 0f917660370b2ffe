"""Layer types for complex-valued networks.

Each layer knows its forward pass, its output shape, and a reverse-mode
``grad_step`` that pulls a Wirtinger cogradient pair from its output back to
its input. The chain rule used throughout is the CR-calculus one for
h = f(g(y)):

    dh/dy    = f_x * g_y    + f_xbar * conj(g_ybar)
    dh/dybar = f_x * g_ybar + f_xbar * conj(g_y)

Pointwise layers expose their real-axis partials so that both the gradient
path and the contribution path can derive what they need from one place.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeMismatchError, as_ctensor


def cmaxpool_window(vals: np.ndarray) -> complex:
    """Element of maximal magnitude in a window; ties go to the lowest flat index."""
    vals = np.asarray(vals).ravel()
    if vals.size == 0:
        raise ValueError("empty pooling window")
    return complex(vals[int(np.argmax(np.abs(vals)))])


class Layer:
    """Base class; subclasses fill in kind, shapes, forward and grad_step."""

    kind: str = ""

    def out_shape(self, in_shape: tuple) -> tuple:
        raise NotImplementedError

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_step(self, dz, dzb, y):
        """Pull (dz, dzb) w.r.t. this layer's output back to its input y."""
        raise NotImplementedError

    def params(self) -> dict:
        return {}

    def weights(self) -> dict:
        return {}


class PointwiseLayer(Layer):
    """Elementwise layer defined by f(z) and its partials along both real axes."""

    def apply(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def d_re(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def d_im(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def out_shape(self, in_shape):
        return tuple(in_shape)

    def forward(self, x):
        return self.apply(x)

    def wirtinger_derivs(self, z):
        dre = self.d_re(z)
        dim = self.d_im(z)
        return 0.5 * (dre - 1j * dim), 0.5 * (dre + 1j * dim)

    def grad_step(self, dz, dzb, y):
        gz, gzb = self.wirtinger_derivs(y)
        return gz * dz + np.conj(gzb) * dzb, gzb * dz + np.conj(gz) * dzb


class CReLU(PointwiseLayer):
    """Independent rectification of real and imaginary parts (projection onto C_1)."""

    kind = "crelu"

    def apply(self, z):
        return np.maximum(z.real, 0.0) + 1j * np.maximum(z.imag, 0.0)

    def d_re(self, z):
        return (z.real > 0).astype(np.complex128)

    def d_im(self, z):
        return 1j * (z.imag > 0).astype(np.complex128)


class ZReLU(PointwiseLayer):
    """Keep z only if strictly inside the first quadrant, else zero."""

    kind = "zrelu"

    @staticmethod
    def mask(z):
        return (z.real > 0) & (z.imag > 0)

    def apply(self, z):
        return np.where(self.mask(z), z, 0.0 + 0.0j)

    def d_re(self, z):
        return self.mask(z).astype(np.complex128)

    def d_im(self, z):
        return 1j * self.mask(z).astype(np.complex128)


class RealPart(PointwiseLayer):
    kind = "real_part"

    def apply(self, z):
        return z.real.astype(np.complex128)

    def d_re(self, z):
        return np.ones(z.shape, dtype=np.complex128)

    def d_im(self, z):
        return np.zeros(z.shape, dtype=np.complex128)


class Magnitude(PointwiseLayer):
    kind = "magnitude"

    def apply(self, z):
        return np.abs(z).astype(np.complex128)

    def d_re(self, z):
        mag = np.abs(z)
        safe = np.where(mag > 0, mag, 1.0)
        return np.where(mag > 0, z.real / safe, 0.0).astype(np.complex128)

    def d_im(self, z):
        mag = np.abs(z)
        safe = np.where(mag > 0, mag, 1.0)
        return np.where(mag > 0, z.imag / safe, 0.0).astype(np.complex128)


@dataclass
class Flatten(Layer):
    kind = "flatten"

    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x):
        return x.reshape(-1)

    def grad_step(self, dz, dzb, y):
        return dz.reshape(y.shape), dzb.reshape(y.shape)


@dataclass
class ComplexLinear(Layer):
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    kind = "complex_linear"

    def __post_init__(self):
        self.weight = as_ctensor(self.weight)
        self.bias = as_ctensor(self.bias)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeMismatchError(
                f"linear weight {self.weight.shape} and bias {self.bias.shape} inconsistent"
            )

    def out_shape(self, in_shape):
        if tuple(in_shape) != (self.weight.shape[1],):
            raise ShapeMismatchError(
                f"linear layer expects input {(self.weight.shape[1],)}, got {tuple(in_shape)}"
            )
        return (self.weight.shape[0],)

    def forward(self, x):
        return self.weight @ x + self.bias

    def grad_step(self, dz, dzb, y):
        return self.weight.T @ dz, self.weight.conj().T @ dzb

    def weight_grad(self, dzb, y):
        """Gradients d(loss)/d(conj(W)) and d(loss)/d(conj(b)) for a real loss."""
        return np.outer(dzb, np.conj(y)), dzb.copy()

    def params(self):
        return {
            "in_features": int(self.weight.shape[1]),
            "out_features": int(self.weight.shape[0]),
        }

    def weights(self):
        return {"weight": self.weight, "bias": self.bias}


@dataclass
class ComplexConv2d(Layer):
    kernel: np.ndarray  # (outC, inC, kh, kw)
    bias: np.ndarray  # (outC,)
    stride: tuple = (1, 1)
    padding: tuple = (0, 0)
    kind = "complex_conv2d"
    _matrix_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.kernel = as_ctensor(self.kernel)
        self.bias = as_ctensor(self.bias)
        self.stride = (int(self.stride[0]), int(self.stride[1]))
        self.padding = (int(self.padding[0]), int(self.padding[1]))
        if self.kernel.ndim != 4 or self.bias.shape != (self.kernel.shape[0],):
            raise ShapeMismatchError(
                f"conv kernel {self.kernel.shape} and bias {self.bias.shape} inconsistent"
            )

    def out_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.kernel.shape[1]:
            raise ShapeMismatchError(
                f"conv layer expects {self.kernel.shape[1]} input channels, got shape {tuple(in_shape)}"
            )
        _, h, w = in_shape
        kh, kw = self.kernel.shape[2:]
        sh, sw = self.stride
        ph, pw = self.padding
        ho = (h + 2 * ph - kh) // sh + 1
        wo = (w + 2 * pw - kw) // sw + 1
        if ho < 1 or wo < 1:
            raise ShapeMismatchError(f"conv kernel larger than padded input {tuple(in_shape)}")
        return (self.kernel.shape[0], ho, wo)

    def as_matrix(self, in_shape):
        """Dense matrix A with forward(x) == (A @ x.ravel() + bias_vec).reshape(out).

        Built once per input shape; desk-scale inputs keep this small.
        """
        key = tuple(in_shape)
        if key in self._matrix_cache:
            return self._matrix_cache[key]
        out_c, ho, wo = self.out_shape(in_shape)
        in_c, h, w = in_shape
        kh, kw = self.kernel.shape[2:]
        sh, sw = self.stride
        ph, pw = self.padding
        a = np.zeros((out_c * ho * wo, in_c * h * w), dtype=np.complex128)
        bias_vec = np.repeat(self.bias, ho * wo)
        for oc in range(out_c):
            for i in range(ho):
                for j in range(wo):
                    row = (oc * ho + i) * wo + j
                    for ic in range(in_c):
                        for u in range(kh):
                            for v in range(kw):
                                ii = i * sh + u - ph
                                jj = j * sw + v - pw
                                if 0 <= ii < h and 0 <= jj < w:
                                    col = (ic * h + ii) * w + jj
                                    a[row, col] = self.kernel[oc, ic, u, v]
        self._matrix_cache[key] = (a, bias_vec, (out_c, ho, wo))
        return self._matrix_cache[key]

    def forward(self, x):
        a, bias_vec, oshape = self.as_matrix(x.shape)
        return (a @ x.ravel() + bias_vec).reshape(oshape)

    def grad_step(self, dz, dzb, y):
        a, _, _ = self.as_matrix(y.shape)
        dy = (a.T @ dz.ravel()).reshape(y.shape)
        dyb = (a.conj().T @ dzb.ravel()).reshape(y.shape)
        return dy, dyb

    def params(self):
        return {
            "in_channels": int(self.kernel.shape[1]),
            "out_channels": int(self.kernel.shape[0]),
            "kernel_size": [int(self.kernel.shape[2]), int(self.kernel.shape[3])],
            "stride": [self.stride[0], self.stride[1]],
            "padding": [self.padding[0], self.padding[1]],
        }

    def weights(self):
        return {"kernel": self.kernel, "bias": self.bias}


@dataclass
class MagnitudeMaxPool(Layer):
    window: tuple = (2, 2)
    stride: tuple | None = None
    kind = "magnitude_max_pool"

    def __post_init__(self):
        self.window = (int(self.window[0]), int(self.window[1]))
        if self.window[0] < 1 or self.window[1] < 1:
            raise ValueError(f"invalid pooling window {self.window}")
        self.stride = self.window if self.stride is None else (
            int(self.stride[0]),
            int(self.stride[1]),
        )

    def out_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeMismatchError(
                f"max pool expects (channels, h, w) input, got {tuple(in_shape)}"
            )
        c, h, w = in_shape
        wh, ww = self.window
        sh, sw = self.stride
        ho = (h - wh) // sh + 1
        wo = (w - ww) // sw + 1
        if ho < 1 or wo < 1:
            raise ShapeMismatchError(f"pooling window larger than input {tuple(in_shape)}")
        return (c, ho, wo)

    def iter_windows(self, in_shape):
        """Yield (flat output index, flat input index array) per pooling window."""
        c, h, w = in_shape
        _, ho, wo = self.out_shape(in_shape)
        wh, ww = self.window
        sh, sw = self.stride
        for ch in range(c):
            for i in range(ho):
                for j in range(wo):
                    rows = np.arange(i * sh, i * sh + wh)
                    cols = np.arange(j * sw, j * sw + ww)
                    flat = (ch * h + rows[:, None]) * w + cols[None, :]
                    yield (ch * ho + i) * wo + j, flat.ravel()

    def forward(self, x):
        oshape = self.out_shape(x.shape)
        flat_in = x.ravel()
        out = np.empty(int(np.prod(oshape)), dtype=np.complex128)
        for oidx, idxs in self.iter_windows(x.shape):
            out[oidx] = cmaxpool_window(flat_in[idxs])
        return out.reshape(oshape)

    def grad_step(self, dz, dzb, y):
        # Subgradient convention: route to the argmax element of each window.
        flat_in = y.ravel()
        dy = np.zeros(y.size, dtype=np.complex128)
        dyb = np.zeros(y.size, dtype=np.complex128)
        dzf = dz.ravel()
        dzbf = dzb.ravel()
        for oidx, idxs in self.iter_windows(y.shape):
            am = idxs[int(np.argmax(np.abs(flat_in[idxs])))]
            dy[am] += dzf[oidx]
            dyb[am] += dzbf[oidx]
        return dy.reshape(y.shape), dyb.reshape(y.shape)

    def params(self):
        return {
            "window": [self.window[0], self.window[1]],
            "stride": [self.stride[0], self.stride[1]],
        }


LAYER_KINDS = {
    cls.kind: cls
    for cls in (
        ComplexLinear,
        ComplexConv2d,
        CReLU,
        ZReLU,
        MagnitudeMaxPool,
        Flatten,
        RealPart,
        Magnitude,
    )
}
