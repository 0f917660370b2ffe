"""Complex tensor helpers and the Wirtinger cogradient pair.

All numeric state in this package is stored as numpy ``complex128`` arrays
with explicit shapes and row-major layout. Arrays are treated as immutable
after construction; helpers return fresh arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeMismatchError(ValueError):
    """Two tensors that must share a shape do not."""


def as_ctensor(data, shape=None) -> np.ndarray:
    """Coerce ``data`` to a finite complex128 array, optionally reshaped.

    Raises ValueError on non-finite entries or when the flat data length
    does not match the requested shape.
    """
    arr = np.asarray(data, dtype=np.complex128)
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        if any(s <= 0 for s in shape):
            raise ValueError(f"non-positive dimension in shape {shape}")
        if arr.size != int(np.prod(shape)):
            raise ShapeMismatchError(
                f"data length {arr.size} does not match shape {shape}"
            )
        arr = arr.reshape(shape)
    if not np.all(np.isfinite(arr.real)) or not np.all(np.isfinite(arr.imag)):
        raise ValueError("non-finite value in complex tensor")
    return arr


@dataclass(frozen=True)
class WirtingerPair:
    """The two cogradients (df/dz, df/dzbar) of a scalar w.r.t. a tensor.

    For real-valued f the pair satisfies d_zbar == conj(d_z).
    """

    d_z: np.ndarray
    d_zbar: np.ndarray

    def __post_init__(self):
        if self.d_z.shape != self.d_zbar.shape:
            raise ShapeMismatchError(
                f"cogradient shapes differ: {self.d_z.shape} vs {self.d_zbar.shape}"
            )


def wirtinger_from_real_parts(df_dre, df_dim) -> WirtingerPair:
    """Build the cogradient pair from partials w.r.t. real and imaginary axes.

    d_z = (df_dre - i*df_dim) / 2 and d_zbar = (df_dre + i*df_dim) / 2.
    """
    df_dre = np.asarray(df_dre, dtype=np.complex128)
    df_dim = np.asarray(df_dim, dtype=np.complex128)
    if df_dre.shape != df_dim.shape:
        raise ShapeMismatchError(
            f"partial shapes differ: {df_dre.shape} vs {df_dim.shape}"
        )
    return WirtingerPair(
        d_z=0.5 * (df_dre - 1j * df_dim),
        d_zbar=0.5 * (df_dre + 1j * df_dim),
    )


def reduce_saliency(phi: np.ndarray, mode: str) -> np.ndarray:
    """Collapse a complex saliency map to a real one.

    mode="abs" takes |phi| per element; mode="real_plus_imag" takes
    Re(phi) + Im(phi), which keeps signs but can cancel to zero.
    """
    phi = np.asarray(phi, dtype=np.complex128)
    if mode == "abs":
        return np.abs(phi)
    if mode == "real_plus_imag":
        return phi.real + phi.imag
    raise ValueError(f"unknown saliency reduction {mode!r}")
