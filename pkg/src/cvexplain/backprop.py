"""Reverse-mode propagation of Wirtinger cogradient pairs through a trace.

The propagated quantity is the pair (df/dz, df/dzbar) of the selected real
output w.r.t. each layer input. Guided variants filter the pair at every
CReLU/ZReLU layer by applying the matching complex ReLU to df/dzbar and
mirroring the result onto df/dz as its conjugate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layers import CReLU, ComplexLinear, ZReLU
from .model import ForwardTrace, Model
from .tensor import WirtingerPair

GUIDED_MODES = ("none", "z", "c")


@dataclass
class BackwardState:
    """Cogradient pair w.r.t. every layer input; pairs[0] is the network input."""

    pairs: list  # list of WirtingerPair, length = len(layers) + 1

    @property
    def input_pair(self) -> WirtingerPair:
        return self.pairs[0]


def output_seed(model: Model, output_index: int):
    """Seed pair for explaining Re(output[output_index])."""
    n = model.n_outputs
    if not 0 <= output_index < n:
        raise IndexError(f"output index {output_index} out of range for {n} outputs")
    e = np.zeros(model.output_shape, dtype=np.complex128)
    e.ravel()[output_index] = 1.0
    return 0.5 * e, 0.5 * e


def backward(
    model: Model,
    trace: ForwardTrace,
    output_index: int = 0,
    guided: str = "none",
    seed: tuple | None = None,
) -> BackwardState:
    """Propagate the output cogradients back to the input.

    The default seed targets Re(output[output_index]), which equals the
    output itself for real-output models.
    """
    if guided not in GUIDED_MODES:
        raise ValueError(f"unknown guided mode {guided!r}")
    if len(trace.activations) != len(model.layers) + 1:
        raise ValueError("trace does not match model layer count")
    if seed is None:
        dz, dzb = output_seed(model, output_index)
    else:
        dz, dzb = seed
    guided_filter = {"z": ZReLU(), "c": CReLU()}.get(guided)
    pairs = [WirtingerPair(d_z=dz, d_zbar=dzb)]
    for k in reversed(range(len(model.layers))):
        layer = model.layers[k]
        y = trace.activations[k]
        dz, dzb = layer.grad_step(dz, dzb, y)
        if guided_filter is not None and isinstance(layer, (CReLU, ZReLU)):
            dzb = guided_filter.apply(dzb)
            dz = np.conj(dzb)
        pairs.append(WirtingerPair(d_z=dz, d_zbar=dzb))
    pairs.reverse()
    return BackwardState(pairs=pairs)


def loss_backward(model: Model, trace: ForwardTrace, dloss_dout: np.ndarray):
    """Backward pass for a real loss with real gradient dloss_dout at the output.

    Returns (input WirtingerPair, per-layer weight gradient list). Weight
    gradients are (dW, db) for ComplexLinear layers (taken w.r.t. the
    conjugate weights, the steepest-descent direction) and None elsewhere.
    """
    g = np.asarray(dloss_dout, dtype=np.complex128).reshape(model.output_shape)
    dz, dzb = 0.5 * g, 0.5 * g
    grads = [None] * len(model.layers)
    for k in reversed(range(len(model.layers))):
        layer = model.layers[k]
        y = trace.activations[k]
        if isinstance(layer, ComplexLinear):
            grads[k] = layer.weight_grad(dzb, y)
        dz, dzb = layer.grad_step(dz, dzb, y)
    return WirtingerPair(d_z=dz, d_zbar=dzb), grads
