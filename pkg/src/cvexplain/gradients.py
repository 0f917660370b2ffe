"""Gradient-based explanation methods for complex-valued networks.

All methods return the complex map df/dzbar-derived saliency at the input;
callers reduce it to a real map with tensor.reduce_saliency.
"""

from __future__ import annotations

import numpy as np

from .backprop import backward
from .model import Model
from .tensor import as_ctensor


def explain_gradient(model: Model, x, output_index: int = 0) -> np.ndarray:
    """df/dzbar of the selected output w.r.t. every input element."""
    x = as_ctensor(x)
    trace = model.forward(x)
    return backward(model, trace, output_index).input_pair.d_zbar


def explain_grad_times_input(model: Model, x, output_index: int = 0) -> np.ndarray:
    """Gradient times (unconjugated) input, mirroring the real-valued method."""
    x = as_ctensor(x)
    return explain_gradient(model, x, output_index) * x


def explain_integrated_gradients(
    model: Model,
    x,
    baseline=None,
    steps: int = 5,
    output_index: int = 0,
) -> np.ndarray:
    """Mean gradient along the straight line from baseline to x, times conj(dx).

    The conjugation makes sum(2*Re(phi)) approximate f(x) - f(baseline) for
    real outputs (completeness), since df = 2*Re(df/dzbar * conj(dz)).
    Gradients are sampled at interval midpoints, which halves the error of
    endpoint sampling on kinked activations and is second-order accurate on
    smooth ones.
    """
    x = as_ctensor(x)
    if baseline is None:
        baseline = np.zeros(x.shape, dtype=np.complex128)
    baseline = as_ctensor(baseline)
    if baseline.shape != x.shape:
        raise ValueError(f"baseline shape {baseline.shape} does not match input {x.shape}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    delta = x - baseline
    acc = np.zeros(x.shape, dtype=np.complex128)
    for k in range(1, steps + 1):
        point = baseline + ((k - 0.5) / steps) * delta
        acc += explain_gradient(model, point, output_index)
    return (acc / steps) * np.conj(delta)


def explain_guided(model: Model, x, output_index: int = 0, variant: str = "z") -> np.ndarray:
    """Guided backpropagation with the zReLU ("z") or CReLU ("c") filter."""
    if variant not in ("z", "c"):
        raise ValueError(f"unknown guided variant {variant!r}")
    x = as_ctensor(x)
    trace = model.forward(x)
    return backward(model, trace, output_index, guided=variant).input_pair.d_zbar
