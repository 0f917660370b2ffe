"""Shared fixtures and random-model builders for the test suite."""

import numpy as np
import pytest

from cvexplain.layers import CReLU, ComplexLinear, Flatten, Magnitude, RealPart, ZReLU
from cvexplain.model import Model


def random_linear(rng, n_out, n_in, bias_scale=0.3):
    scale = 1.0 / np.sqrt(n_in)
    return ComplexLinear(
        weight=scale * (rng.normal(size=(n_out, n_in)) + 1j * rng.normal(size=(n_out, n_in))),
        bias=bias_scale * (rng.normal(size=n_out) + 1j * rng.normal(size=n_out)),
    )


def random_vector(rng, n):
    return rng.normal(size=n) + 1j * rng.normal(size=n)


def random_mlp(rng, n_in=5, hidden=8, n_out=2, activation=CReLU):
    """One-hidden-layer complex MLP with a real (Re) readout."""
    return Model(
        layers=[
            random_linear(rng, hidden, n_in),
            activation(),
            random_linear(rng, n_out, hidden),
            RealPart(),
        ],
        input_shape=(n_in,),
    )


def random_deep_net(rng, n_in=6, widths=(8, 6, 4), activation=CReLU):
    """Four-layer-deep stack: linear/act pairs ending in a real readout."""
    layers = [Flatten()]
    prev = n_in
    for w in widths:
        layers.append(random_linear(rng, w, prev))
        layers.append(activation())
        prev = w
    layers.append(random_linear(rng, 2, prev))
    layers.append(RealPart())
    return Model(layers=layers, input_shape=(n_in,))


def random_magnitude_net(rng, n_in=5, hidden=8, n_out=2):
    return random_mlp(rng, n_in, hidden, n_out, activation=Magnitude)


def random_zrelu_net(rng, n_in=5, hidden=8, n_out=2):
    return random_mlp(rng, n_in, hidden, n_out, activation=ZReLU)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
