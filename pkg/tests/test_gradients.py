import numpy as np
import pytest

from conftest import random_linear, random_magnitude_net, random_mlp, random_vector
from cvexplain.backprop import backward
from cvexplain.gradients import (
    explain_grad_times_input,
    explain_gradient,
    explain_guided,
    explain_integrated_gradients,
)
from cvexplain.layers import RealPart
from cvexplain.model import Model


def _completeness_error(model, x, phi, baseline=None):
    b = baseline if baseline is not None else np.zeros_like(x)
    target = model(x).ravel()[0].real - model(b).ravel()[0].real
    return abs(2 * phi.real.sum() - target)


class TestGradient:
    def test_equals_backward_cogradient(self, rng):
        m = random_mlp(rng)
        x = random_vector(rng, 5)
        expected = backward(m, m.forward(x), 1).input_pair.d_zbar
        np.testing.assert_array_equal(explain_gradient(m, x, output_index=1), expected)


class TestGradTimesInput:
    def test_is_plain_product(self, rng):
        m = random_mlp(rng)
        x = random_vector(rng, 5)
        np.testing.assert_array_equal(
            explain_grad_times_input(m, x), explain_gradient(m, x) * x
        )


class TestIntegratedGradients:
    def test_exact_on_linear_model(self, rng):
        # the gradient is constant, so one midpoint sample integrates exactly
        m = Model(layers=[random_linear(rng, 1, 4), RealPart()], input_shape=(4,))
        x = random_vector(rng, 4)
        phi = explain_integrated_gradients(m, x, steps=1)
        assert _completeness_error(m, x, phi) < 1e-12

    def test_completeness_improves_with_steps(self):
        rng = np.random.default_rng(3)
        m = random_magnitude_net(rng)
        x = random_vector(rng, 5)
        errs = [
            _completeness_error(m, x, explain_integrated_gradients(m, x, steps=s))
            for s in (8, 64, 512)
        ]
        assert errs[2] < errs[1] < errs[0]

    def test_custom_baseline(self, rng):
        m = random_mlp(rng)
        x = random_vector(rng, 5)
        b = random_vector(rng, 5)
        phi = explain_integrated_gradients(m, x, baseline=b, steps=256)
        assert _completeness_error(m, x, phi, baseline=b) < 0.05

    def test_bad_arguments(self, rng):
        m = random_mlp(rng)
        x = random_vector(rng, 5)
        with pytest.raises(ValueError):
            explain_integrated_gradients(m, x, baseline=np.zeros(4))
        with pytest.raises(ValueError):
            explain_integrated_gradients(m, x, steps=0)


class TestGuided:
    def test_variants_differ_from_plain_gradient(self):
        rng = np.random.default_rng(1)
        m = random_mlp(rng)
        x = random_vector(rng, 5)
        plain = explain_gradient(m, x)
        gz = explain_guided(m, x, variant="z")
        gc = explain_guided(m, x, variant="c")
        assert gz.shape == plain.shape and gc.shape == plain.shape
        assert not np.array_equal(gz, plain) or not np.array_equal(gc, plain)

    def test_unknown_variant(self, rng):
        m = random_mlp(rng)
        with pytest.raises(ValueError):
            explain_guided(m, random_vector(rng, 5), variant="x")
