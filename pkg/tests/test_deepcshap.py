import numpy as np
import pytest

from conftest import random_deep_net, random_linear, random_mlp, random_vector
from cvexplain.deepcshap import (
    UnsupportedLayerError,
    explain_deepcshap,
    input_multipliers,
    layer_partials_linear,
    layer_partials_pointwise,
    partial_multipliers,
)
from cvexplain.layers import CReLU, Layer, RealPart
from cvexplain.model import Model
from cvexplain.oracle import exact_shap


class TestLayerPartials:
    def test_linear_split(self):
        # W = 2+i, x = 1+i, ref = 0: the real move contributes W*1, the
        # imaginary move contributes W*i
        pc = layer_partials_linear(np.array([[2 + 1j]]), np.zeros(1), [1 + 1j], [0])
        assert pc.phi_r[0, 0] == 2 + 1j
        assert pc.phi_i[0, 0] == -1 + 2j
        assert pc.total[0, 0] == 1 + 3j  # equals W * dx

    def test_pointwise_crelu_split(self):
        # x = -1+2i, ref = 0: the real move lands at -1 (clipped to 0), the
        # imaginary move adds the surviving 2i
        pc = layer_partials_pointwise(CReLU().apply, [-1 + 2j], [0])
        assert pc.phi_r[0] == 0
        assert pc.phi_i[0] == 2j
        assert pc.total[0] == 2j

    def test_partials_telescope(self, rng):
        x = random_vector(rng, 6)
        r = random_vector(rng, 6)
        pc = layer_partials_pointwise(CReLU().apply, x, r)
        np.testing.assert_allclose(pc.total, CReLU().apply(x) - CReLU().apply(r), atol=1e-14)


class TestPartialMultipliers:
    def test_linear_multipliers_are_wirtinger_derivatives(self):
        # for a linear layer the multiplier pair collapses to (W, 0)
        w = np.array([[2 + 1j]])
        pc = layer_partials_linear(w, np.zeros(1), [1 + 1j], [0])
        m = partial_multipliers(pc, np.array([[1 + 1j]]), np.array([[0j]]))
        assert m.m_x[0, 0] == pytest.approx(2 + 1j)
        assert m.m_xbar[0, 0] == pytest.approx(0)
        assert not m.fallback

    def test_stability_fallback(self):
        # Im(dx) below threshold: the imaginary quotient is replaced by d_im
        x = np.array([1.0 + 1e-9j])
        r = np.array([0j])
        pc = layer_partials_pointwise(CReLU().apply, x, r)
        m = partial_multipliers(pc, x, r, d_re=CReLU().d_re(x), d_im=CReLU().d_im(x))
        assert m.fallback
        # d_re = 1, d_im = i here: m_x = (1 - i*i)/2 = 1, m_xbar = (1 + i*i)/2 = 0
        assert m.m_x[0] == pytest.approx(1.0)
        assert m.m_xbar[0] == pytest.approx(0.0)

    def test_no_fallback_away_from_threshold(self, rng):
        x = random_vector(rng, 4) + (2 + 2j)
        r = random_vector(rng, 4) - (2 + 2j)
        pc = layer_partials_pointwise(CReLU().apply, x, r)
        assert not partial_multipliers(pc, x, r).fallback


class TestMultiplierIdentities:
    def test_real_output_conjugate_pair(self, rng):
        m = random_mlp(rng)
        x = random_vector(rng, 5)
        r = random_vector(rng, 5)
        state = input_multipliers(m, x, r)
        np.testing.assert_allclose(state.m_xbar, np.conj(state.m_x), atol=1e-14)

    def test_linear_model_multipliers_equal_gradient(self, rng):
        layer = random_linear(rng, 1, 4)
        m = Model(layers=[layer, RealPart()], input_shape=(4,))
        x = random_vector(rng, 4)
        r = random_vector(rng, 4)
        state = input_multipliers(m, x, r)
        np.testing.assert_allclose(state.m_x, layer.weight[0] / 2, atol=1e-14)
        np.testing.assert_allclose(state.m_xbar, np.conj(layer.weight[0]) / 2, atol=1e-14)


class TestExplainDeepCSHAP:
    def test_matches_exact_shapley_on_shallow_model(self, rng):
        m = Model(layers=[random_linear(rng, 2, 4), RealPart()], input_shape=(4,))
        x = random_vector(rng, 4)
        r = random_vector(rng, 4)
        cm = explain_deepcshap(m, x, [r], output_index=1)
        oracle, phi0 = exact_shap(lambda v: m(v).ravel()[1].real, x, r)
        np.testing.assert_allclose(cm.phi.real + cm.phi.imag, oracle, atol=1e-10)
        assert cm.phi0 == pytest.approx(phi0)

    def test_conservation_on_deep_model(self, rng):
        m = random_deep_net(rng)
        x = random_vector(rng, 6)
        r = random_vector(rng, 6)
        cm = explain_deepcshap(m, x, [r])
        f_x = m(x).ravel()[0].real
        assert abs(cm.phi.sum() + cm.phi0 - f_x) < 1e-10

    def test_missingness_is_exact(self, rng):
        m = random_mlp(rng)
        r = random_vector(rng, 5)
        x = r.copy()
        x[2] += 1 + 1j  # only feature 2 present
        cm = explain_deepcshap(m, x, [r])
        mask = np.ones(5, bool)
        mask[2] = False
        assert np.all(cm.phi[mask] == 0)

    def test_reference_averaging(self, rng):
        m = random_mlp(rng)
        x = random_vector(rng, 5)
        refs = [random_vector(rng, 5) for _ in range(3)]
        cm = explain_deepcshap(m, x, refs)
        singles = [explain_deepcshap(m, x, [r]) for r in refs]
        np.testing.assert_allclose(cm.phi, np.mean([s.phi for s in singles], axis=0), atol=1e-14)
        assert cm.phi0 == pytest.approx(np.mean([s.phi0 for s in singles]))

    def test_imag_part_conservation(self, rng):
        m = Model(layers=[random_linear(rng, 2, 4), CReLU()], input_shape=(4,))
        x = random_vector(rng, 4)
        r = random_vector(rng, 4)
        cm = explain_deepcshap(m, x, [r], output_index=0, part="imag")
        target = m(x).ravel()[0].imag
        assert abs(cm.phi.sum() + cm.phi0 - target) < 1e-10

    def test_complex_part_combines_real_and_imag(self, rng):
        m = Model(layers=[random_linear(rng, 2, 4), CReLU()], input_shape=(4,))
        x = random_vector(rng, 4)
        r = random_vector(rng, 4)
        cm = explain_deepcshap(m, x, [r], part="complex")
        # the combined map conserves the full complex output
        assert abs(cm.phi.sum() + cm.phi0 - m(x).ravel()[0]) < 1e-10
        re_map = explain_deepcshap(m, x, [r], part="real")
        im_map = explain_deepcshap(m, x, [r], part="imag")
        np.testing.assert_allclose(cm.phi, re_map.phi + 1j * im_map.phi, atol=1e-14)

    def test_errors(self, rng):
        m = random_mlp(rng)
        x = random_vector(rng, 5)
        with pytest.raises(ValueError):
            explain_deepcshap(m, x, [])
        with pytest.raises(ValueError):
            explain_deepcshap(m, x, [np.zeros(4)])
        with pytest.raises(ValueError):
            explain_deepcshap(m, x, [np.zeros(5)], part="phase")
        with pytest.raises(IndexError):
            explain_deepcshap(m, x, [np.zeros(5)], output_index=7)

    def test_unsupported_layer(self, rng):
        class Mystery(Layer):
            kind = "mystery"

            def out_shape(self, in_shape):
                return in_shape

            def forward(self, x):
                return x

        m = Model(layers=[Mystery(), random_linear(rng, 1, 3), RealPart()], input_shape=(3,))
        with pytest.raises(UnsupportedLayerError):
            explain_deepcshap(m, random_vector(rng, 3), [np.zeros(3)])
