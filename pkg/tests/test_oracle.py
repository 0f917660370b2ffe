import math

import numpy as np
import pytest

from conftest import random_vector
from cvexplain.oracle import (
    exact_partial_shap,
    exact_shap,
    finite_diff_wirtinger,
    shapley_weight,
)


class TestShapleyWeight:
    def test_known_values(self):
        # |S|!(n-|S|-1)!/n!
        assert shapley_weight(0, 2) == 0.5
        assert shapley_weight(1, 2) == 0.5
        assert shapley_weight(0, 3) == pytest.approx(1 / 3)
        assert shapley_weight(1, 3) == pytest.approx(1 / 6)
        assert shapley_weight(2, 3) == pytest.approx(1 / 3)

    @pytest.mark.parametrize("n", range(1, 13))
    def test_weights_sum_to_one(self, n):
        total = sum(math.comb(n - 1, s) * shapley_weight(s, n) for s in range(n))
        assert total == pytest.approx(1.0, abs=1e-12)


class TestExactShap:
    def test_linear_model_has_analytic_values(self, rng):
        # for f(z) = Re(w . z) every marginal contribution of feature j is
        # Re(w_j (x_j - r_j)) regardless of the coalition
        w = random_vector(rng, 4)
        x = random_vector(rng, 4)
        r = random_vector(rng, 4)

        def f(z):
            return (w @ z).real

        phi, phi0 = exact_shap(f, x, r)
        np.testing.assert_allclose(phi, (w * (x - r)).real, atol=1e-12)
        assert phi0 == pytest.approx(f(r))

    def test_efficiency(self, rng):
        x = random_vector(rng, 5)
        r = random_vector(rng, 5)

        def f(z):
            return float(np.abs(z).max())

        phi, phi0 = exact_shap(f, x, r)
        assert phi.sum() + phi0 == pytest.approx(f(x), abs=1e-12)

    def test_missing_feature_gets_zero(self, rng):
        x = random_vector(rng, 3)
        r = x.copy()
        x = x.copy()
        x[0] += 1.0  # only feature 0 differs

        def f(z):
            return float(np.abs(z).sum())

        phi, _ = exact_shap(f, x, r)
        assert phi[1] == 0.0 and phi[2] == 0.0

    def test_feature_cap(self, rng):
        x = random_vector(rng, 13)
        with pytest.raises(ValueError):
            exact_shap(lambda z: 0.0, x, x)


class TestExactPartialShap:
    def test_partials_sum_to_total(self, rng):
        x = random_vector(rng, 4)
        r = random_vector(rng, 4)

        def f(z):
            return float(np.abs(z).max())

        phi, _ = exact_shap(f, x, r)
        for j in range(4):
            pr, pi = exact_partial_shap(f, x, r, j)
            assert pr + pi == pytest.approx(phi[j], abs=1e-12)


class TestFiniteDiffWirtinger:
    def test_holomorphic_square(self, rng):
        # f(z) = sum z^2: d_z = 2z, d_zbar = 0
        z = random_vector(rng, 3)
        p = finite_diff_wirtinger(lambda v: (v**2).sum(), z)
        np.testing.assert_allclose(p.d_z, 2 * z, atol=1e-6)
        np.testing.assert_allclose(p.d_zbar, np.zeros(3), atol=1e-6)

    def test_squared_magnitude(self, rng):
        # f(z) = sum |z|^2: d_z = conj(z), d_zbar = z
        z = random_vector(rng, 3)
        p = finite_diff_wirtinger(lambda v: float((np.abs(v) ** 2).sum()), z)
        np.testing.assert_allclose(p.d_z, np.conj(z), atol=1e-6)
        np.testing.assert_allclose(p.d_zbar, z, atol=1e-6)
