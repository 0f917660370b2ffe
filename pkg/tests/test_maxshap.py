import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_vector
from cvexplain.maxshap import cmaxpool, maxpool_partials, maxpool_total, precompute_M
from cvexplain.oracle import exact_partial_shap, exact_shap

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)
cvals = st.tuples(finite, finite).map(lambda p: p[0] + 1j * p[1])


def _pool_fn(z):
    return cmaxpool(np.asarray(z))


class TestPrecomputeM:
    def test_small_values(self):
        np.testing.assert_allclose(precompute_M(1), [1.0])
        np.testing.assert_allclose(precompute_M(2), [0.5, 0.5])
        np.testing.assert_allclose(precompute_M(3), [1 / 3, 1 / 6, 1 / 3])

    def test_bounds(self):
        with pytest.raises(ValueError):
            precompute_M(0)
        with pytest.raises(ValueError):
            precompute_M(17)


class TestCmaxpool:
    def test_magnitude_argmax(self):
        assert cmaxpool(np.array([3, -4j, 1 + 1j])) == -4j

    def test_tie_prefers_first(self):
        assert cmaxpool(np.array([1 + 0j, 1j])) == 1 + 0j


class TestMaxpoolTotalAgainstOracle:
    @pytest.mark.parametrize("n", [1, 2, 3, 4, 6, 9])
    def test_random_windows(self, rng, n):
        for _ in range(25):
            x = random_vector(rng, n)
            y = random_vector(rng, n)
            phi = maxpool_total(x, y)
            oracle, _ = exact_shap(_pool_fn, x, y)
            np.testing.assert_allclose(phi, oracle, atol=1e-12)

    def test_tie_case(self):
        x = np.array([1 + 0j, 1j])
        y = np.array([0j, 0j])
        phi = maxpool_total(x, y)
        oracle, _ = exact_shap(_pool_fn, x, y)
        np.testing.assert_allclose(phi, oracle, atol=1e-12)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            maxpool_total(np.ones(2, complex), np.ones(3, complex))

    @settings(max_examples=60, deadline=None)
    @given(st.lists(cvals, min_size=1, max_size=6), st.data())
    def test_efficiency_property(self, xs, data):
        ys = data.draw(st.lists(cvals, min_size=len(xs), max_size=len(xs)))
        x, y = np.array(xs), np.array(ys)
        phi = maxpool_total(x, y)
        assert abs(phi.sum() - (cmaxpool(x) - cmaxpool(y))) < 1e-9


class TestMaxpoolPartials:
    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_against_oracle(self, rng, n):
        for _ in range(10):
            x = random_vector(rng, n)
            y = random_vector(rng, n)
            phi_r, phi_i = maxpool_partials(x, y)
            for j in range(n):
                pr, pi = exact_partial_shap(_pool_fn, x, y, j)
                assert abs(phi_r[j] - pr) < 1e-12
                assert abs(phi_i[j] - pi) < 1e-12

    def test_partials_sum_to_total(self, rng):
        x = random_vector(rng, 6)
        y = random_vector(rng, 6)
        phi_r, phi_i = maxpool_partials(x, y)
        np.testing.assert_allclose(phi_r + phi_i, maxpool_total(x, y), atol=1e-12)

    def test_enumeration_cap(self, rng):
        x = random_vector(rng, 10)
        with pytest.raises(ValueError):
            maxpool_partials(x, x, cap=9)
