import json

import numpy as np
import pytest

from conftest import random_linear, random_vector
from cvexplain.layers import CReLU, ComplexConv2d, Flatten, MagnitudeMaxPool, RealPart
from cvexplain.model import (
    Model,
    ModelFormatError,
    load_model,
    load_tensors,
    save_model,
    save_tensors,
)
from cvexplain.tensor import ShapeMismatchError


def _conv_model(rng):
    return Model(
        layers=[
            ComplexConv2d(
                kernel=random_vector(rng, 2 * 1 * 3 * 3).reshape(2, 1, 3, 3),
                bias=random_vector(rng, 2),
            ),
            CReLU(),
            MagnitudeMaxPool(window=(2, 2)),
            Flatten(),
            random_linear(rng, 3, 18),
            RealPart(),
        ],
        input_shape=(1, 8, 8),
        name="conv_example",
        metadata={"note": "io test"},
    )


class TestModel:
    def test_validates_layer_shapes_at_construction(self, rng):
        with pytest.raises(ShapeMismatchError):
            Model(layers=[random_linear(rng, 2, 5)], input_shape=(4,))

    def test_forward_rejects_wrong_input(self, rng):
        m = Model(layers=[random_linear(rng, 2, 4)], input_shape=(4,))
        with pytest.raises(ShapeMismatchError):
            m(np.zeros(5))

    def test_real_output_detection(self, rng):
        m = Model(layers=[random_linear(rng, 2, 4), RealPart()], input_shape=(4,))
        assert m.has_real_output()
        m2 = Model(layers=[random_linear(rng, 2, 4)], input_shape=(4,))
        assert not m2.has_real_output()


class TestModelRoundtrip:
    def test_forward_identical_after_roundtrip(self, rng, tmp_path):
        m = _conv_model(rng)
        path = str(tmp_path / "model.json")
        save_model(m, path)
        m2 = load_model(path)
        assert m2.name == m.name
        assert m2.metadata["note"] == "io test"
        x = random_vector(rng, 64).reshape(1, 8, 8)
        np.testing.assert_array_equal(m2(x), m(x))

    def test_weights_roundtrip_exactly(self, rng, tmp_path):
        m = Model(layers=[random_linear(rng, 3, 4)], input_shape=(4,))
        path = str(tmp_path / "model.json")
        save_model(m, path)
        m2 = load_model(path)
        np.testing.assert_array_equal(m2.layers[0].weight, m.layers[0].weight)
        np.testing.assert_array_equal(m2.layers[0].bias, m.layers[0].bias)

    def test_save_is_idempotent(self, rng, tmp_path):
        m = _conv_model(rng)
        p1, p2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
        save_model(m, p1)
        save_model(load_model(p1), p2)
        assert open(p1).read() == open(p2).read()


class TestMalformedFiles:
    def _write(self, tmp_path, obj):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(obj))
        return str(path)

    def test_unknown_layer_kind(self, tmp_path):
        path = self._write(
            tmp_path,
            {"name": "m", "version": 1, "input_shape": [2], "layers": [{"kind": "mystery"}]},
        )
        with pytest.raises(ModelFormatError, match="mystery"):
            load_model(path)

    def test_wrong_weight_length(self, tmp_path):
        path = self._write(
            tmp_path,
            {
                "name": "m",
                "version": 1,
                "input_shape": [2],
                "layers": [
                    {
                        "kind": "complex_linear",
                        "params": {"in_features": 2, "out_features": 1},
                        "weights": {
                            "weight": {"re": [1.0], "im": [0.0]},
                            "bias": {"re": [0.0], "im": [0.0]},
                        },
                    }
                ],
            },
        )
        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_not_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("not json at all {")
        with pytest.raises(ModelFormatError):
            load_model(str(path))


class TestTensorFiles:
    def test_roundtrip(self, rng, tmp_path):
        arrays = [random_vector(rng, 6).reshape(2, 3), random_vector(rng, 4)]
        path = str(tmp_path / "inputs.json")
        save_tensors(arrays, path)
        loaded = load_tensors(path)
        assert len(loaded) == 2
        for a, b in zip(arrays, loaded):
            np.testing.assert_array_equal(a, b)
