"""Model container, forward traces and the on-disk model/tensor formats.

A model file is a single JSON document::

    {"name": ..., "version": 1, "input_shape": [...], "metadata": {...},
     "layers": [{"kind": ..., "params": {...},
                 "weights": {"weight": {"re": [...], "im": [...]}, ...}}]}

Weight arrays are flat row-major lists; json round-trips doubles exactly
(repr emits up to 17 significant digits).
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .layers import (
    LAYER_KINDS,
    ComplexConv2d,
    ComplexLinear,
    Layer,
    Magnitude,
    MagnitudeMaxPool,
    RealPart,
)
from .tensor import ShapeMismatchError, as_ctensor

FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Malformed or inconsistent model/tensor file."""


@dataclass
class Model:
    layers: list
    input_shape: tuple
    name: str = "model"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.input_shape = tuple(int(s) for s in self.input_shape)
        self.layer_shapes = [self.input_shape]
        shape = self.input_shape
        for k, layer in enumerate(self.layers):
            try:
                shape = layer.out_shape(shape)
            except ShapeMismatchError as exc:
                raise ShapeMismatchError(f"layer {k} ({layer.kind}): {exc}") from exc
            self.layer_shapes.append(tuple(shape))

    @property
    def output_shape(self):
        return self.layer_shapes[-1]

    @property
    def n_outputs(self):
        return int(np.prod(self.output_shape))

    def has_real_output(self) -> bool:
        if self.metadata.get("real_output"):
            return True
        return bool(self.layers) and isinstance(self.layers[-1], (RealPart, Magnitude))

    def forward(self, x) -> "ForwardTrace":
        x = as_ctensor(x)
        if x.shape != self.input_shape:
            raise ShapeMismatchError(
                f"input shape {x.shape} does not match model input {self.input_shape}"
            )
        acts = [x]
        for k, layer in enumerate(self.layers):
            try:
                acts.append(layer.forward(acts[-1]))
            except ShapeMismatchError as exc:
                raise ShapeMismatchError(f"layer {k} ({layer.kind}): {exc}") from exc
        return ForwardTrace(activations=acts)

    def __call__(self, x) -> np.ndarray:
        return self.forward(x).output


@dataclass
class ForwardTrace:
    activations: list  # length = len(layers) + 1

    @property
    def output(self) -> np.ndarray:
        return self.activations[-1]


def _encode_array(arr: np.ndarray) -> dict:
    return {"re": arr.real.ravel().tolist(), "im": arr.imag.ravel().tolist()}


def _decode_array(obj: dict, shape, path: str) -> np.ndarray:
    if not isinstance(obj, dict) or "re" not in obj or "im" not in obj:
        raise ModelFormatError(f"{path}: expected object with 're' and 'im' lists")
    re, im = obj["re"], obj["im"]
    if len(re) != len(im):
        raise ModelFormatError(f"{path}: re/im length mismatch ({len(re)} vs {len(im)})")
    expected = int(np.prod(shape))
    if len(re) != expected:
        raise ModelFormatError(
            f"{path}: expected {expected} values for shape {tuple(shape)}, got {len(re)}"
        )
    return (np.asarray(re, dtype=np.float64) + 1j * np.asarray(im, dtype=np.float64)).reshape(
        shape
    )


def layer_to_dict(layer: Layer) -> dict:
    entry = {"kind": layer.kind}
    params = layer.params()
    if params:
        entry["params"] = params
    weights = layer.weights()
    if weights:
        entry["weights"] = {k: _encode_array(v) for k, v in weights.items()}
    return entry


def layer_from_dict(entry: dict, path: str) -> Layer:
    kind = entry.get("kind")
    if kind not in LAYER_KINDS:
        raise ModelFormatError(f"{path}.kind: unknown layer kind {kind!r}")
    params = entry.get("params", {})
    weights = entry.get("weights", {})
    try:
        if kind == "complex_linear":
            n_in = int(params["in_features"])
            n_out = int(params["out_features"])
            return ComplexLinear(
                weight=_decode_array(weights["weight"], (n_out, n_in), f"{path}.weights.weight"),
                bias=_decode_array(weights["bias"], (n_out,), f"{path}.weights.bias"),
            )
        if kind == "complex_conv2d":
            shape = (
                int(params["out_channels"]),
                int(params["in_channels"]),
                int(params["kernel_size"][0]),
                int(params["kernel_size"][1]),
            )
            return ComplexConv2d(
                kernel=_decode_array(weights["kernel"], shape, f"{path}.weights.kernel"),
                bias=_decode_array(weights["bias"], (shape[0],), f"{path}.weights.bias"),
                stride=tuple(params.get("stride", [1, 1])),
                padding=tuple(params.get("padding", [0, 0])),
            )
        if kind == "magnitude_max_pool":
            return MagnitudeMaxPool(
                window=tuple(params["window"]),
                stride=tuple(params["stride"]) if "stride" in params else None,
            )
        return LAYER_KINDS[kind]()
    except KeyError as exc:
        raise ModelFormatError(f"{path}: missing field {exc}") from exc


def model_to_dict(model: Model) -> dict:
    return {
        "name": model.name,
        "version": FORMAT_VERSION,
        "input_shape": list(model.input_shape),
        "metadata": model.metadata,
        "layers": [layer_to_dict(layer) for layer in model.layers],
    }


def model_from_dict(doc: dict) -> Model:
    for key in ("version", "input_shape", "layers"):
        if key not in doc:
            raise ModelFormatError(f"missing top-level field {key!r}")
    if doc["version"] != FORMAT_VERSION:
        raise ModelFormatError(f"version: unsupported value {doc['version']!r}")
    layers = [layer_from_dict(entry, f"layers[{k}]") for k, entry in enumerate(doc["layers"])]
    try:
        return Model(
            layers=layers,
            input_shape=tuple(doc["input_shape"]),
            name=doc.get("name", "model"),
            metadata=doc.get("metadata", {}),
        )
    except ShapeMismatchError as exc:
        raise ModelFormatError(f"layers: {exc}") from exc


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(model: Model, path: str) -> None:
    atomic_write_text(path, json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path: str) -> Model:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError("top level must be an object")
    return model_from_dict(doc)


def tensor_to_dict(arr: np.ndarray) -> dict:
    entry = _encode_array(np.asarray(arr, dtype=np.complex128))
    entry["shape"] = list(arr.shape)
    return entry


def tensor_from_dict(obj: dict, path: str = "tensor") -> np.ndarray:
    if "shape" not in obj:
        raise ModelFormatError(f"{path}: missing 'shape'")
    return _decode_array(obj, tuple(obj["shape"]), path)


def save_tensors(arrays: list, path: str) -> None:
    atomic_write_text(
        path, json.dumps({"inputs": [tensor_to_dict(a) for a in arrays]}, indent=1) + "\n"
    )


def load_tensors(path: str) -> list:
    """Load one tensor file: either {"inputs": [...]} or a single tensor object."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not valid JSON: {exc}") from exc
    if isinstance(doc, dict) and "inputs" in doc:
        return [tensor_from_dict(t, f"inputs[{k}]") for k, t in enumerate(doc["inputs"])]
    if isinstance(doc, dict):
        return [tensor_from_dict(doc)]
    raise ModelFormatError("tensor file must be an object")
