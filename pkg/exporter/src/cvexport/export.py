"""Convert a torch checkpoint plus an architecture file into a model bundle.

The bundle contains the model in the cvexplain JSON format, a file of probe
inputs, the framework-computed outputs for those probes, and a manifest with
layer-mapping notes. Complex weights are normalized from whichever of three
storages the checkpoint uses: native complex tensors, real tensors with a
trailing re/im axis of size 2, or split "<name>_re"/"<name>_im" keys.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np
import torch

FORMAT_VERSION = 1
DEFAULT_PROBE_COUNT = 32

SUPPORTED_KINDS = (
    "complex_linear",
    "complex_conv2d",
    "crelu",
    "zrelu",
    "magnitude_max_pool",
    "flatten",
    "real_part",
    "magnitude",
)
_WEIGHTED_KINDS = {"complex_linear": ("weight", "bias"), "complex_conv2d": ("weight", "bias")}


class UnsupportedLayerError(ValueError):
    """The architecture names a layer kind the engine format cannot express."""


@dataclass
class ExportBundle:
    model_path: str
    probe_inputs_path: str
    expected_outputs_path: str
    manifest_path: str


# ---------------------------------------------------------------------------
# Checkpoint normalization
# ---------------------------------------------------------------------------


def load_checkpoint(path: str) -> dict:
    """Load a state dict of tensors; unwrap a {"state_dict": ...} container."""
    state = torch.load(path, map_location="cpu", weights_only=True)
    if isinstance(state, dict) and "state_dict" in state:
        state = state["state_dict"]
    if not isinstance(state, dict):
        raise ValueError(f"checkpoint {path!r} does not contain a state dict")
    return state


def fetch_complex(state: dict, key: str) -> np.ndarray:
    """Return the complex weight stored under key, normalizing the storage."""
    if key in state:
        t = state[key]
        arr = t.detach().cpu().numpy()
        if np.iscomplexobj(arr):
            return arr.astype(np.complex128)
        if arr.ndim >= 1 and arr.shape[-1] == 2:
            return (arr[..., 0] + 1j * arr[..., 1]).astype(np.complex128)
        return arr.astype(np.complex128)
    if f"{key}_re" in state and f"{key}_im" in state:
        re = state[f"{key}_re"].detach().cpu().numpy()
        im = state[f"{key}_im"].detach().cpu().numpy()
        return (re + 1j * im).astype(np.complex128)
    raise KeyError(f"checkpoint has no tensor named {key!r} (or {key}_re/{key}_im)")


# ---------------------------------------------------------------------------
# Framework-side reference forward
# ---------------------------------------------------------------------------


def _torch_forward(layers: list, x: torch.Tensor) -> torch.Tensor:
    """Reference forward pass in torch, mirroring the engine semantics."""
    for spec in layers:
        kind = spec["kind"]
        if kind == "complex_linear":
            w, b = spec["_weight"], spec["_bias"]
            x = w @ x + b
        elif kind == "complex_conv2d":
            x = _complex_conv2d(spec, x)
        elif kind == "crelu":
            x = torch.relu(x.real) + 1j * torch.relu(x.imag)
        elif kind == "zrelu":
            x = x * ((x.real > 0) & (x.imag > 0))
        elif kind == "magnitude_max_pool":
            x = _magnitude_max_pool(spec, x)
        elif kind == "flatten":
            x = x.reshape(-1)
        elif kind == "real_part":
            x = x.real + 0j
        elif kind == "magnitude":
            x = x.abs() + 0j
        else:  # pragma: no cover - guarded earlier
            raise UnsupportedLayerError(kind)
    return x


def _complex_conv2d(spec: dict, x: torch.Tensor) -> torch.Tensor:
    w, b = spec["_weight"], spec["_bias"]
    stride = tuple(spec.get("stride", (1, 1)))
    padding = tuple(spec.get("padding", (0, 0)))

    def conv(v, k):
        return torch.nn.functional.conv2d(
            v.unsqueeze(0), k, stride=stride, padding=padding
        ).squeeze(0)

    real = conv(x.real, w.real) - conv(x.imag, w.imag)
    imag = conv(x.real, w.imag) + conv(x.imag, w.real)
    return real + 1j * imag + (b.reshape(-1, 1, 1) + 0j)


def _magnitude_max_pool(spec: dict, x: torch.Tensor) -> torch.Tensor:
    wh, ww = spec["window"]
    sh, sw = spec.get("stride", spec["window"])
    c, h, w = x.shape
    ho, wo = (h - wh) // sh + 1, (w - ww) // sw + 1
    out = torch.zeros((c, ho, wo), dtype=x.dtype)
    for ch in range(c):
        for i in range(ho):
            for j in range(wo):
                win = x[ch, i * sh : i * sh + wh, j * sw : j * sw + ww].reshape(-1)
                out[ch, i, j] = win[int(torch.argmax(win.abs()))]
    return out


# ---------------------------------------------------------------------------
# Model-format emission
# ---------------------------------------------------------------------------


def _encode_array(arr: np.ndarray) -> dict:
    return {"re": arr.real.ravel().tolist(), "im": arr.imag.ravel().tolist()}


def _atomic_write(path: str, text: str) -> None:
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


def _layer_entry(spec: dict) -> dict:
    kind = spec["kind"]
    entry = {"kind": kind}
    if kind == "complex_linear":
        w = spec["_weight_np"]
        entry["params"] = {"in_features": w.shape[1], "out_features": w.shape[0]}
        entry["weights"] = {
            "weight": _encode_array(w),
            "bias": _encode_array(spec["_bias_np"]),
        }
    elif kind == "complex_conv2d":
        k = spec["_weight_np"]
        entry["params"] = {
            "out_channels": k.shape[0],
            "in_channels": k.shape[1],
            "kernel_size": [k.shape[2], k.shape[3]],
            "stride": list(spec.get("stride", (1, 1))),
            "padding": list(spec.get("padding", (0, 0))),
        }
        entry["weights"] = {
            "kernel": _encode_array(k),
            "bias": _encode_array(spec["_bias_np"]),
        }
    elif kind == "magnitude_max_pool":
        entry["params"] = {"window": list(spec["window"])}
        if "stride" in spec:
            entry["params"]["stride"] = list(spec["stride"])
    return entry


def _tensor_entry(arr: np.ndarray) -> dict:
    entry = _encode_array(arr)
    entry["shape"] = list(arr.shape)
    return entry


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------


def _load_arch(path: str) -> dict:
    with open(path) as fh:
        arch = json.load(fh)
    for key in ("input_shape", "layers"):
        if key not in arch:
            raise ValueError(f"architecture file is missing {key!r}")
    return arch


def _resolve_layers(arch: dict, state: dict) -> list:
    layers = []
    for k, spec in enumerate(arch["layers"]):
        spec = dict(spec)
        kind = spec.get("kind")
        if kind not in SUPPORTED_KINDS:
            raise UnsupportedLayerError(
                f"layers[{k}]: kind {kind!r} has no engine equivalent "
                f"(supported: {', '.join(SUPPORTED_KINDS)})"
            )
        if kind in _WEIGHTED_KINDS:
            source = spec.get("source")
            if not source:
                raise ValueError(f"layers[{k}]: {kind} requires a 'source' checkpoint prefix")
            w = fetch_complex(state, f"{source}.weight")
            b = fetch_complex(state, f"{source}.bias")
            spec["_weight_np"], spec["_bias_np"] = w, b
            spec["_weight"] = torch.from_numpy(w)
            spec["_bias"] = torch.from_numpy(b)
        layers.append(spec)
    return layers


def export(
    checkpoint_path: str,
    arch_path: str,
    outdir: str,
    probe_count: int | None = None,
    probe_seed: int | None = None,
) -> ExportBundle:
    """Write model.json, probe_inputs.json, expected_outputs.json, manifest.json."""
    arch = _load_arch(arch_path)
    state = load_checkpoint(checkpoint_path)
    layers = _resolve_layers(arch, state)
    input_shape = tuple(int(s) for s in arch["input_shape"])
    n_probes = probe_count or int(arch.get("probe_count", DEFAULT_PROBE_COUNT))
    seed = probe_seed if probe_seed is not None else int(arch.get("probe_seed", 0))

    rng = np.random.default_rng(seed)
    probes = [
        rng.normal(size=input_shape) + 1j * rng.normal(size=input_shape)
        for _ in range(n_probes)
    ]
    expected = [
        _torch_forward(layers, torch.from_numpy(p).to(torch.complex128)).numpy()
        for p in probes
    ]

    os.makedirs(outdir, exist_ok=True)
    model_doc = {
        "name": arch.get("name", "exported_model"),
        "version": FORMAT_VERSION,
        "input_shape": list(input_shape),
        "metadata": {"exported_from": os.path.basename(checkpoint_path)},
        "layers": [_layer_entry(spec) for spec in layers],
    }
    model_path = os.path.join(outdir, "model.json")
    probes_path = os.path.join(outdir, "probe_inputs.json")
    outputs_path = os.path.join(outdir, "expected_outputs.json")
    manifest_path = os.path.join(outdir, "manifest.json")

    _atomic_write(model_path, json.dumps(model_doc, indent=1) + "\n")
    _atomic_write(
        probes_path,
        json.dumps({"inputs": [_tensor_entry(p) for p in probes]}, indent=1) + "\n",
    )
    _atomic_write(
        outputs_path,
        json.dumps({"inputs": [_tensor_entry(o) for o in expected]}, indent=1) + "\n",
    )

    manifest = {
        "tool": "cvexport",
        "format_version": FORMAT_VERSION,
        "checkpoint": os.path.basename(checkpoint_path),
        "probe_count": n_probes,
        "probe_seed": seed,
        "files": {
            "model": "model.json",
            "probe_inputs": "probe_inputs.json",
            "expected_outputs": "expected_outputs.json",
        },
        "layers": [
            {
                "kind": spec["kind"],
                "source": spec.get("source"),
                "weight_shape": list(spec["_weight_np"].shape)
                if "_weight_np" in spec
                else None,
            }
            for spec in layers
        ],
    }
    _atomic_write(manifest_path, json.dumps(manifest, indent=1, sort_keys=True) + "\n")

    return ExportBundle(
        model_path=model_path,
        probe_inputs_path=probes_path,
        expected_outputs_path=outputs_path,
        manifest_path=manifest_path,
    )
