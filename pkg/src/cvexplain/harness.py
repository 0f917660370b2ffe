"""Desk-scale evaluation harness: axiom checks, the masking experiment, the
channel-attribution score, synthetic tasks and a small Wirtinger-gradient
trainer that produces models worth explaining.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .backprop import loss_backward
from .deepcshap import explain_deepcshap
from .gradients import (
    explain_gradient,
    explain_grad_times_input,
    explain_guided,
    explain_integrated_gradients,
)
from .layers import (
    CReLU,
    ComplexConv2d,
    ComplexLinear,
    Flatten,
    MagnitudeMaxPool,
    RealPart,
)
from .model import Model
from .tensor import as_ctensor, reduce_saliency

METHODS = ("deepcshap", "grad", "gradxinput", "intgrad", "guided-z", "guided-c")
REDUCTIONS = ("abs", "ri")
_REDUCTION_MODE = {"abs": "abs", "ri": "real_plus_imag"}


def max_threads() -> int:
    try:
        return max(1, int(os.environ.get("CSHAP_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(fn, items):
    """Map preserving order; fans out over threads when CSHAP_THREADS > 1."""
    items = list(items)
    n = max_threads()
    if n > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def explain(
    model: Model,
    x,
    method: str,
    output_index: int = 0,
    references=None,
    steps: int = 5,
) -> np.ndarray:
    """Complex saliency map of one output by any of the supported methods."""
    if method == "deepcshap":
        refs = references if references is not None else [np.zeros(model.input_shape)]
        return explain_deepcshap(model, x, refs, output_index).phi
    if method == "grad":
        return explain_gradient(model, x, output_index)
    if method == "gradxinput":
        return explain_grad_times_input(model, x, output_index)
    if method == "intgrad":
        baseline = references[0] if references else None
        return explain_integrated_gradients(
            model, x, baseline=baseline, steps=steps, output_index=output_index
        )
    if method == "guided-z":
        return explain_guided(model, x, output_index, variant="z")
    if method == "guided-c":
        return explain_guided(model, x, output_index, variant="c")
    raise ValueError(f"unknown explanation method {method!r}")


# ---------------------------------------------------------------------------
# Axiom checks
# ---------------------------------------------------------------------------


@dataclass
class AxiomReport:
    local_accuracy_error: float
    mean_abs_output: float
    relative_error: float
    missingness_error_fraction: float
    n_inputs: int
    n_outputs: int


def check_axioms(model: Model, inputs, references, method: str = "deepcshap") -> AxiomReport:
    """Local-accuracy and missingness statistics over all outputs and inputs."""
    if method != "deepcshap":
        raise ValueError("axiom checks are defined for the deepcshap method only")
    inputs = [as_ctensor(x) for x in inputs]
    references = [as_ctensor(r) for r in references]
    if not inputs:
        raise ValueError("need at least one input")
    n_out = model.n_outputs

    def one(x):
        errs = []
        outs = []
        missing = np.ones(x.shape, dtype=bool)
        for r in references:
            missing &= x == r
        miss_total = int(missing.sum()) * n_out
        miss_bad = 0
        for o in range(n_out):
            cm = explain_deepcshap(model, x, references, output_index=o)
            f_val = model(x).ravel()[o].real
            errs.append(abs(cm.phi.sum() + cm.phi0 - f_val))
            outs.append(abs(f_val))
            miss_bad += int(np.count_nonzero(cm.phi[missing]))
        return errs, outs, miss_total, miss_bad

    results = ordered_map(one, inputs)
    errs = np.concatenate([r[0] for r in results])
    outs = np.concatenate([r[1] for r in results])
    miss_total = sum(r[2] for r in results)
    miss_bad = sum(r[3] for r in results)
    mean_err = float(np.mean(errs))
    mean_out = float(np.mean(outs))
    return AxiomReport(
        local_accuracy_error=mean_err,
        mean_abs_output=mean_out,
        relative_error=mean_err / mean_out if mean_out > 0 else float("inf"),
        missingness_error_fraction=miss_bad / miss_total if miss_total else 0.0,
        n_inputs=len(inputs),
        n_outputs=n_out,
    )


# ---------------------------------------------------------------------------
# Masking experiment
# ---------------------------------------------------------------------------


@dataclass
class MaskingResult:
    changes: np.ndarray  # per-image log-odds drop
    fraction: float
    method: str
    reduction: str

    @property
    def median(self) -> float:
        return float(np.median(self.changes))

    @property
    def mean(self) -> float:
        return float(np.mean(self.changes))


def _log_odds(model: Model, x, source: int, target: int) -> float:
    out = model(x).ravel()
    return float(out[source].real - out[target].real)


def masking_experiment(
    model: Model,
    images,
    source_class: int,
    target_class: int,
    method: str,
    reduction: str = "ri",
    fraction: float = 0.2,
    steps: int = 5,
    seed: int = 0,
) -> MaskingResult:
    """Zero out the pixels ranked most source-vs-target relevant and report the
    drop in log-odds. method="random" ranks pixels randomly (baseline)."""
    n_out = model.n_outputs
    if not (0 <= source_class < n_out and 0 <= target_class < n_out):
        raise IndexError(f"class indices ({source_class}, {target_class}) out of range")
    if not 0.0 <= fraction <= 0.2:
        raise ValueError("masking fraction must lie in [0, 0.2]")
    rng = np.random.default_rng(seed)
    changes = []
    for x in images:
        x = as_ctensor(x)
        n_mask = int(fraction * x.size)
        if method == "random":
            order = rng.permutation(x.size)
        else:
            phi = explain(model, x, method, source_class, steps=steps) - explain(
                model, x, method, target_class, steps=steps
            )
            scores = reduce_saliency(phi, _REDUCTION_MODE[reduction]).ravel()
            order = np.argsort(-scores, kind="stable")
        masked = x.ravel().copy()
        masked[order[:n_mask]] = 0.0
        before = _log_odds(model, x, source_class, target_class)
        after = _log_odds(model, masked.reshape(x.shape), source_class, target_class)
        changes.append(before - after)
    return MaskingResult(
        changes=np.asarray(changes), fraction=fraction, method=method, reduction=reduction
    )


# ---------------------------------------------------------------------------
# Channel attribution score
# ---------------------------------------------------------------------------


@dataclass
class ChannelScore:
    scores: np.ndarray
    skipped: int
    method: str
    reduction: str

    @property
    def median(self) -> float:
        return float(np.median(self.scores))


def channel_attribution_score(
    model: Model,
    samples,
    method: str,
    reduction: str = "ri",
    steps: int = 5,
) -> ChannelScore:
    """Fraction of attributed relevance falling on the known-correct channels.

    samples: iterable of (x, output_index, correct_channel_indices) where the
    leading input axis indexes channels. Samples whose total attribution is
    degenerate (|total| < 1e-12) are skipped and counted.
    """
    scores = []
    skipped = 0
    for x, output_index, correct in samples:
        x = as_ctensor(x)
        phi = explain(model, x, method, output_index, steps=steps)
        sal = reduce_saliency(phi, _REDUCTION_MODE[reduction])
        per_channel = sal.reshape(x.shape[0], -1).sum(axis=1)
        total = per_channel.sum()
        if abs(total) < 1e-12:
            skipped += 1
            continue
        scores.append(per_channel[list(correct)].sum() / total)
    return ChannelScore(
        scores=np.asarray(scores), skipped=skipped, method=method, reduction=reduction
    )


# ---------------------------------------------------------------------------
# Synthetic tasks and toy training
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    hidden: int = 16
    learning_rate: float = 0.05
    epochs: int = 120
    seed: int = 1
    n_samples: int = 120
    noise: float = 0.1


TWO_CHANNEL_CLASSES = 3
TWO_CHANNEL_FEATURES = 8
DIGIT_CLASSES = 4

_DIGIT_GLYPHS = {
    0: [(3, c) for c in range(1, 7)],  # horizontal bar
    1: [(r, 4) for r in range(1, 7)],  # vertical bar
    2: [(r, r) for r in range(1, 7)] + [(r, 7 - r) for r in range(1, 7)],  # cross
    3: [(1, c) for c in range(1, 7)]
    + [(6, c) for c in range(1, 7)]
    + [(r, 1) for r in range(2, 6)]
    + [(r, 6) for r in range(2, 6)],  # box
}


def _class_template(cls: int, n_features: int) -> np.ndarray:
    f = np.arange(n_features)
    return np.exp(2j * np.pi * (cls + 1) * f / n_features)


def make_two_channel_data(n_samples: int, seed: int, noise: float = 0.1):
    """Paired-patch task: channel 0 holds a patch of class a, channel 1 a patch
    of a different class b; the multilabel target marks both classes."""
    rng = np.random.default_rng(seed)
    xs, labels = [], []
    for _ in range(n_samples):
        a = int(rng.integers(TWO_CHANNEL_CLASSES))
        b = int((a + 1 + rng.integers(TWO_CHANNEL_CLASSES - 1)) % TWO_CHANNEL_CLASSES)
        x = np.stack(
            [
                _class_template(a, TWO_CHANNEL_FEATURES),
                _class_template(b, TWO_CHANNEL_FEATURES),
            ]
        )
        x += noise * (rng.normal(size=x.shape) + 1j * rng.normal(size=x.shape))
        xs.append(x)
        labels.append((a, b))
    return xs, labels


def digit_template(cls: int) -> np.ndarray:
    img = np.zeros((8, 8))
    for r, c in _DIGIT_GLYPHS[cls % DIGIT_CLASSES]:
        img[r, c] = 1.0
    return img


def make_digit_data(n_samples: int, seed: int, noise: float = 0.1):
    rng = np.random.default_rng(seed)
    xs, labels = [], []
    for _ in range(n_samples):
        cls = int(rng.integers(DIGIT_CLASSES))
        x = digit_template(cls) + noise * rng.normal(size=(8, 8))
        x = x + 1j * (0.3 * noise * rng.normal(size=(8, 8)))
        xs.append(x.astype(np.complex128))
        labels.append(cls)
    return xs, labels


def _init_linear(rng, n_out, n_in) -> ComplexLinear:
    scale = 1.0 / np.sqrt(2 * n_in)
    return ComplexLinear(
        weight=scale * (rng.normal(size=(n_out, n_in)) + 1j * rng.normal(size=(n_out, n_in))),
        bias=np.zeros(n_out, dtype=np.complex128),
    )


def _sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))


def _softmax(v):
    e = np.exp(v - v.max())
    return e / e.sum()


def _sgd_train(model: Model, xs, grads_fn, lr: float, epochs: int, seed_echo) -> None:
    for epoch in range(epochs):
        for k, x in enumerate(xs):
            trace = model.forward(x)
            logits = trace.output.real.ravel()
            if not np.all(np.isfinite(logits)):
                raise RuntimeError(f"training diverged (non-finite logits) with {seed_echo}")
            g = grads_fn(k, logits)
            _, wgrads = loss_backward(model, trace, g)
            for layer, wg in zip(model.layers, wgrads):
                if wg is not None:
                    gw, gb = wg
                    layer.weight = layer.weight - lr * gw
                    layer.bias = layer.bias - lr * gb


def train_toy(task: str, config: TrainConfig | None = None) -> Model:
    """Train a small complex MLP by gradient descent on df/dzbar directions."""
    config = config or TrainConfig()
    rng = np.random.default_rng(config.seed)
    echo = f"task={task} seed={config.seed} lr={config.learning_rate} epochs={config.epochs}"
    if task == "two_channel_synthetic":
        xs, labels = make_two_channel_data(config.n_samples, config.seed + 1, config.noise)
        n_in = 2 * TWO_CHANNEL_FEATURES
        n_cls = TWO_CHANNEL_CLASSES
        model = Model(
            layers=[
                Flatten(),
                _init_linear(rng, config.hidden, n_in),
                CReLU(),
                _init_linear(rng, n_cls, config.hidden),
                RealPart(),
            ],
            input_shape=(2, TWO_CHANNEL_FEATURES),
            name="two_channel_toy",
        )
        targets = np.zeros((len(xs), n_cls))
        for k, (a, b) in enumerate(labels):
            targets[k, a] = targets[k, b] = 1.0

        def grads(k, logits):  # BCE-with-logits gradient
            return _sigmoid(logits) - targets[k]

        _sgd_train(model, xs, grads, config.learning_rate, config.epochs, echo)
        correct = 0
        for x, (a, b) in zip(xs, labels):
            top2 = set(np.argsort(-model(x).real.ravel())[:2].tolist())
            correct += top2 == {a, b}
        model.metadata["train_accuracy"] = correct / len(xs)
        return model
    if task == "mini_digits":
        xs, labels = make_digit_data(config.n_samples, config.seed + 1, config.noise)
        model = Model(
            layers=[
                Flatten(),
                _init_linear(rng, config.hidden, 64),
                CReLU(),
                _init_linear(rng, DIGIT_CLASSES, config.hidden),
                RealPart(),
            ],
            input_shape=(8, 8),
            name="mini_digits_toy",
        )

        def grads(k, logits):  # softmax cross-entropy gradient
            g = _softmax(logits)
            g[labels[k]] -= 1.0
            return g

        _sgd_train(model, xs, grads, config.learning_rate, config.epochs, echo)
        preds = [int(np.argmax(model(x).real.ravel())) for x in xs]
        model.metadata["train_accuracy"] = float(np.mean([p == l for p, l in zip(preds, labels)]))
        return model
    raise ValueError(f"unknown toy task {task!r}")


# ---------------------------------------------------------------------------
# Shipped toy models (random weights, seed-deterministic)
# ---------------------------------------------------------------------------


def toy_linear_model(seed: int = 0) -> Model:
    rng = np.random.default_rng(seed)
    return Model(
        layers=[Flatten(), _random_linear(rng, 3, 6), RealPart()],
        input_shape=(6,),
        name="toy_linear",
    )


def toy_mlp_model(seed: int = 0) -> Model:
    rng = np.random.default_rng(seed)
    return Model(
        layers=[
            Flatten(),
            _random_linear(rng, 10, 8),
            CReLU(),
            _random_linear(rng, 4, 10),
            RealPart(),
        ],
        input_shape=(8,),
        name="toy_mlp_crelu",
    )


def toy_conv_model(seed: int = 0) -> Model:
    rng = np.random.default_rng(seed)
    kernel = (rng.normal(size=(2, 1, 3, 3)) + 1j * rng.normal(size=(2, 1, 3, 3))) / 3.0
    bias = 0.1 * (rng.normal(size=2) + 1j * rng.normal(size=2))
    return Model(
        layers=[
            ComplexConv2d(kernel=kernel, bias=bias),
            CReLU(),
            MagnitudeMaxPool(window=(2, 2)),
            Flatten(),
            _random_linear(rng, 3, 18),
            RealPart(),
        ],
        input_shape=(1, 8, 8),
        name="toy_conv_crelu_maxpool",
    )


def _random_linear(rng, n_out, n_in) -> ComplexLinear:
    scale = 1.0 / np.sqrt(n_in)
    return ComplexLinear(
        weight=scale * (rng.normal(size=(n_out, n_in)) + 1j * rng.normal(size=(n_out, n_in))),
        bias=rng.normal(size=n_out) + 1j * rng.normal(size=n_out),
    )


TOY_MODELS = {
    "linear": toy_linear_model,
    "mlp": toy_mlp_model,
    "conv": toy_conv_model,
}
