"""Command-line surface: explain inputs, run axiom checks and experiments,
cross-check against the enumeration oracles, and train toy models.

Exit codes: 0 success, 2 file/validation error (including bad flags),
3 unsupported layer, 1 failed check in oracle-check.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys

import numpy as np

from . import __version__
from .deepcshap import UnsupportedLayerError, explain_deepcshap
from .harness import (
    METHODS,
    REDUCTIONS,
    TrainConfig,
    channel_attribution_score,
    check_axioms,
    explain,
    make_digit_data,
    make_two_channel_data,
    masking_experiment,
    train_toy,
)
from .model import (
    ModelFormatError,
    atomic_write_text,
    load_model,
    load_tensors,
    save_model,
)
from .tensor import ShapeMismatchError, reduce_saliency

_REDUCTION_MODE = {"abs": "abs", "ri": "real_plus_imag"}


def _model_hash(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:16]


def _header_lines(args, model_hash: str) -> list:
    echo = " ".join(
        f"{k}={v}" for k, v in sorted(vars(args).items()) if k != "func" and v is not None
    )
    return [
        f"cvexplain {__version__}",
        f"config: {echo}",
        f"model_hash: {model_hash}",
    ]


def _write_csv(path: str, header: list, columns: list, rows) -> None:
    lines = [f"# {h}" for h in header]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _write_pgm(path: str, header: list, values: np.ndarray) -> None:
    """8-bit ASCII portable graymap, min-max normalized per image."""
    flat = values.ravel()
    lo, hi = float(flat.min()), float(flat.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    pixels = np.round((flat - lo) * scale).astype(int)
    if values.ndim >= 2:
        h, w = values.shape[-2], values.shape[-1]
        h *= int(np.prod(values.shape[:-2], initial=1))
    else:
        h, w = 1, values.size
    lines = ["P2"] + [f"# {line}" for line in header] + [f"{w} {h}", "255"]
    body = pixels.reshape(h, w)
    lines.extend(" ".join(str(v) for v in row) for row in body)
    atomic_write_text(path, "\n".join(lines) + "\n")


def _write_json(path: str, header: list, payload: dict) -> None:
    doc = {
        "tool": header[0],
        "config": header[1].removeprefix("config: "),
        "model_hash": header[2].removeprefix("model_hash: "),
    }
    doc.update(payload)
    atomic_write_text(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def cmd_explain(args) -> int:
    model = load_model(args.model)
    inputs = load_tensors(args.input)
    references = load_tensors(args.reference) if args.reference else None
    header = _header_lines(args, _model_hash(args.model))
    for i, x in enumerate(inputs):
        if args.method == "deepcshap":
            refs = references if references else [np.zeros(model.input_shape)]
            cm = explain_deepcshap(model, x, refs, args.output_index)
            phi = cm.phi
            meta = (
                f"sum_phi_plus_phi0: {(phi.sum() + cm.phi0).real:.17g} "
                f"model_output: {model(x).ravel()[args.output_index].real:.17g}"
            )
        else:
            phi = explain(
                model, x, args.method, args.output_index,
                references=references, steps=args.steps,
            )
            meta = f"model_output: {model(x).ravel()[args.output_index].real:.17g}"
        reduced = reduce_saliency(phi, _REDUCTION_MODE[args.reduce])
        hdr = header + [meta]
        flat = phi.ravel()
        _write_csv(
            f"{args.output}/saliency_complex_{i}.csv",
            hdr,
            ["index", "re", "im"],
            ((k, float(flat[k].real), float(flat[k].imag)) for k in range(flat.size)),
        )
        _write_csv(
            f"{args.output}/saliency_{args.reduce}_{i}.csv",
            hdr,
            ["index", "value"],
            ((k, float(v)) for k, v in enumerate(reduced.ravel())),
        )
        _write_pgm(f"{args.output}/saliency_{i}.pgm", hdr, reduced)
    return 0


def cmd_axioms(args) -> int:
    model = load_model(args.model)
    inputs = load_tensors(args.input)
    references = load_tensors(args.reference)
    report = check_axioms(model, inputs, references)
    _write_json(
        args.output,
        _header_lines(args, _model_hash(args.model)),
        {
            "local_accuracy_error": report.local_accuracy_error,
            "mean_abs_output": report.mean_abs_output,
            "relative_error": report.relative_error,
            "missingness_error_fraction": report.missingness_error_fraction,
            "n_inputs": report.n_inputs,
            "n_outputs": report.n_outputs,
        },
    )
    return 0


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    header = _header_lines(args, _model_hash(args.model))
    if args.experiment == "channels":
        xs, labels = make_two_channel_data(args.n_samples, args.seed)
        samples = [(x, a, [0]) for x, (a, _) in zip(xs, labels)]
        cs = channel_attribution_score(model, samples, args.method, args.reduce, args.steps)
        _write_json(
            args.output,
            header,
            {
                "experiment": "channels",
                "method": args.method,
                "reduction": args.reduce,
                "median_score": cs.median,
                "scores": cs.scores.tolist(),
                "skipped": cs.skipped,
            },
        )
        return 0
    xs, labels = make_digit_data(args.n_samples, args.seed)
    images = [x for x, l in zip(xs, labels) if l == args.source_class]
    result = masking_experiment(
        model,
        images,
        args.source_class,
        args.target_class,
        args.method,
        args.reduce,
        args.fraction,
        steps=args.steps,
        seed=args.seed,
    )
    _write_json(
        args.output,
        header,
        {
            "experiment": "masking",
            "method": args.method,
            "reduction": args.reduce,
            "fraction": args.fraction,
            "median_change": result.median,
            "mean_change": result.mean,
            "changes": result.changes.tolist(),
        },
    )
    return 0


def cmd_train_toy(args) -> int:
    config = TrainConfig(
        hidden=args.hidden,
        learning_rate=args.lr,
        epochs=args.epochs,
        seed=args.seed,
        n_samples=args.n_samples,
    )
    model = train_toy(args.task, config)
    save_model(model, args.output)
    return 0


def cmd_oracle_check(args) -> int:
    """Built-in oracle-equivalence suite; nonzero exit if any check fails."""
    from .harness import toy_conv_model, toy_linear_model, toy_mlp_model
    from .layers import CReLU
    from .maxshap import cmaxpool, maxpool_partials, maxpool_total
    from .oracle import exact_shap, finite_diff_wirtinger

    rng = np.random.default_rng(args.seed)
    checks = []

    lin = toy_linear_model(args.seed).layers[1]
    for trial in range(args.trials):
        x = rng.normal(size=6) + 1j * rng.normal(size=6)
        r = rng.normal(size=6) + 1j * rng.normal(size=6)
        from .deepcshap import layer_partials_linear

        phi = layer_partials_linear(lin.weight, lin.bias, x, r).total[0]
        ref, _ = exact_shap(lambda v: (lin.weight @ v + lin.bias)[0], x, r)
        checks.append(("linear_layer", float(np.abs(phi - ref).max()), 1e-10))

        w = rng.normal(size=4) + 1j * rng.normal(size=4)
        wref = rng.normal(size=4) + 1j * rng.normal(size=4)
        fast = maxpool_total(w, wref)
        ref, _ = exact_shap(cmaxpool, w, wref)
        checks.append(("maxpool_total", float(np.abs(fast - ref).max()), 1e-10))
        pr, pi = maxpool_partials(w, wref)
        checks.append(("maxpool_partials_sum", float(np.abs(pr + pi - fast).max()), 1e-10))

    for name, model in (
        ("toy_linear", toy_linear_model(args.seed)),
        ("toy_mlp", toy_mlp_model(args.seed)),
        ("toy_conv", toy_conv_model(args.seed)),
    ):
        from .gradients import explain_gradient

        x = rng.normal(size=model.input_shape) + 1j * rng.normal(size=model.input_shape)
        grad = explain_gradient(model, x, 0)
        fd = finite_diff_wirtinger(lambda v: model(v).ravel()[0].real, x)
        rel = float(
            np.abs(grad - fd.d_zbar).max() / max(1e-12, np.abs(fd.d_zbar).max())
        )
        checks.append((f"wirtinger_fd_{name}", rel, 1e-4))

    failures = [(n, v, t) for n, v, t in checks if not v <= t]
    payload = {
        "checks": [{"name": n, "value": v, "tolerance": t, "ok": v <= t} for n, v, t in checks],
        "n_failed": len(failures),
    }
    if args.output:
        _write_json(args.output, _header_lines(args, "none"), payload)
    for n, v, t in checks:
        print(f"{'PASS' if v <= t else 'FAIL'} {n}: {v:.3g} (tol {t:g})")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvexplain",
        description="Explain complex-valued neural networks.",
    )
    parser.add_argument("--version", action="version", version=f"cvexplain {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("explain", help="write saliency files for inputs")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--reference")
    p.add_argument("--method", choices=METHODS, default="deepcshap")
    p.add_argument("--reduce", choices=REDUCTIONS, default="ri")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--output-index", type=int, default=0)
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("axioms", help="local accuracy / missingness report")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_axioms)

    p = sub.add_parser("evaluate", help="masking or channel-attribution experiment")
    p.add_argument("--model", required=True)
    p.add_argument("--experiment", choices=("masking", "channels"), required=True)
    p.add_argument("--method", choices=METHODS + ("random",), default="deepcshap")
    p.add_argument("--reduce", choices=REDUCTIONS, default="ri")
    p.add_argument("--fraction", type=float, default=0.2)
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-samples", type=int, default=40)
    p.add_argument("--source-class", type=int, default=0)
    p.add_argument("--target-class", type=int, default=1)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("train-toy", help="train a toy model and save it")
    p.add_argument("--task", choices=("two_channel_synthetic", "mini_digits"), required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--epochs", type=int, default=120)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--n-samples", type=int, default=120)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("oracle-check", help="run the oracle-equivalence suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--output")
    p.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnsupportedLayerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ModelFormatError, ShapeMismatchError, OSError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
