"""Command line: cvexport <checkpoint> <arch.json> <outdir>."""

import argparse
import sys

from . import __version__
from .export import ExportBundle, UnsupportedLayerError, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvexport",
        description="Export a complex-valued torch checkpoint to the cvexplain model format.",
    )
    parser.add_argument("--version", action="version", version=f"cvexport {__version__}")
    parser.add_argument("checkpoint", help="torch checkpoint (state dict)")
    parser.add_argument("arch", help="architecture description JSON")
    parser.add_argument("outdir", help="output directory for the bundle")
    parser.add_argument("--probe-count", type=int, default=None)
    parser.add_argument("--probe-seed", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        bundle: ExportBundle = export(
            args.checkpoint,
            args.arch,
            args.outdir,
            probe_count=args.probe_count,
            probe_seed=args.probe_seed,
        )
    except UnsupportedLayerError as exc:
        print(f"error: unsupported layer: {exc}", file=sys.stderr)
        return 3
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in (
        bundle.model_path,
        bundle.probe_inputs_path,
        bundle.expected_outputs_path,
        bundle.manifest_path,
    ):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
