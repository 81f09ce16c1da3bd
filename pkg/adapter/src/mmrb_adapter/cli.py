"""Command-line entry point matching the external-predictor protocol.

    mmrb-adapter --manifest <path> --output <dir>

is exactly how the benchmark harness invokes an external predictor. The
bundled predict_fn is the synthetic-dataset inverse, which scores a perfect
mIoU on any dataset whose tensors encode their own label map. To serve a
real model instead, write your own entry point that builds a predict_fn
around the model and hands it to :func:`mmrb_adapter.serve_batch`; the
protocol (manifest in, one PNG label map per sample out, exit status) stays
the same.

Exit status: 0 when every sample was predicted, 1 when a sample failed (its
id is on stderr), 2 on bad invocation or an unreadable manifest.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import AdapterError
from .protocol import parse_manifest
from .session import AdapterSession
from .synthetic import synthetic_inverse


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mmrb-adapter",
        description="Serve synthetic-inverse predictions for one benchmark scenario.")
    parser.add_argument("--manifest", required=True,
                        help="scenario manifest to predict from")
    parser.add_argument("--output", required=True,
                        help="directory for <sample_id>.png label maps")
    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    try:
        manifest = parse_manifest(args.manifest)
        session = AdapterSession(manifest_path=Path(args.manifest),
                                 output_dir=Path(args.output),
                                 predict_fn=synthetic_inverse(manifest))
    except AdapterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return session.run()
