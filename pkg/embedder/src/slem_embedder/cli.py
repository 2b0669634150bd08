"""Command-line entry point: ``slem-export``."""

from __future__ import annotations

import argparse
import json
import sys

from .encoder import EncodingError, HFTextEncoder
from .export import export_embeddings
from .slemfile import SlemFormatError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slem-export",
        description="Run a pretrained encoder over a labeled text dataset and "
        "write mean-pooled sentence embeddings in the binary format the "
        "retrieval engine consumes.",
    )
    parser.add_argument("--dataset", required=True, help="text<TAB>label lines, one record per line")
    parser.add_argument("--out", required=True, help="output embedding file path")
    parser.add_argument("--model", required=True, help="encoder model directory or hub id")
    parser.add_argument("--layer", type=int, default=-1, help="hidden layer to pool (default: final)")
    parser.add_argument(
        "--include-boundary-tokens", action="store_true",
        help="pool sequence-boundary/special positions too (default: exclude)",
    )
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--max-length", type=int, default=None)
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        encoder = HFTextEncoder(args.model, device=args.device)
        manifest = export_embeddings(
            args.dataset,
            args.out,
            encoder.tokenizer,
            encoder.model,
            args.model,
            layer=args.layer,
            include_boundary_tokens=args.include_boundary_tokens,
            batch_size=args.batch_size,
            max_length=args.max_length,
            device=args.device,
        )
    except (EncodingError, SlemFormatError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(json.dumps(manifest.to_dict(), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
