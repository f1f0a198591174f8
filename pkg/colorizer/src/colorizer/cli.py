"""Command-line entry points for training and inference."""

from __future__ import annotations

import argparse
import sys

from .data import DataError, load_manifest
from .infer import infer
from .train import ColorizerSpec, expected_channels, train


def _expand(pattern: str) -> list[str]:
    import os
    import re

    base = os.path.basename(pattern)
    m = re.search(r"%(0\d+)?d", base)
    if m is None:
        return [pattern]
    directory = os.path.dirname(pattern) or "."
    rx = re.compile("^" + re.escape(base[:m.start()]) + r"(\d+)"
                    + re.escape(base[m.end():]) + "$")
    hits = sorted((int(h.group(1)), os.path.join(directory, name))
                  for name in os.listdir(directory) if (h := rx.match(name)))
    return [path for _, path in hits]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="colorizer",
        description="Patch-trained channel restoration for keyed elements and mattes.")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("train", help="train from an export-training manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iterations", type=int, default=2000,
                   help="desk-scale default; production runs use 100000")
    p.add_argument("--crop", type=int, default=512)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--base-width", type=int, default=32)
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr-decay", default="none", choices=["none", "cosine"])
    p.add_argument("--loss", default="l1", choices=["l1", "l2"])
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--device", default="cpu")

    p = sub.add_parser("infer", help="predict the withheld channel(s) per frame")
    p.add_argument("--model", required=True)
    p.add_argument("--inputs", required=True, help="input file or %%d pattern")
    p.add_argument("--prev", help="matte mode: prior-frame RGB file or pattern")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--tile", type=int, default=0)
    p.add_argument("--device", default="cpu")

    try:
        args = parser.parse_args(argv if argv is not None else sys.argv[1:])
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2

    try:
        if args.command == "train":
            manifest = load_manifest(args.manifest)
            in_ch, out_ch = expected_channels(manifest)
            spec = ColorizerSpec(
                in_channels=in_ch, out_channels=out_ch, base_width=args.base_width,
                depth=args.depth, crop=args.crop, lr=args.lr, batch=args.batch,
                iterations=args.iterations, seed=args.seed, lr_decay=args.lr_decay,
                loss=args.loss, augment=not args.no_augment)
            losses = train(manifest, spec, args.out, device=args.device)
            if losses:
                print(f"final loss {losses[-1]:.5f}")
        else:
            inputs = _expand(args.inputs)
            if not inputs:
                raise DataError(f"no inputs match {args.inputs}")
            prev = _expand(args.prev) if args.prev else None
            written = infer(args.model, inputs, args.out_dir, prev_paths=prev,
                            tile=args.tile, device=args.device)
            print(f"wrote {len(written)} frames to {args.out_dir}")
    except (DataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
