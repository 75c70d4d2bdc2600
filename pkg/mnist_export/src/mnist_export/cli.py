"""Exporter command line: prepare-data, train, export."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .data import prepare_dataset, rotate_clockwise
from .export import ExportJob, export_predictions
from .models import VARIANTS, predict_probs, save_model, train_model


def cmd_prepare_data(args) -> int:
    ds = prepare_dataset(args.data_dir, seed=args.seed)
    print(f"data ready in {args.data_dir} (source: {ds.source}, "
          f"train {len(ds.train_images)}, test {len(ds.test_images)})")
    return 0


def cmd_train(args) -> int:
    ds = prepare_dataset(args.data_dir, seed=args.seed)
    for variant in (VARIANTS if args.model == "all" else [args.model]):
        model = train_model(variant, ds.train_images, ds.train_labels,
                            seed=args.seed, epochs=args.epochs)
        clean = predict_probs(model, variant, ds.test_images)
        acc = float((clean.argmax(axis=1) == ds.test_labels).mean())
        rot = predict_probs(model, variant, rotate_clockwise(ds.test_images))
        path = save_model(model, args.model_dir, variant)
        print(f"{variant}: clean test accuracy {acc:.4f}, "
              f"mean rotated argmax confidence {float(rot.max(axis=1).mean()):.4f} "
              f"-> {path}")
    return 0


def cmd_export(args) -> int:
    job = ExportJob(variant=args.model, data_dir=args.data_dir,
                    model_dir=args.model_dir, out_path=args.out,
                    split=args.split, rotate_fraction=args.rotate_fraction,
                    manifest_path=args.manifest, limit=args.limit,
                    seed=args.seed)
    path = export_predictions(job)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mnist-export",
        description="Export digit-classifier probability vectors in the "
                    "nsl prediction-file format")
    p.add_argument("--data-dir", default="mnist_data",
                   help="IDX data directory (default mnist_data; synthesized "
                        "offline when empty)")
    p.add_argument("--model-dir", default="mnist_models",
                   help="weight directory (default mnist_models)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("prepare-data", help="ensure IDX files exist")
    d.set_defaults(func=cmd_prepare_data)

    t = sub.add_parser("train", help="train and save fixed model weights")
    t.add_argument("--model", choices=VARIANTS + ("all",), default="all")
    t.add_argument("--epochs", type=int, default=12)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("export", help="write a prediction file")
    e.add_argument("--model", choices=VARIANTS, required=True)
    e.add_argument("--split", choices=("train", "test"), default="test")
    e.add_argument("--rotate-fraction", type=float, default=0.0,
                   help="fraction of exported images rotated 90 degrees "
                        "clockwise (default 0)")
    e.add_argument("--manifest", default=None,
                   help="CSV mapping images to example slots "
                        "(example_id,feature,alpha,image_index,perturbed)")
    e.add_argument("--limit", type=int, default=None,
                   help="cap on exported images without a manifest")
    e.add_argument("--out", required=True, help="output prediction file")
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
