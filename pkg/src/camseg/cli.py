"""Command-line entry points: synth, train, predict, eval, ablate."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ModelConfig, TrainConfig, VARIANTS, load_model_config, load_train_config
from .data import SHAPES, TEXTURES, load_dataset, make_synthetic_dataset, write_dataset
from .harness import predict, run_ablation, save_log, train
from .metrics import evaluate_dirs


def _add_synth(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("synth", help="generate a synthetic camouflage dataset")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--size", type=int, default=64, help="square side, divisible by 32")
    p.add_argument("--delta", type=float, default=0.5, help="difficulty in [0, 1], 0 = invisible")
    p.add_argument("--texture", choices=TEXTURES, default="noise-octaves")
    p.add_argument("--shape", choices=SHAPES, default="ellipse")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output dir (images/ and masks/ created inside)")


def _add_train(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("train", help="train a model on an images/masks directory pair")
    p.add_argument("--data", required=True, help="dir containing images/ and masks/ subdirs")
    p.add_argument("--out", required=True, help="output dir for checkpoint.pt and train_log.json")
    p.add_argument("--model-config", help="YAML file overriding ModelConfig fields")
    p.add_argument("--train-config", help="YAML file overriding TrainConfig fields")


def _add_predict(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("predict", help="run a checkpoint on one image")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="8-bit grayscale PNG path")


def _add_eval(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("eval", help="score a prediction directory against ground truth")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--report", required=True, help="JSON report path")
    p.add_argument("--table", action="store_true", help="also print an aligned text table")
    p.add_argument("--workers", type=int, default=1)


def _add_ablate(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("ablate", help="train and evaluate one ablation variant")
    p.add_argument("--variant", required=True, choices=sorted(VARIANTS))
    p.add_argument("--data", required=True, help="dir containing images/ and masks/ subdirs")
    p.add_argument("--report", required=True, help="JSON report path")
    p.add_argument("--train-config", help="YAML file overriding TrainConfig fields")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="camseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_synth(sub)
    _add_train(sub)
    _add_predict(sub)
    _add_eval(sub)
    _add_ablate(sub)
    return parser


def _load_pairs(data_dir: str, image_size: int):
    root = Path(data_dir)
    return load_dataset(root / "images", root / "masks", (image_size, image_size))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "synth":
        samples = make_synthetic_dataset(
            args.n, size=(args.size, args.size), delta=args.delta,
            texture=args.texture, shape=args.shape, seed=args.seed,
        )
        write_dataset(samples, args.out)
        print(f"wrote {len(samples)} samples under {args.out}")
        return 0

    if args.command == "train":
        model_config = load_model_config(args.model_config) if args.model_config else ModelConfig()
        train_config = load_train_config(args.train_config) if args.train_config else TrainConfig()
        dataset = _load_pairs(args.data, train_config.image_size)
        result = train(model_config, train_config, dataset)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(out / "checkpoint.pt", result.model, train_config)
        save_log(result.log, out / "train_log.json")
        print(f"trained {result.log['total_steps']} steps, "
              f"final loss {result.final_loss:.4f}, checkpoint at {out / 'checkpoint.pt'}")
        return 0

    if args.command == "predict":
        model, _, train_config = load_checkpoint(args.ckpt)
        with Image.open(args.input) as img:
            rgb = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
        size = train_config.image_size if train_config is not None else 64
        prob = predict(model, rgb.transpose(2, 0, 1), image_size=size)
        Image.fromarray(np.round(prob * 255.0).astype(np.uint8), mode="L").save(args.output)
        print(f"wrote {args.output}")
        return 0

    if args.command == "eval":
        report = evaluate_dirs(args.pred_dir, args.gt_dir, report_path=args.report,
                               workers=args.workers)
        if args.table:
            print(report.table())
        print(json.dumps(report.mean, indent=2, sort_keys=True))
        if report.errors:
            print(f"{len(report.errors)} file(s) skipped, see report errors", file=sys.stderr)
        return 0

    if args.command == "ablate":
        train_config = load_train_config(args.train_config) if args.train_config else TrainConfig()
        dataset = _load_pairs(args.data, train_config.image_size)
        report, result = run_ablation(args.variant, train_config, dataset)
        report.to_json(args.report)
        label = VARIANTS[args.variant]["label"]
        print(f"variant {args.variant} ({label}) final loss {result.final_loss:.4f}")
        print(json.dumps(report.mean, indent=2, sort_keys=True))
        return 0

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
