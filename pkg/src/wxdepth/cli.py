"""Command line entry points: synth, augment, train, eval."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from wxdepth.evaluation import evaluate, write_report
from wxdepth.synthdata import augment_dataset, generate_dataset
from wxdepth.trainer import TrainConfig, run_training


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wxdepth", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a synthetic stereo dataset with ground truth")
    synth.add_argument("--scenes", type=int, required=True)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True)
    synth.add_argument("--width", type=int, default=192)
    synth.add_argument("--height", type=int, default=64)

    augment = sub.add_parser("augment", help="render weather variants next to the clear images")
    augment.add_argument("--data", required=True)
    augment.add_argument("--weathers", default="rain,snow,fog")
    augment.add_argument("--magnitudes", default="1,2")
    augment.add_argument("--seed", type=int, default=0)
    augment.add_argument("--visibility-m1", type=float, default=150.0)
    augment.add_argument("--visibility-m2", type=float, default=75.0)

    train = sub.add_parser("train", help="run the curriculum training loop")
    train.add_argument("--config", required=True, help="TrainConfig JSON file")
    train.add_argument("--resume", default=None, help="checkpoint to resume from")
    train.add_argument("--out", default=None, help="override the config's output directory")

    evaluate_ = sub.add_parser("eval", help="evaluate a checkpoint per weather variant")
    evaluate_.add_argument("--checkpoint", required=True)
    evaluate_.add_argument("--dataset", required=True)
    evaluate_.add_argument("--variants", default=None, help="comma list; default: all on disk")
    evaluate_.add_argument("--out", required=True, help="report JSON path")
    return parser


def _run_synth(args) -> int:
    from wxdepth.geometry import default_rig

    rig = default_rig(args.width, args.height)
    root = generate_dataset(args.out, args.scenes, seed=args.seed, rig=rig)
    print(f"wrote {args.scenes} scenes under {root}")
    return 0


def _run_augment(args) -> int:
    written = augment_dataset(
        args.data,
        weathers=[w for w in args.weathers.split(",") if w],
        magnitudes=[int(m) for m in args.magnitudes.split(",") if m],
        seed=args.seed,
        visibility_m1=args.visibility_m1,
        visibility_m2=args.visibility_m2,
    )
    print(f"rendered variants: {', '.join(written)}")
    return 0


def _run_train(args) -> int:
    config = TrainConfig.from_json(args.config)
    if args.out is not None:
        config = dataclasses.replace(config, out_dir=args.out)
    result = run_training(config, resume_from=args.resume)
    print(f"finished at level {result.final_level}; checkpoint: {result.checkpoint_path}")
    print(f"log: {result.log_path}")
    return 0


def _run_eval(args) -> int:
    variants = [v for v in args.variants.split(",") if v] if args.variants else None
    table = evaluate(args.checkpoint, args.dataset, variants)
    write_report(table, args.out)
    for name, metrics in table.items():
        if metrics is None:
            print(f"{name:>10}: absent")
        else:
            print(
                f"{name:>10}: absrel {metrics.absrel:.4f}  rmse {metrics.rmse:.3f}  a1 {metrics.a1:.3f}"
            )
    print(f"report written to {args.out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "synth": _run_synth,
        "augment": _run_augment,
        "train": _run_train,
        "eval": _run_eval,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
