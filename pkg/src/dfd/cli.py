"""Command-line entry points: gen, train, eval, ablate, export-embeddings.

Exit codes: 0 success, 1 invalid input (bad spec/config, missing files),
2 unexpected runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from .graph import GraphError
from .metrics import MetricError, project_2d
from .synthdata import DatasetError, SyntheticSpec, generate, write_splits
from .training import (TrainConfig, TrainingError, atomic_write_text,
                       canonical_json, evaluate_checkpoint, train)

USAGE_ERRORS = (DatasetError, GraphError, MetricError, ValueError,
                FileNotFoundError, NotADirectoryError, KeyError,
                json.JSONDecodeError)


def _load_json(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"no such file: {p}")
    return json.loads(p.read_text())


def cmd_gen(args) -> int:
    spec = SyntheticSpec() if args.spec is None else SyntheticSpec.from_dict(_load_json(args.spec))
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    write_splits(generate(spec), args.out)
    print(f"wrote train/val/test under {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = TrainConfig() if args.config is None else TrainConfig.from_dict(_load_json(args.config))
    cfg = dataclasses.replace(cfg, data_dir=str(args.data), out_dir=str(args.out))
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    cfg.validate()
    artifacts = train(cfg)
    print(f"best epoch {artifacts.best_epoch} "
          f"(val score {artifacts.best_val_score:.6f}); "
          f"artifacts under {args.out}")
    return 0


def cmd_eval(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.is_dir():
        raise FileNotFoundError(f"no such checkpoint: {ckpt}")
    report, _ = evaluate_checkpoint(ckpt, args.data, args.split)
    payload = canonical_json(report)
    if args.out is not None:
        atomic_write_text(args.out, payload)
    print(payload, end="")
    return 0


def cmd_ablate(args) -> int:
    from .experiments import run_ablation

    spec = SyntheticSpec() if args.spec is None else SyntheticSpec.from_dict(_load_json(args.spec))
    cfg = TrainConfig() if args.config is None else TrainConfig.from_dict(_load_json(args.config))
    if args.epochs is not None:
        stage1 = max(1, round(0.15 * args.epochs))
        cfg = dataclasses.replace(cfg, epochs_total=args.epochs, epochs_stage1=stage1)
    seeds = list(range(args.base_seed, args.base_seed + args.seeds))
    result = run_ablation(spec, cfg, seeds, args.out,
                          progress=lambda msg: print(f"[ablate] {msg}", flush=True))
    print((Path(args.out) / "ablation_summary.txt").read_text(), end="")
    return 0 if result["records"] else 2


def cmd_export_embeddings(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.is_dir():
        raise FileNotFoundError(f"no such checkpoint: {ckpt}")
    _, embeddings = evaluate_checkpoint(ckpt, args.data, args.split)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for tag in ("c", "b"):
        h = embeddings[f"h_{tag}"]
        if h is None:
            continue
        np.savetxt(out / f"embeddings_{tag}.csv", h, fmt="%.17g", delimiter=",")
        coords, degenerate = project_2d(h)
        np.savetxt(out / f"proj_{tag}.csv", coords, fmt="%.17g", delimiter=",")
        if degenerate:
            print(f"warning: h_{tag} projection is rank-deficient", file=sys.stderr)
    print(f"wrote embeddings under {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfd",
        description="dual-stream feature decorrelation: data generation, "
                    "training, evaluation and ablations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--spec", default=None, help="SyntheticSpec JSON (defaults used if omitted)")
    p.add_argument("--seed", type=int, default=None, help="override spec seed")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", default=None, help="TrainConfig JSON (defaults used if omitted)")
    p.add_argument("--data", required=True, help="dataset directory (train/val/test)")
    p.add_argument("--out", required=True, help="run output directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", default=None, help="write the report JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="run the 4-variant ablation grid over seeds")
    p.add_argument("--spec", default=None, help="SyntheticSpec JSON")
    p.add_argument("--config", default=None, help="base TrainConfig JSON")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds")
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=None,
                   help="override epoch budget (stage 1 scales to 15%%)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("export-embeddings",
                       help="export H_c/H_b and their 2-D projections as CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_embeddings)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except USAGE_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (TrainingError, Exception) as e:  # noqa: BLE001 - CLI boundary
        traceback.print_exc()
        print(f"runtime failure: {e}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())
