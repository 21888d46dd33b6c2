"""Command-line entrypoint.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  All randomness in
a subcommand flows from its --seed.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import TravrankError


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _parse_ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="travrank",
        description="Relative traversability estimation from sparse ordinal pair labels.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pairgen", help="generate pending pair tasks for a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--intra-only", action="store_true")
    p.add_argument("--bottom-bias", type=float, default=0.0,
                   help="probability a sampled point is forced into the bottom half")

    p = sub.add_parser("autolabel", help="label pending tasks from tier ground truth")
    p.add_argument("--manifest", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--tiers", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="build a synthetic dataset with oracle labels")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stress-calibration", action="store_true",
                   help="disjoint per-family score ranges (cross-image calibration stress)")
    p.add_argument("--height", type=int, default=48)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--levels", type=int, default=3)

    p = sub.add_parser("train", help="train a model on pairwise annotations")
    p.add_argument("--manifest", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--loss", default="rizz", choices=["rizz", "rizz_l1", "diw", "snow"])
    p.add_argument("--margin", type=float, default=0.5)
    p.add_argument("--clamp", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.99, help="teacher EMA decay")
    p.add_argument("--lambda", dest="consistency_weight", type=float, default=1.0)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--log", default=None, help="per-step training log (default: OUT.log.jsonl)")
    p.add_argument("--intra-only", action="store_true")
    p.add_argument("--equalize-budget", action="store_true")
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--widths", default="8,16,32,64")
    p.add_argument("--pretrained-backbone", default=None)

    p = sub.add_parser("eval", help="disagreement rates of a checkpoint on labeled pairs")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--thresholds", default="0.1,0.25,0.5")
    p.add_argument("--out", required=True)
    p.add_argument("--params", default="student", choices=["student", "teacher"])

    p = sub.add_parser("calibrate", help="tier score cutoffs from training images")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--tiers", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples-per-image", type=int, default=200)
    p.add_argument("--params", default="student", choices=["student", "teacher"])

    p = sub.add_parser("segeval", help="tier segmentation metrics for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--cutoffs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--params", default="student", choices=["student", "teacher"])

    p = sub.add_parser("serve", help="run the annotation task service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--tasks", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--lease-seconds", type=float, default=600.0)
    p.add_argument("--ui-dir", default=None)

    p = sub.add_parser("sweep-labels", help="disagreement vs annotated-image budget")
    p.add_argument("--manifest", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--val-manifest", required=True)
    p.add_argument("--val-annotations", required=True)
    p.add_argument("--fractions", default="0.05,0.1,0.25,0.5,1.0")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--tau", type=float, default=0.25)
    p.add_argument("--loss", default="rizz", choices=["rizz", "rizz_l1", "diw", "snow"])
    p.add_argument("--margin", type=float, default=0.5)
    p.add_argument("--epochs", type=int, default=6)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--widths", default="8,16,32,64")
    p.add_argument("--out", required=True)

    return parser


def cmd_pairgen(args: argparse.Namespace) -> int:
    from .pairgen import generate_pair_tasks, write_tasks
    from .types import load_manifest

    manifest = load_manifest(args.manifest)
    tasks = generate_pair_tasks(
        manifest, args.seed, intra_only=args.intra_only, bottom_fraction=args.bottom_bias
    )
    write_tasks(tasks, args.out)
    print(f"wrote {len(tasks)} tasks to {args.out}")
    return 0


def cmd_autolabel(args: argparse.Namespace) -> int:
    from .pairgen import load_tier_spec, read_tasks
    from .store import write_annotations
    from .types import PairAnnotation, load_manifest

    manifest = load_manifest(args.manifest)
    tasks = read_tasks(args.tasks)
    spec = load_tier_spec(args.tiers)
    class_maps = {}
    for entry in manifest.images:
        class_maps[entry.image_id] = spec.class_map_for(manifest, entry.image_id)
    annotations = []
    for task in tasks:
        from .pairgen import autolabel_from_tiers

        t = autolabel_from_tiers(
            int(class_maps[task.a.image_id][task.a.y, task.a.x]),
            int(class_maps[task.b.image_id][task.b.y, task.b.x]),
            spec.table,
        )
        annotations.append(
            PairAnnotation(
                pair_id=task.task_id, a=task.a, b=task.b, t=t, kind=task.kind, source="auto"
            )
        )
    write_annotations(annotations, args.out)
    print(f"wrote {len(annotations)} annotations to {args.out}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    from .synth import SynthConfig, build_synth_dataset

    config = SynthConfig(height=args.height, width=args.width, levels=args.levels)
    manifest, annotations = build_synth_dataset(
        args.out, args.n, args.seed, config, stress=args.stress_calibration
    )
    print(
        f"wrote {len(manifest)} scenes and {len(annotations)} annotations under {args.out}"
    )
    return 0


def _train_config(args: argparse.Namespace) -> "TrainConfig":
    from .trainer import TrainConfig

    return TrainConfig(
        loss_name=args.loss,
        margin=args.margin,
        clamp=getattr(args, "clamp", 1.0),
        consistency_weight=getattr(args, "consistency_weight", 1.0),
        ema_decay=getattr(args, "alpha", 0.99),
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        seed=getattr(args, "seed", 0),
        augment=not getattr(args, "no_augment", False),
        intra_only=getattr(args, "intra_only", False),
        equalize_budget=getattr(args, "equalize_budget", False),
        encoder_widths=tuple(_parse_ints(args.widths)),
        pretrained_backbone=getattr(args, "pretrained_backbone", None),
    )


def cmd_train(args: argparse.Namespace) -> int:
    from .store import read_annotations
    from .trainer import train
    from .types import load_manifest

    manifest = load_manifest(args.manifest)
    annotations = read_annotations(args.annotations)
    log_path = args.log or f"{args.out}.log.jsonl"
    result = train(_train_config(args), manifest, annotations, out_path=args.out, log_path=log_path)
    final = result.history[-1] if result.history else {}
    print(
        f"trained {len(result.history)} steps; final total loss "
        f"{final.get('total', float('nan')):.5f}; checkpoint at {args.out}"
    )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    from .evaluate import evaluate_checkpoint_hdr
    from .metrics import format_hdr_table, write_hdr_report
    from .store import read_annotations
    from .types import load_manifest

    manifest = load_manifest(args.manifest)
    annotations = read_annotations(args.annotations)
    rows = evaluate_checkpoint_hdr(
        args.checkpoint,
        manifest,
        annotations,
        thresholds=_parse_floats(args.thresholds),
        params=args.params,
    )
    write_hdr_report(rows, args.out)
    print(format_hdr_table(rows))
    print(f"report written to {args.out}")
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    from .evaluate import calibrate_cutoffs
    from .model import load_checkpoint
    from .pairgen import load_tier_spec
    from .types import load_manifest

    manifest = load_manifest(args.manifest)
    spec = load_tier_spec(args.tiers)
    model = load_checkpoint(args.checkpoint).build(args.params)
    cutoffs = calibrate_cutoffs(
        model, manifest, spec, seed=args.seed, samples_per_image=args.samples_per_image
    )
    doc = {"cutoffs": cutoffs.to_json(), "tier_spec": spec.to_json()}
    with Path(args.out).open("w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    print(
        f"cutoffs: {cutoffs.cutoff_3:.4f} > {cutoffs.cutoff_2:.4f} > {cutoffs.cutoff_1:.4f} "
        f"written to {args.out}"
    )
    return 0


def cmd_segeval(args: argparse.Namespace) -> int:
    from .evaluate import evaluate_segmentation
    from .metrics import TierCutoffs
    from .model import load_checkpoint
    from .pairgen import tier_spec_from_json
    from .types import load_manifest

    manifest = load_manifest(args.manifest)
    with Path(args.cutoffs).open() as fh:
        doc = json.load(fh)
    cutoffs = TierCutoffs.from_json(doc["cutoffs"])
    spec = tier_spec_from_json(doc["tier_spec"])
    model = load_checkpoint(args.checkpoint).build(args.params)
    result = evaluate_segmentation(model, manifest, spec, cutoffs, n_classes=spec.n_tiers)
    with Path(args.out).open("w") as fh:
        json.dump(result.to_json(), fh, indent=2)
        fh.write("\n")
    print(
        f"mIOU {result.miou:.4f}  fw-mIOU {result.fw_miou:.4f}  "
        f"mAcc {result.macc:.4f}  fw-mAcc {result.fw_macc:.4f}"
    )
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        args.manifest,
        args.tasks,
        args.annotations,
        lease_seconds=args.lease_seconds,
        ui_dir=args.ui_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_sweep_labels(args: argparse.Namespace) -> int:
    from .store import read_annotations
    from .sweep import sweep_label_budget, write_sweep_report
    from .types import load_manifest

    manifest = load_manifest(args.manifest)
    annotations = read_annotations(args.annotations)
    val_manifest = load_manifest(args.val_manifest)
    val_annotations = read_annotations(args.val_annotations)
    base = _train_config(args)
    report = sweep_label_budget(
        manifest,
        annotations,
        val_manifest,
        val_annotations,
        fractions=_parse_floats(args.fractions),
        seeds=_parse_ints(args.seeds),
        base_config=base,
        tau=args.tau,
    )
    write_sweep_report(report, args.out)
    for fraction in sorted(report["medians"]):
        print(f"fraction {fraction:>5.2f}: median HDR_{args.tau} = {report['medians'][fraction]:.4f}")
    print(f"report written to {args.out}")
    return 0


COMMANDS = {
    "pairgen": cmd_pairgen,
    "autolabel": cmd_autolabel,
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "calibrate": cmd_calibrate,
    "segeval": cmd_segeval,
    "serve": cmd_serve,
    "sweep-labels": cmd_sweep_labels,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (TravrankError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
