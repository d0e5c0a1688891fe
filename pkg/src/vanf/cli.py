"""Command line interface.

Subcommands: synth (write the procedural dataset), train (optimize on it),
render (one novel view from a checkpoint), eval (scored report with figures),
gradcheck (finite-difference verification of the backward rules).

Exit codes: 0 success, 1 usage error, 2 invalid input or state, 3 a
correctness check failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .config import RunConfig, apply_override, load_config, save_config
from .errors import CheckFailure, ValidationError
from .image_io import write_pgm, write_ppm


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we map usage to 1
        raise _UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; defaults apply when omitted")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted config override, e.g. train.steps=500 (repeatable)")


def build_parser() -> _Parser:
    parser = _Parser(prog="vanf", description=__doc__.split("\n\n")[1])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", help="generate the two-hand proxy dataset")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train generator and discriminator")
    _add_common(p)
    p.add_argument("--resume", metavar="CKPT", help="checkpoint to continue from")
    p.add_argument("--ignore-checkpoint-hash", action="store_true",
                   help="load even if the checkpoint was written under a different model config")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("render", help="render a novel view from a checkpoint")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.add_argument("--scene", type=int, default=0)
    p.add_argument("--input-cam", type=int, default=0)
    p.add_argument("--target-cam", type=int, default=1)
    p.add_argument("--exclude-hand", choices=("left", "right"),
                   help="drop one hand from the scene before rendering")
    p.add_argument("--dump-visibility", action="store_true",
                   help="also write predicted and reference visibility maps")
    p.add_argument("--out", default="renders", metavar="DIR")
    p.add_argument("--ignore-checkpoint-hash", action="store_true")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("eval", help="score held-out renders and write a report")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default=None, choices=("train", "test"))
    p.add_argument("--max-scenes", type=int, default=0, help="0 means the whole split")
    p.add_argument("--pairs", type=int, default=0, help="camera pairs per scene; 0 means all")
    p.add_argument("--out", default="reports", metavar="DIR")
    p.add_argument("--ignore-checkpoint-hash", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference checks of the backward rules")
    _add_common(p)
    p.add_argument("--check", action="append", default=[], metavar="NAME",
                   help="run only the named checks (repeatable)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    for spec in args.override:
        apply_override(cfg, spec)
    return cfg


def cmd_synth(cfg: RunConfig, args) -> int:
    from .dataset import synth_dataset

    man = synth_dataset(cfg.data)
    print(f"dataset at {cfg.data.root}: "
          + ", ".join(f"{k}={v}" for k, v in man["splits"].items())
          + f", {man['n_cameras']} cameras, {man['image_size']}px")
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    from .figures import loss_curves_figure
    from .training.loop import run_training

    run_dir = Path(cfg.train.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    save_config(cfg, run_dir / "config.json")
    summary = run_training(cfg, resume=args.resume,
                           ignore_hash=args.ignore_checkpoint_hash, quiet=args.quiet)
    loss_curves_figure(run_dir / "train_log.ndjson", run_dir / "loss_curves.png")
    print(json.dumps(summary))
    return 0


def _load_trainer(cfg: RunConfig, checkpoint: str, ignore_hash: bool):
    from .training.loop import Trainer

    trainer = Trainer.create(cfg)
    trainer.load(checkpoint, ignore_hash=ignore_hash)
    return trainer


def cmd_render(cfg: RunConfig, args) -> int:
    from .dataset import load_scene, make_sample
    from .evaluation import render_cfg_from, render_sample
    from .figures import render_panel_figure
    from .networks.discriminator import stack_discriminator_input
    from .visibility.maps import render_visibility_gt

    trainer = _load_trainer(cfg, args.checkpoint, args.ignore_checkpoint_hash)
    views = load_scene(cfg.data.root, args.split, args.scene)
    n_cams = len(views.cameras)
    for label, k in (("input-cam", args.input_cam), ("target-cam", args.target_cam)):
        if not 0 <= k < n_cams:
            raise ValidationError(f"--{label} {k} out of range, scene has {n_cams} cameras")
    sample = make_sample(views, args.input_cam, args.target_cam)

    pred = render_sample(trainer.gen, sample, render_cfg_from(cfg), seed=cfg.eval.seed,
                         exclude_hand=args.exclude_hand)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = [out / "render.ppm"]
    write_ppm(files[0], pred)
    panels = [("input", sample.input_image), ("render", pred),
              ("target", sample.target_image)]

    if args.dump_visibility:
        size = pred.shape[0]
        if size % 16 or pred.shape[1] != size:
            raise ValidationError(
                f"visibility prediction needs square frames with side % 16 == 0, got {pred.shape[:2]}")
        stacked = stack_discriminator_input(
            sample.input_image, pred.transpose(2, 0, 1),
            sample.input_corr, sample.target_corr)
        with ad.no_grad():
            _, vmap = trainer.disc(stacked)
        if vmap is None:
            raise ValidationError("checkpoint's discriminator has no visibility head")
        gt = render_visibility_gt(list(sample.meshes), sample.input_camera,
                                  sample.target_camera)
        files += [out / "visibility_pred.pgm", out / "visibility_gt.pgm"]
        write_pgm(files[1], vmap.data)
        write_pgm(files[2], gt)
        panels += [("visibility", vmap.data), ("visibility ref", gt)]

    files.append(out / "render_panel.png")
    render_panel_figure(panels, files[-1])
    for f in files:
        print(f)
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    from .evaluation import evaluate, report_tsv
    from .figures import metrics_bar_figure

    trainer = _load_trainer(cfg, args.checkpoint, args.ignore_checkpoint_hash)
    report = evaluate(cfg, trainer.gen, split=args.split,
                      max_scenes=args.max_scenes, pairs_per_scene=args.pairs)
    tsv = report_tsv(report)
    sys.stdout.write(tsv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval_report.tsv").write_text(tsv)
    (out / "eval_report.json").write_text(json.dumps(report, indent=2) + "\n")
    metrics_bar_figure(report["buckets"], out / "metrics_bars.png")
    print(f"report files in {out}", file=sys.stderr)
    return 0


def cmd_gradcheck(cfg: RunConfig, args) -> int:
    from .gradchecks import CHECKS, run_checks

    unknown = [n for n in args.check if n not in CHECKS]
    if unknown:
        raise ValidationError(f"unknown checks {unknown}; available: {sorted(CHECKS)}")
    report = run_checks(args.check or None, seed=args.seed)
    print(json.dumps(report, indent=2))
    if not report["ok"]:
        failed = [c["name"] for c in report["checks"] if not c["ok"]]
        raise CheckFailure(f"gradient checks failed: {', '.join(failed)}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        cfg = _resolve_config(args)
        return args.func(cfg, args)
    except CheckFailure as exc:
        print(f"check failure: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
