"""Held-out evaluation: full-frame renders scored with PSNR/SSIM buckets.

Buckets follow the report layout: overall, wide-yaw (input-to-target yaw
above the configured threshold), and center-occlusion variants where the
square mask is applied to the input image before encoding. LPIPS is reported
as "n/a" rather than silently substituted with another metric.
"""

from __future__ import annotations

import numpy as np

from .config import RunConfig
from .dataset import SceneSample, load_manifest, load_scene, make_sample
from .errors import ValidationError
from .metrics import apply_center_occlusion, foreground_psnr, psnr, ssim
from .networks.model import Generator
from .renderer import RenderConfig, make_scene_pack, render_image
from .rng import STREAM_FINE, hash_u64


def render_cfg_from(cfg: RunConfig) -> RenderConfig:
    return RenderConfig(
        n_coarse=cfg.render.n_coarse,
        n_fine=cfg.render.n_fine,
        patch_size=cfg.render.patch_size,
        background=tuple(cfg.render.background),
    )


def render_sample(
    gen: Generator,
    sample: SceneSample,
    rcfg: RenderConfig,
    seed: int,
    occlusion_ratio: float = 0.0,
    exclude_hand: str | None = None,
) -> np.ndarray:
    """Target-view render as (H, W, 3); occlusion blacks out the input first."""
    image = sample.input_image
    if occlusion_ratio > 0.0:
        image = apply_center_occlusion(image, occlusion_ratio)
    pack = make_scene_pack(
        sample.meshes, sample.input_camera, image, sample.input_masks,
        exclude_hand=exclude_hand,
    )
    out = render_image(gen, pack, sample.target_camera, rcfg, seed)
    return out[..., :3]


def _bucket_stats(rows: list[dict]) -> dict:
    stats = {
        "n": len(rows),
        "psnr": float(np.mean([r["psnr"] for r in rows])),
        "ssim": float(np.mean([r["ssim"] for r in rows])),
    }
    fg = [r["fg_psnr"] for r in rows if r["fg_psnr"] is not None]
    if fg:
        stats["fg_psnr"] = float(np.mean(fg))
    return stats


def eval_pairs(n_cameras: int, limit: int) -> list[tuple[int, int]]:
    pairs = [(k, (k + 1) % n_cameras) for k in range(n_cameras) if n_cameras > 1]
    return pairs[:limit] if limit > 0 else pairs


def evaluate(
    cfg: RunConfig,
    gen: Generator,
    split: str | None = None,
    max_scenes: int = 0,
    pairs_per_scene: int = 0,
    occlusion_ratios: tuple | None = None,
) -> dict:
    """Returns {"buckets": {...}, "rows": [...], "lpips": "n/a"}."""
    split = split or cfg.eval.split
    man = load_manifest(cfg.data.root)
    n_scenes = man["splits"].get(split, 0)
    if n_scenes == 0:
        raise ValidationError(f"split {split!r} has no scenes")
    if max_scenes > 0:
        n_scenes = min(n_scenes, max_scenes)
    ratios = cfg.eval.occlusion_ratios if occlusion_ratios is None else occlusion_ratios
    rcfg = render_cfg_from(cfg)

    rows = []
    for i in range(n_scenes):
        views = load_scene(cfg.data.root, split, i)
        for k_in, k_tgt in eval_pairs(man["n_cameras"], pairs_per_scene):
            sample = make_sample(views, k_in, k_tgt)
            seed = int(
                hash_u64(cfg.eval.seed, i, k_in, k_tgt, STREAM_FINE) & 0x7FFFFFFF
            )
            target = sample.target_image.transpose(1, 2, 0)
            fg_mask = sample.target_silhouette > 0.5
            for ratio in (0.0, *ratios):
                pred = render_sample(gen, sample, rcfg, seed, occlusion_ratio=ratio)
                rows.append(
                    {
                        "scene": sample.scene_id,
                        "pair": f"{k_in}->{k_tgt}",
                        "occlusion": ratio,
                        "yaw_deg": sample.yaw_deg,
                        "psnr": psnr(pred, target),
                        "ssim": ssim(pred, target),
                        "fg_psnr": foreground_psnr(pred, target, fg_mask),
                    }
                )

    clean = [r for r in rows if r["occlusion"] == 0.0]
    buckets = {"overall": _bucket_stats(clean)}
    wide = [r for r in clean if r["yaw_deg"] > cfg.eval.yaw_threshold_deg]
    if wide:  # an empty bucket stays absent rather than reporting zeros
        buckets[f"yaw_gt_{cfg.eval.yaw_threshold_deg:g}"] = _bucket_stats(wide)
    for ratio in ratios:
        sub = [r for r in rows if r["occlusion"] == ratio]
        if sub:
            buckets[f"occl_{ratio:g}"] = _bucket_stats(sub)
    return {"buckets": buckets, "rows": rows, "lpips": "n/a"}


def report_tsv(report: dict) -> str:
    """Delimited bucket table; one row per bucket, tab separated."""
    lines = ["bucket\tn\tpsnr\tssim\tfg_psnr"]
    for name, stats in report["buckets"].items():
        fg = stats.get("fg_psnr")
        lines.append(
            f"{name}\t{stats['n']}\t{stats['psnr']:.4f}\t{stats['ssim']:.6f}\t"
            + (f"{fg:.4f}" if fg is not None else "n/a")
        )
    lines.append("lpips\t-\tn/a\tn/a\tn/a")
    return "\n".join(lines) + "\n"
