"""Matplotlib figure output for training logs, eval reports, and render panels."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ValidationError


def loss_curves_figure(log_path, out_png) -> None:
    """Training-loss curves from an NDJSON log."""
    lines = Path(log_path).read_text().strip().splitlines()
    if not lines:
        raise ValidationError(f"empty training log {log_path}")
    records = [json.loads(x) for x in lines]
    steps = [r["step"] for r in records]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for key in ("rgb", "perc"):
        axes[0].plot(steps, [r["losses"][key] for r in records], label=key)
    axes[0].set_xlabel("step")
    axes[0].set_ylabel("loss")
    axes[0].set_title("reconstruction terms")
    axes[0].legend()
    for key in ("adv_g", "vis_g", "adv_d", "vis_d"):
        axes[1].plot(steps, [r["losses"][key] for r in records], label=key)
    axes[1].set_xlabel("step")
    axes[1].set_title("adversarial terms")
    axes[1].legend()
    fig.tight_layout()
    fig.savefig(out_png, dpi=110)
    plt.close(fig)


def metrics_bar_figure(buckets: dict, out_png) -> None:
    """Grouped bars of PSNR (left axis) and SSIM (right axis) per bucket."""
    names = list(buckets)
    if not names:
        raise ValidationError("no buckets to plot")
    psnr_vals = [buckets[n].get("psnr", float("nan")) for n in names]
    ssim_vals = [buckets[n].get("ssim", float("nan")) for n in names]
    x = np.arange(len(names))
    fig, ax1 = plt.subplots(figsize=(1.6 * len(names) + 3, 4))
    ax1.bar(x - 0.18, psnr_vals, width=0.36, color="#4878d0", label="PSNR (dB)")
    ax1.set_ylabel("PSNR (dB)")
    ax1.set_xticks(x)
    ax1.set_xticklabels(names, rotation=20, ha="right")
    ax2 = ax1.twinx()
    ax2.bar(x + 0.18, ssim_vals, width=0.36, color="#ee854a", label="SSIM")
    ax2.set_ylabel("SSIM")
    ax2.set_ylim(0, 1)
    fig.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(out_png, dpi=110)
    plt.close(fig)


def render_panel_figure(panels: list[tuple[str, np.ndarray]], out_png) -> None:
    """Row of images: (title, HxW or HxWx3 or 3xHxW array in [0, 1])."""
    if not panels:
        raise ValidationError("no panels to draw")
    fig, axes = plt.subplots(1, len(panels), figsize=(3 * len(panels), 3.2))
    if len(panels) == 1:
        axes = [axes]
    for ax, (title, img) in zip(axes, panels):
        arr = np.asarray(img)
        if arr.ndim == 3 and arr.shape[0] == 3:
            arr = arr.transpose(1, 2, 0)
        if arr.ndim == 2:
            ax.imshow(arr, cmap="gray", vmin=0.0, vmax=1.0)
        else:
            ax.imshow(np.clip(arr, 0.0, 1.0))
        ax.set_title(title, fontsize=9)
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(out_png, dpi=110)
    plt.close(fig)
