"""Alternating generator/discriminator optimization over dataset samples.

Every random choice a step makes (scene, view pair, patch position, sample
jitter) is a counter hash of (training seed, step index), so a run is a pure
function of its config and dataset, and a resumed run continues bit-for-bit
where the interrupted one left off.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..config import RunConfig, model_hash
from ..dataset import SceneSample, load_manifest, load_scene, make_sample
from ..errors import CheckpointError, ValidationError
from ..networks.discriminator import Discriminator, stack_discriminator_input
from ..networks.model import Generator, create_discriminator
from ..renderer import RenderConfig, encode_input, make_scene_pack, render_rect
from ..rng import STREAM_PATCH, hash_u01, hash_u64
from ..visibility.maps import render_visibility_gt
from .checkpoint import load_checkpoint, save_checkpoint
from .losses import (
    PerceptualNet,
    loss_adv_discriminator,
    loss_adv_generator,
    loss_perc,
    loss_rgb,
    loss_vis,
    make_perceptual,
)
from .optimizer import Adam, lr_at_step, milestones_for


@dataclass
class StepMetrics:
    rgb: float = 0.0
    perc: float = 0.0
    adv_g: float = 0.0
    vis_g: float = 0.0
    adv_d: float = 0.0
    vis_d: float = 0.0
    total_g: float = 0.0

    def as_dict(self) -> dict:
        return {
            "rgb": self.rgb, "perc": self.perc, "adv_g": self.adv_g,
            "vis_g": self.vis_g, "adv_d": self.adv_d, "vis_d": self.vis_d,
            "total_g": self.total_g,
        }


@dataclass
class Trainer:
    cfg: RunConfig
    gen: Generator
    disc: Discriminator
    opt_g: Adam
    opt_d: Adam
    perceptual: PerceptualNet
    step: int = 0
    milestones: tuple = ()
    _scene_cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def create(cls, cfg: RunConfig) -> "Trainer":
        m = cfg.model
        gen = Generator.create(
            seed=m.seed, d_t=m.d_t, d_g=m.d_g, n_freqs=m.n_freqs, hidden=m.hidden,
            w_init=m.w_init, use_nearest=m.use_nearest, use_mirrored=m.use_mirrored,
            fusion_visibility=m.fusion_visibility,
        )
        disc = create_discriminator(m.seed, dual_head=m.disc_dual_head, base=m.disc_base)
        return cls(
            cfg=cfg,
            gen=gen,
            disc=disc,
            opt_g=Adam(gen.named_params()),
            opt_d=Adam(disc.named_params()),
            perceptual=make_perceptual(cfg.data.seed),
            milestones=milestones_for(cfg.train.steps, cfg.train.milestone_fractions),
        )

    # -- deterministic per-step choices -------------------------------------
    def _pick_sample(self, step: int, elem: int, n_scenes: int, n_cams: int,
                     size: int) -> tuple:
        def u(j):
            return float(hash_u01(self.cfg.train.seed, step, elem, STREAM_PATCH, j))

        scene = min(int(u(0) * n_scenes), n_scenes - 1)
        k_in = min(int(u(1) * n_cams), n_cams - 1)
        if n_cams > 1:
            k_tgt = min(int(u(2) * (n_cams - 1)), n_cams - 2)
            if k_tgt >= k_in:
                k_tgt += 1
        else:
            k_tgt = k_in
        p = self.cfg.render.patch_size
        if p > size:
            raise ValidationError(f"patch size {p} exceeds image size {size}")
        v0 = min(int(u(3) * (size - p + 1)), size - p)
        u0 = min(int(u(4) * (size - p + 1)), size - p)
        seed = int(hash_u64(self.cfg.train.seed, step, elem, STREAM_PATCH, 9) & 0x7FFFFFFF)
        return scene, k_in, k_tgt, v0, u0, seed

    def _scene(self, index: int):
        if index not in self._scene_cache:
            self._scene_cache[index] = load_scene(self.cfg.data.root, "train", index)
        return self._scene_cache[index]

    # -- one optimization step ----------------------------------------------
    def train_step(self) -> StepMetrics:
        cfg = self.cfg
        man = getattr(self, "_manifest", None)
        if man is None:
            man = load_manifest(cfg.data.root)
            self._manifest = man
        n_scenes = man["splits"]["train"]
        n_cams = man["n_cameras"]
        p = cfg.render.patch_size
        lw = cfg.train
        needs_disc = lw.lambda_adv > 0.0 or lw.lambda_vis > 0.0
        rcfg = RenderConfig(
            n_coarse=cfg.render.n_coarse, n_fine=cfg.render.n_fine,
            patch_size=p, background=tuple(cfg.render.background),
        )
        metrics = StepMetrics()
        batch = lw.batch_size
        fakes = []  # detached renders + crops, reused by the discriminator step

        self.opt_g.zero_grad()
        self.opt_d.zero_grad()

        for elem in range(batch):
            scene_i, k_in, k_tgt, v0, u0, seed = self._pick_sample(
                self.step, elem, n_scenes, n_cams, man["image_size"]
            )
            views = self._scene(scene_i)
            sample = make_sample(views, k_in, k_tgt)
            pack = make_scene_pack(
                sample.meshes, sample.input_camera, sample.input_image, sample.input_masks
            )
            sl = np.s_[v0 : v0 + p, u0 : u0 + p]
            target_crop = sample.target_image.transpose(1, 2, 0)[sl]
            sil_crop = sample.target_silhouette[sl]
            input_crop = sample.input_image[:, v0 : v0 + p, u0 : u0 + p]
            corr_in_crop = sample.input_corr[:, v0 : v0 + p, u0 : u0 + p]
            corr_tgt_crop = sample.target_corr[:, v0 : v0 + p, u0 : u0 + p]

            with ad.Tape() as tape:
                fm = encode_input(self.gen, pack)
                out = render_rect(
                    self.gen, pack, sample.target_camera, v0, u0, p, p, rcfg, seed, fm=fm
                )
                rgb = ad.getitem(out, (slice(None), slice(None), slice(0, 3)))
                l_rgb = loss_rgb(rgb, target_crop)
                l_perc = loss_perc(
                    ad.transpose(rgb, (2, 0, 1)), target_crop.transpose(2, 0, 1),
                    self.perceptual,
                )
                terms = [ad.mul(lw.lambda_rgb, l_rgb), ad.mul(lw.lambda_perc, l_perc)]
                l_adv_g = l_vis_g = 0.0
                if needs_disc:
                    d_in = stack_discriminator_input(
                        input_crop, ad.transpose(rgb, (2, 0, 1)), corr_in_crop, corr_tgt_crop
                    )
                    logit_f, v_f = self.disc(d_in)
                    t_adv = loss_adv_generator(logit_f)
                    terms.append(ad.mul(lw.lambda_adv, t_adv))
                    l_adv_g = float(t_adv.data)
                    if v_f is not None:
                        t_vis = loss_vis(v_f, sil_crop)
                        terms.append(ad.mul(lw.lambda_vis, t_vis))
                        l_vis_g = float(t_vis.data)
                total = terms[0]
                for t in terms[1:]:
                    total = ad.add(total, t)
                scaled = ad.mul(1.0 / batch, total)
                tape.backward(scaled)

            metrics.rgb += float(l_rgb.data) / batch
            metrics.perc += float(l_perc.data) / batch
            metrics.adv_g += l_adv_g / batch
            metrics.vis_g += l_vis_g / batch
            metrics.total_g += float(total.data) / batch
            if needs_disc:
                visgt = render_visibility_gt(
                    sample.meshes, sample.input_camera, sample.target_camera
                )[sl]
                fakes.append(
                    (out.data[..., :3].transpose(2, 0, 1).copy(), input_crop,
                     corr_in_crop, corr_tgt_crop, target_crop, sil_crop, visgt)
                )

        lr = lr_at_step(lw.lr, self.step, self.milestones)
        self.opt_g.step(lr)
        # adversarial passes above deposit spurious grads on frozen nets
        self.opt_d.zero_grad()

        if needs_disc:
            with ad.Tape() as tape:
                total_d = None
                for fake_rgb, input_crop, corr_in, corr_tgt, target_crop, sil_crop, visgt in fakes:
                    real_in = stack_discriminator_input(
                        input_crop, target_crop.transpose(2, 0, 1), corr_in, corr_tgt
                    )
                    logit_r, v_r = self.disc(real_in)
                    fake_in = stack_discriminator_input(
                        input_crop, fake_rgb, corr_in, corr_tgt
                    )
                    logit_f, v_f = self.disc(fake_in)
                    part = loss_adv_discriminator(logit_r, logit_f)
                    metrics.adv_d += float(part.data) / batch
                    if v_r is not None:
                        t_vis = ad.add(loss_vis(v_r, sil_crop), loss_vis(v_f, visgt))
                        part = ad.add(part, ad.mul(lw.lambda_vis, t_vis))
                        metrics.vis_d += float(t_vis.data) / batch
                    part = ad.mul(1.0 / batch, part)
                    total_d = part if total_d is None else ad.add(total_d, part)
                tape.backward(total_d)
            self.opt_d.step(lr)
            self.opt_g.zero_grad()

        self.step += 1
        return metrics

    # -- persistence ----------------------------------------------------------
    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for name, t in self.gen.named_params().items():
            out[f"gen.{name}"] = t.data
        for name, t in self.disc.named_params().items():
            out[f"disc.{name}"] = t.data
        out.update(self.opt_g.state_arrays("opt_g"))
        out.update(self.opt_d.state_arrays("opt_d"))
        out["meta.step"] = np.array([self.step], dtype=np.int64)
        out["meta.config_hash"] = np.frombuffer(model_hash(self.cfg), dtype=np.uint8).copy()
        return out

    def save(self, path) -> None:
        save_checkpoint(path, self.state_arrays())

    def load(self, path, ignore_hash: bool = False) -> None:
        arrays = load_checkpoint(path)
        stored = arrays.get("meta.config_hash")
        want = np.frombuffer(model_hash(self.cfg), dtype=np.uint8)
        if stored is None or stored.shape != want.shape or not np.array_equal(stored, want):
            if not ignore_hash:
                raise CheckpointError(
                    "checkpoint model-config hash does not match this config",
                    record="meta.config_hash",
                )
        for name, t in self.gen.named_params().items():
            key = f"gen.{name}"
            if key not in arrays:
                raise CheckpointError("missing parameter record", record=key)
            if arrays[key].shape != t.data.shape:
                raise CheckpointError("parameter shape mismatch", record=key)
            t.data = arrays[key].copy()
        for name, t in self.disc.named_params().items():
            key = f"disc.{name}"
            if key not in arrays:
                raise CheckpointError("missing parameter record", record=key)
            t.data = arrays[key].copy()
        self.opt_g.load_state_arrays("opt_g", arrays)
        self.opt_d.load_state_arrays("opt_d", arrays)
        self.step = int(arrays["meta.step"][0])


def run_training(cfg: RunConfig, resume: str | None = None,
                 ignore_hash: bool = False, quiet: bool = False) -> dict:
    """Full training command: steps, NDJSON log, checkpoints, final metrics."""
    run_dir = Path(cfg.train.run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    trainer = Trainer.create(cfg)
    if resume is not None:
        trainer.load(resume, ignore_hash=ignore_hash)

    log_path = run_dir / "train_log.ndjson"
    steps = cfg.train.steps
    with open(log_path, "a" if resume else "w") as log:
        while trainer.step < steps:
            t0 = time.perf_counter()
            metrics = trainer.train_step()
            wall_ms = (time.perf_counter() - t0) * 1000.0
            done = trainer.step  # post-increment value
            if done % cfg.train.log_every == 0:
                line = {
                    "step": done,
                    "losses": metrics.as_dict(),
                    "lr": lr_at_step(cfg.train.lr, done - 1, trainer.milestones),
                    "wall_ms": round(wall_ms, 3),
                }
                log.write(json.dumps(line) + "\n")
                log.flush()
                if not quiet:
                    print(f"step {done}/{steps} rgb={metrics.rgb:.4f} total={metrics.total_g:.4f}")
            if cfg.train.checkpoint_every > 0 and done % cfg.train.checkpoint_every == 0:
                trainer.save(run_dir / f"ckpt_{done:06d}.vanf")
    trainer.save(run_dir / "ckpt_final.vanf")
    summary = {"steps": trainer.step, "skipped_g": trainer.opt_g.skipped,
               "skipped_d": trainer.opt_d.skipped}
    held_out = final_metrics(cfg, trainer.gen)
    if held_out is not None:
        summary["held_out"] = held_out
        if not quiet:
            print(f"held-out psnr={held_out['psnr']:.3f} ssim={held_out['ssim']:.4f}")
    (run_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def final_metrics(cfg: RunConfig, gen, max_scenes: int = 4) -> dict | None:
    """Cheap post-training check: one input/target pair per held-out scene.

    Returns None when the dataset has no test split so short experiment
    configs can skip the pass entirely.
    """
    from ..evaluation import evaluate

    try:
        man = load_manifest(cfg.data.root)
    except FileNotFoundError:
        return None
    if man["splits"].get("test", 0) == 0:
        return None
    report = evaluate(cfg, gen, split="test", max_scenes=max_scenes,
                      pairs_per_scene=1, occlusion_ratios=())
    stats = dict(report["buckets"]["overall"])
    stats["split"] = "test"
    return stats
