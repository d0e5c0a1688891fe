"""Training loop behavior: alternation purity, resume replay, logging."""

import dataclasses
import json
from pathlib import Path

import numpy as np
import pytest

from vanf.config import RunConfig
from vanf.dataset import synth_dataset
from vanf.errors import CheckpointError, ValidationError
from vanf.training.loop import Trainer, run_training
from vanf.training.optimizer import lr_at_step, milestones_for


def _params_digest(named: dict) -> dict:
    return {k: v.data.tobytes() for k, v in sorted(named.items())}


@pytest.fixture(scope="module")
def tiny_cfg(tmp_path_factory) -> RunConfig:
    root = tmp_path_factory.mktemp("loopdata")
    cfg = RunConfig()
    cfg.data = dataclasses.replace(cfg.data, root=str(root), n_train=2, n_test=1,
                                   image_size=32, n_cameras=3)
    cfg.render = dataclasses.replace(cfg.render, n_coarse=4, n_fine=4, patch_size=16)
    cfg.train = dataclasses.replace(cfg.train, steps=4, batch_size=1, log_every=1,
                                    checkpoint_every=2)
    synth_dataset(cfg.data)
    return cfg


def _with_run_dir(cfg: RunConfig, run_dir) -> RunConfig:
    out = dataclasses.replace(cfg)
    out.train = dataclasses.replace(cfg.train, run_dir=str(run_dir))
    return out


def test_reconstruction_only_never_touches_discriminator(tiny_cfg, tmp_path):
    cfg = _with_run_dir(tiny_cfg, tmp_path / "r")
    cfg.train = dataclasses.replace(cfg.train, lambda_adv=0.0, lambda_vis=0.0, steps=2)
    tr = Trainer.create(cfg)
    disc_before = _params_digest(tr.disc.named_params())
    m = tr.train_step()
    assert m.adv_g == 0.0 and m.vis_g == 0.0 and m.adv_d == 0.0 and m.vis_d == 0.0
    assert m.rgb > 0.0
    assert _params_digest(tr.disc.named_params()) == disc_before
    assert tr.opt_d.t == 0


def test_adversarial_step_updates_both_and_keeps_gen_pure(tiny_cfg, tmp_path):
    cfg = _with_run_dir(tiny_cfg, tmp_path / "a")
    tr = Trainer.create(cfg)
    gen_before = _params_digest(tr.gen.named_params())
    disc_before = _params_digest(tr.disc.named_params())
    m = tr.train_step()
    gen_after = _params_digest(tr.gen.named_params())
    disc_after = _params_digest(tr.disc.named_params())
    assert gen_after != gen_before
    assert disc_after != disc_before
    assert m.adv_d > 0.0 and m.vis_d > 0.0
    # the generator update must precede and be isolated from the critic update:
    # rerunning the same seeds with the critic frozen reproduces the exact
    # generator parameters, so the critic's step leaked nothing back
    tr2 = Trainer.create(cfg)
    crit = {k: v.data.copy() for k, v in tr2.disc.named_params().items()}
    tr2.train_step()
    for k, v in tr2.disc.named_params().items():
        v.data = crit[k]  # roll the critic back; generator bytes must agree
    assert _params_digest(tr2.gen.named_params()) == gen_after


def test_pick_sample_bounds_and_determinism(tiny_cfg):
    tr = Trainer.create(tiny_cfg)
    seen_scenes = set()
    for step in range(50):
        scene, k_in, k_tgt, v0, u0, seed = tr._pick_sample(step, 0, 2, 3, 32)
        assert 0 <= scene < 2
        assert 0 <= k_in < 3 and 0 <= k_tgt < 3 and k_in != k_tgt
        assert 0 <= v0 <= 16 and 0 <= u0 <= 16
        assert seed >= 0
        seen_scenes.add(scene)
    assert seen_scenes == {0, 1}
    assert tr._pick_sample(7, 1, 2, 3, 32) == tr._pick_sample(7, 1, 2, 3, 32)
    assert tr._pick_sample(7, 0, 2, 3, 32) != tr._pick_sample(8, 0, 2, 3, 32)


def test_patch_larger_than_image_rejected(tiny_cfg):
    cfg = dataclasses.replace(tiny_cfg)
    cfg.render = dataclasses.replace(cfg.render, patch_size=64)
    tr = Trainer.create(cfg)
    with pytest.raises(ValidationError):
        tr.train_step()


def test_run_training_logs_and_checkpoints(tiny_cfg, tmp_path):
    cfg = _with_run_dir(tiny_cfg, tmp_path / "run")
    summary = run_training(cfg, quiet=True)
    run_dir = Path(cfg.train.run_dir)
    lines = [json.loads(x) for x in
             (run_dir / "train_log.ndjson").read_text().splitlines()]
    assert [r["step"] for r in lines] == [1, 2, 3, 4]
    milestones = milestones_for(cfg.train.steps, cfg.train.milestone_fractions)
    for r in lines:
        assert set(r) == {"step", "losses", "lr", "wall_ms"}
        assert set(r["losses"]) == {"rgb", "perc", "adv_g", "vis_g", "adv_d", "vis_d", "total_g"}
        assert r["lr"] == lr_at_step(cfg.train.lr, r["step"] - 1, milestones)
    assert (run_dir / "ckpt_000002.vanf").exists()
    assert (run_dir / "ckpt_final.vanf").exists()
    assert summary["steps"] == 4
    assert summary["held_out"]["n"] == 1
    written = json.loads((run_dir / "summary.json").read_text())
    assert written == summary


def test_resume_replays_identically(tiny_cfg, tmp_path):
    cfg_a = _with_run_dir(tiny_cfg, tmp_path / "full")
    run_training(cfg_a, quiet=True)

    cfg_b = _with_run_dir(tiny_cfg, tmp_path / "half")
    cfg_b.train = dataclasses.replace(cfg_b.train, steps=2)
    run_training(cfg_b, quiet=True)
    cfg_c = _with_run_dir(tiny_cfg, tmp_path / "resumed")
    cfg_c.train = dataclasses.replace(cfg_c.train, steps=4)
    run_training(cfg_c, resume=str(Path(cfg_b.train.run_dir) / "ckpt_final.vanf"),
                 quiet=True)

    final_a = (Path(cfg_a.train.run_dir) / "ckpt_final.vanf").read_bytes()
    final_c = (Path(cfg_c.train.run_dir) / "ckpt_final.vanf").read_bytes()
    assert final_a == final_c

    def strip(path):
        rows = [json.loads(x) for x in Path(path).read_text().splitlines()]
        for r in rows:
            r.pop("wall_ms")
        return rows

    log_a = strip(Path(cfg_a.train.run_dir) / "train_log.ndjson")
    log_c = strip(Path(cfg_c.train.run_dir) / "train_log.ndjson")
    assert log_a[2:] == log_c  # resumed log holds exactly the replayed tail


def test_checkpoint_model_hash_guard(tiny_cfg, tmp_path):
    cfg = _with_run_dir(tiny_cfg, tmp_path / "g")
    cfg.train = dataclasses.replace(cfg.train, steps=1, checkpoint_every=0)
    run_training(cfg, quiet=True)
    ckpt = Path(cfg.train.run_dir) / "ckpt_final.vanf"

    # any change to the model section flips the hash, even a seed with
    # identical parameter shapes
    reseeded = dataclasses.replace(cfg)
    reseeded.model = dataclasses.replace(cfg.model, seed=cfg.model.seed + 1)
    tr = Trainer.create(reseeded)
    with pytest.raises(CheckpointError):
        tr.load(str(ckpt))
    tr.load(str(ckpt), ignore_hash=True)  # shapes agree, so the escape works
    assert tr.step == 1

    narrow = dataclasses.replace(cfg)
    narrow.model = dataclasses.replace(cfg.model, hidden=32)
    tr2 = Trainer.create(narrow)
    with pytest.raises(CheckpointError):
        tr2.load(str(ckpt))
    with pytest.raises(CheckpointError):
        tr2.load(str(ckpt), ignore_hash=True)  # shapes disagree; no escape
