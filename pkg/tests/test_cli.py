"""End-to-end command line pipeline on a tiny dataset, plus exit codes."""

import json
from pathlib import Path

import numpy as np
import pytest

from vanf.cli import main
from vanf.image_io import read_pgm, read_ppm


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    ws = tmp_path_factory.mktemp("cli")
    data = ws / "data"
    rc = main([
        "synth",
        "--override", f"data.root={data}",
        "--override", "data.n_train=2",
        "--override", "data.n_test=1",
        "--override", "data.n_cameras=3",
        "--override", "data.image_size=32",
    ])
    assert rc == 0
    return ws


def _common(ws) -> list[str]:
    return [
        "--override", f"data.root={ws / 'data'}",
        "--override", "data.n_train=2",
        "--override", "data.n_test=1",
        "--override", "data.n_cameras=3",
        "--override", "data.image_size=32",
        "--override", "render.n_coarse=4",
        "--override", "render.n_fine=4",
        "--override", "render.patch_size=16",
    ]


@pytest.fixture(scope="module")
def trained(workspace):
    run_dir = workspace / "run"
    rc = main([
        "train", *_common(workspace),
        "--override", f"train.run_dir={run_dir}",
        "--override", "train.steps=3",
        "--override", "train.log_every=1",
        "--override", "train.checkpoint_every=2",
        "--override", "train.batch_size=1",
        "--quiet",
    ])
    assert rc == 0
    return run_dir


def test_synth_writes_manifest(workspace):
    man = json.loads((workspace / "data" / "manifest.json").read_text())
    assert man["splits"] == {"train": 2, "test": 1}


def test_train_outputs(trained):
    assert (trained / "ckpt_final.vanf").exists()
    assert (trained / "config.json").exists()
    assert (trained / "loss_curves.png").stat().st_size > 0
    log = (trained / "train_log.ndjson").read_text().splitlines()
    assert len(log) == 3
    summary = json.loads((trained / "summary.json").read_text())
    assert summary["held_out"]["n"] == 1


def test_train_resume_flag(workspace, trained, tmp_path):
    run2 = tmp_path / "resumed"
    rc = main([
        "train", *_common(workspace),
        "--override", f"train.run_dir={run2}",
        "--override", "train.steps=4",
        "--override", "train.log_every=1",
        "--override", "train.checkpoint_every=0",
        "--override", "train.batch_size=1",
        "--resume", str(trained / "ckpt_final.vanf"),
        "--quiet",
    ])
    assert rc == 0
    log = [json.loads(x) for x in (run2 / "train_log.ndjson").read_text().splitlines()]
    assert [r["step"] for r in log] == [4]  # continued past the loaded step count


def test_render_command_with_visibility(workspace, trained, tmp_path):
    out = tmp_path / "renders"
    rc = main([
        "render", *_common(workspace),
        "--checkpoint", str(trained / "ckpt_final.vanf"),
        "--split", "test", "--scene", "0",
        "--input-cam", "0", "--target-cam", "1",
        "--dump-visibility",
        "--out", str(out),
    ])
    assert rc == 0
    img = read_ppm(out / "render.ppm")
    assert img.shape == (32, 32, 3)
    vis = read_pgm(out / "visibility_pred.pgm")
    gt = read_pgm(out / "visibility_gt.pgm")
    assert vis.shape == (32, 32) and gt.shape == (32, 32)
    assert set(np.unique(gt)) <= {0.0, 1.0}
    assert (out / "render_panel.png").stat().st_size > 0


def test_render_exclude_hand(workspace, trained, tmp_path):
    out_l = tmp_path / "left_only"
    rc = main([
        "render", *_common(workspace),
        "--checkpoint", str(trained / "ckpt_final.vanf"),
        "--split", "test", "--scene", "0",
        "--exclude-hand", "right",
        "--out", str(out_l),
    ])
    assert rc == 0
    full = tmp_path / "full"
    rc = main([
        "render", *_common(workspace),
        "--checkpoint", str(trained / "ckpt_final.vanf"),
        "--split", "test", "--scene", "0",
        "--out", str(full),
    ])
    assert rc == 0
    a = read_ppm(out_l / "render.ppm")
    b = read_ppm(full / "render.ppm")
    assert not np.array_equal(a, b)


def test_eval_command(workspace, trained, tmp_path, capsys):
    out = tmp_path / "reports"
    rc = main([
        "eval", *_common(workspace),
        "--override", "eval.occlusion_ratios=[0.2]",
        "--checkpoint", str(trained / "ckpt_final.vanf"),
        "--pairs", "1",
        "--out", str(out),
    ])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert stdout.startswith("bucket\tn\tpsnr\tssim\tfg_psnr")
    assert "lpips\t-\tn/a" in stdout
    tsv = (out / "eval_report.tsv").read_text()
    assert tsv == stdout
    report = json.loads((out / "eval_report.json").read_text())
    assert report["lpips"] == "n/a"
    assert "overall" in report["buckets"]
    assert "occl_0.2" in report["buckets"]
    assert (out / "metrics_bars.png").stat().st_size > 0


def test_gradcheck_command(capsys):
    rc = main(["gradcheck", "--check", "losses", "--check", "ray_compositor"])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["ok"] is True
    assert [c["name"] for c in report["checks"]] == ["losses", "ray_compositor"]


def test_gradcheck_failure_exit_code(monkeypatch, capsys):
    import vanf.gradchecks as gc
    from vanf.autodiff import GradCheckReport

    def sabotaged(rng):
        return GradCheckReport(ok=False, max_rel_err=1.0, per_input={"x": 1.0})

    monkeypatch.setitem(gc.CHECKS, "losses", sabotaged)
    rc = main(["gradcheck", "--check", "losses"])
    assert rc == 3
    report = json.loads(capsys.readouterr().out)
    assert report["ok"] is False


def test_usage_errors_exit_1():
    assert main(["not-a-command"]) == 1
    assert main(["render"]) == 1  # --checkpoint required
    assert main(["train", "--override"]) == 1  # flag needs a value


def test_validation_errors_exit_2(workspace, trained, tmp_path):
    assert main(["train", "--override", "train.steps=soon"]) == 2
    assert main(["train", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["gradcheck", "--check", "nonsense"]) == 2
    assert main([
        "render", *_common(workspace),
        "--checkpoint", str(trained / "ckpt_final.vanf"),
        "--split", "test", "--scene", "0", "--target-cam", "7",
    ]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["train", "--config", str(bad)]) == 2


def test_checkpoint_hash_mismatch_exit_2_and_escape(workspace, trained, tmp_path):
    args = [
        "render", *_common(workspace),
        "--override", "model.seed=99",
        "--checkpoint", str(trained / "ckpt_final.vanf"),
        "--split", "test", "--scene", "0",
        "--out", str(tmp_path / "r"),
    ]
    assert main(args) == 2
    assert main(args + ["--ignore-checkpoint-hash"]) == 0
