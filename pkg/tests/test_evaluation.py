"""Report assembly helpers for the evaluation path."""

import numpy as np
import pytest

from vanf.evaluation import _bucket_stats, eval_pairs, report_tsv


def test_eval_pairs_ring():
    assert eval_pairs(4, 0) == [(0, 1), (1, 2), (2, 3), (3, 0)]
    assert eval_pairs(4, 2) == [(0, 1), (1, 2)]
    assert eval_pairs(1, 0) == []  # a single camera has no novel view


def test_bucket_stats_means_and_optional_fg():
    rows = [
        {"psnr": 20.0, "ssim": 0.8, "fg_psnr": 10.0},
        {"psnr": 22.0, "ssim": 0.9, "fg_psnr": None},
    ]
    stats = _bucket_stats(rows)
    assert stats["n"] == 2
    assert stats["psnr"] == 21.0
    assert abs(stats["ssim"] - 0.85) < 1e-12
    assert stats["fg_psnr"] == 10.0  # only rows with a foreground contribute
    no_fg = _bucket_stats([{"psnr": 1.0, "ssim": 0.1, "fg_psnr": None}])
    assert "fg_psnr" not in no_fg


def test_report_tsv_layout():
    report = {
        "buckets": {
            "overall": {"n": 4, "psnr": 21.1234, "ssim": 0.81234567, "fg_psnr": 13.5},
            "yaw_gt_30": {"n": 1, "psnr": 17.0, "ssim": 0.7},
        },
        "lpips": "n/a",
    }
    text = report_tsv(report)
    lines = text.splitlines()
    assert lines[0] == "bucket\tn\tpsnr\tssim\tfg_psnr"
    assert lines[1] == "overall\t4\t21.1234\t0.812346\t13.5000"
    assert lines[2] == "yaw_gt_30\t1\t17.0000\t0.700000\tn/a"
    assert lines[3] == "lpips\t-\tn/a\tn/a\tn/a"
    assert text.endswith("\n")
