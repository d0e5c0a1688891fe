"""Image metric checks against closed forms and a direct per-window oracle."""

import numpy as np
import pytest

from vanf.errors import ValidationError
from vanf.metrics import (
    PSNR_CAP,
    apply_center_occlusion,
    center_occlusion_mask,
    foreground_psnr,
    gaussian_window,
    mse,
    psnr,
    ssim,
)


def test_psnr_constant_offset_closed_form():
    a = np.full((8, 8, 3), 0.4)
    b = a + 0.1
    # mse = 0.01 -> 10*log10(1/0.01) = 20 dB
    assert abs(psnr(a, b) - 20.0) < 1e-12


def test_psnr_identical_hits_cap():
    a = np.random.default_rng(0).random((5, 7, 3))
    assert psnr(a, a) == PSNR_CAP


def test_psnr_monotone_in_noise_scale():
    rng = np.random.default_rng(1)
    a = rng.random((16, 16, 3))
    noise = rng.standard_normal(a.shape)
    vals = [psnr(a, a + s * noise) for s in (0.01, 0.05, 0.2)]
    assert vals[0] > vals[1] > vals[2]


def test_mse_shape_mismatch_rejected():
    with pytest.raises(ValidationError):
        mse(np.zeros((4, 4)), np.zeros((4, 5)))


def test_gaussian_window_normalized_and_symmetric():
    k = gaussian_window()
    assert k.shape == (11, 11)
    assert abs(k.sum() - 1.0) < 1e-12
    assert np.allclose(k, k.T)
    assert np.allclose(k, k[::-1, ::-1])
    assert k[5, 5] == k.max()


def _ssim_oracle(a: np.ndarray, b: np.ndarray) -> float:
    """Direct double loop over valid 11x11 windows, one channel at a time."""
    k = gaussian_window()
    c1, c2 = 0.01**2, 0.03**2
    h, w, ch = a.shape
    vals = []
    for c in range(ch):
        acc = []
        for i in range(h - 10):
            for j in range(w - 10):
                x = a[i : i + 11, j : j + 11, c]
                y = b[i : i + 11, j : j + 11, c]
                mx = (k * x).sum()
                my = (k * y).sum()
                vx = (k * x * x).sum() - mx * mx
                vy = (k * y * y).sum() - my * my
                vxy = (k * x * y).sum() - mx * my
                acc.append(
                    ((2 * mx * my + c1) * (2 * vxy + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2))
                )
        vals.append(np.mean(acc))
    return float(np.mean(vals))


def test_ssim_matches_window_oracle():
    rng = np.random.default_rng(7)
    a = rng.random((14, 13, 3))
    b = np.clip(a + 0.15 * rng.standard_normal(a.shape), 0.0, 1.0)
    assert abs(ssim(a, b) - _ssim_oracle(a, b)) < 1e-9


def test_ssim_self_is_one():
    a = np.random.default_rng(3).random((16, 16, 3))
    assert abs(ssim(a, a) - 1.0) < 1e-9


def test_ssim_accepts_chw_and_grayscale():
    rng = np.random.default_rng(5)
    hwc = rng.random((12, 12, 3))
    chw = hwc.transpose(2, 0, 1)
    assert abs(ssim(hwc, hwc) - ssim(chw, chw)) < 1e-12
    gray = rng.random((12, 12))
    assert abs(ssim(gray, gray) - 1.0) < 1e-12
    with pytest.raises(ValidationError):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)))  # smaller than the window


def test_foreground_psnr_uses_only_masked_pixels():
    rng = np.random.default_rng(11)
    a = rng.random((10, 10, 3))
    b = a.copy()
    mask = np.zeros((10, 10), dtype=bool)
    mask[2:5, 3:7] = True
    b[~mask] += 0.5  # corrupt only the background
    assert foreground_psnr(a, b, mask) == PSNR_CAP
    b2 = a.copy()
    b2[mask] += 0.1
    expected = 10.0 * np.log10(1.0 / np.mean((a[mask] - b2[mask]) ** 2))
    got = foreground_psnr(a, b2, mask)
    assert abs(got - expected) < 1e-9


def test_foreground_psnr_empty_mask_is_none():
    a = np.zeros((6, 6, 3))
    assert foreground_psnr(a, a, np.zeros((6, 6), dtype=bool)) is None


def test_foreground_psnr_chw_layout():
    rng = np.random.default_rng(13)
    a = rng.random((3, 9, 9))
    mask = np.zeros((9, 9), dtype=bool)
    mask[4, 4] = True
    hwc = a.transpose(1, 2, 0)
    assert foreground_psnr(a, a * 0.9, mask) == foreground_psnr(hwc, hwc * 0.9, mask)


def test_center_occlusion_mask_geometry():
    m = center_occlusion_mask(10, 0.2)  # side = 2, centered
    assert m.sum() == 4
    ys, xs = np.nonzero(m)
    assert ys.min() == 4 and ys.max() == 5 and xs.min() == 4 and xs.max() == 5
    assert center_occlusion_mask(10, 0.0).sum() == 0
    assert center_occlusion_mask(10, 1.0).all()
    with pytest.raises(ValidationError):
        center_occlusion_mask(10, 1.5)


def test_apply_center_occlusion_blacks_square_both_layouts():
    rng = np.random.default_rng(17)
    img = 0.25 + 0.5 * rng.random((3, 12, 12))
    out = apply_center_occlusion(img, 0.5)
    m = center_occlusion_mask(12, 0.5)
    assert np.all(out[:, m] == 0.0)
    assert np.array_equal(out[:, ~m], img[:, ~m])
    hwc = img.transpose(1, 2, 0)
    out2 = apply_center_occlusion(hwc, 0.5)
    assert np.array_equal(out2.transpose(2, 0, 1), out)
