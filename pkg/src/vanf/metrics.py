"""Image quality metrics over [0, 1] float images.

PSNR is capped at 99 dB so identical images report a finite number. SSIM
uses an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic
range 1, computed over valid windows only (no padding) and averaged across
channels.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"image shape mismatch {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _check_pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(a, b, cap: float = PSNR_CAP) -> float:
    m = mse(a, b)
    if m <= 0.0:
        return cap
    return min(cap, float(10.0 * np.log10(1.0 / m)))


def foreground_psnr(pred, target, mask, cap: float = PSNR_CAP) -> float | None:
    """PSNR restricted to mask-true pixels; None when the mask is empty.

    Images are (H, W, 3) or (3, H, W); the mask is (H, W).
    """
    pred, target = _check_pair(pred, target)
    mask = np.asarray(mask, dtype=bool)
    if pred.ndim != 3:
        raise ValidationError(f"expected 3D images, got shape {pred.shape}")
    if pred.shape[0] == 3 and pred.shape[1:] == mask.shape:
        pred = pred.transpose(1, 2, 0)
        target = target.transpose(1, 2, 0)
    if pred.shape[:2] != mask.shape:
        raise ValidationError(f"mask shape {mask.shape} does not match image {pred.shape}")
    if not mask.any():
        return None
    m = float(np.mean((pred[mask] - target[mask]) ** 2))
    if m <= 0.0:
        return cap
    return min(cap, float(10.0 * np.log10(1.0 / m)))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """2D valid-mode correlation via sliding windows."""
    k = kernel.shape[0]
    win = np.lib.stride_tricks.sliding_window_view(img, (k, k))
    return np.einsum("ijkl,kl->ij", win, kernel)


def ssim(a, b) -> float:
    a, b = _check_pair(a, b)
    if a.ndim == 2:
        a = a[..., None]
        b = b[..., None]
    if a.ndim == 3 and a.shape[0] in (1, 3) and a.shape[2] not in (1, 3):
        a = a.transpose(1, 2, 0)
        b = b.transpose(1, 2, 0)
    h, w = a.shape[:2]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ValidationError(f"image {h}x{w} smaller than the {SSIM_WINDOW}px SSIM window")
    kernel = gaussian_window()
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    vals = []
    for c in range(a.shape[2]):
        x = a[..., c]
        y = b[..., c]
        mu_x = _filter_valid(x, kernel)
        mu_y = _filter_valid(y, kernel)
        sig_x = _filter_valid(x * x, kernel) - mu_x**2
        sig_y = _filter_valid(y * y, kernel) - mu_y**2
        sig_xy = _filter_valid(x * y, kernel) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * sig_xy + c2)
        den = (mu_x**2 + mu_y**2 + c1) * (sig_x + sig_y + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))


def center_occlusion_mask(image_size: int, ratio: float) -> np.ndarray:
    """Boolean (H, W) map, True inside the centered square of side ratio*size."""
    if not 0.0 <= ratio <= 1.0:
        raise ValidationError(f"occlusion ratio must be in [0, 1], got {ratio}")
    side = int(round(ratio * image_size))
    out = np.zeros((image_size, image_size), dtype=bool)
    if side == 0:
        return out
    lo = (image_size - side) // 2
    out[lo : lo + side, lo : lo + side] = True
    return out


def apply_center_occlusion(image: np.ndarray, ratio: float) -> np.ndarray:
    """Blacks out the centered square; accepts (3, H, W) or (H, W, 3)."""
    img = np.asarray(image, dtype=np.float64).copy()
    if img.ndim != 3:
        raise ValidationError(f"expected a 3D image, got shape {img.shape}")
    chw = img.shape[0] == 3 and img.shape[1] == img.shape[2]
    size = img.shape[1] if chw else img.shape[0]
    m = center_occlusion_mask(size, ratio)
    if chw:
        img[:, m] = 0.0
    else:
        img[m] = 0.0
    return img
