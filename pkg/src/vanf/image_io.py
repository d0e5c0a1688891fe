"""Binary PPM (P6) / PGM (P5) image files, plus PNG export for reports.

Images travel through the package as float arrays in [0, 1]: RGB as
(H, W, 3), grayscale as (H, W). Files are 8-bit, maxval 255; values are
rounded on write and divided by 255 on read, so write -> read is exact for
any image that was already 8-bit quantized.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ValidationError


def _quantize(img: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_ppm(path: str | os.PathLike, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValidationError(f"write_ppm expects (H, W, 3), got {img.shape}")
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(_quantize(img).tobytes())


def write_pgm(path: str | os.PathLike, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValidationError(f"write_pgm expects (H, W), got {img.shape}")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(_quantize(img).tobytes())


def _read_header(f, magic: bytes):
    if f.read(2) != magic:
        raise ValidationError(f"not a {magic.decode()} file")
    fields = []
    while len(fields) < 3:
        line = f.readline()
        if not line:
            raise ValidationError("truncated netpbm header")
        line = line.split(b"#", 1)[0]
        fields.extend(line.split())
    w, h, maxval = (int(x) for x in fields[:3])
    if maxval != 255:
        raise ValidationError(f"unsupported maxval {maxval}, expected 255")
    return w, h


def read_ppm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        w, h = _read_header(f, b"P6")
        raw = f.read(w * h * 3)
    if len(raw) != w * h * 3:
        raise ValidationError(f"truncated P6 payload in {path}")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3).astype(np.float64) / 255.0


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        w, h = _read_header(f, b"P5")
        raw = f.read(w * h)
    if len(raw) != w * h:
        raise ValidationError(f"truncated P5 payload in {path}")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w).astype(np.float64) / 255.0


def write_png(path: str | os.PathLike, img: np.ndarray) -> None:
    """Optional PNG export (reports, inspection); not used by the pipeline."""
    import matplotlib.image as mpimg

    img = np.asarray(img)
    if img.ndim == 2:
        img = np.repeat(img[:, :, None], 3, axis=2)
    mpimg.imsave(os.fspath(path), np.clip(img, 0.0, 1.0))
