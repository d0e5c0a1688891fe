"""Input-image encoders and the pixel-aligned feature container.

Two branches look at the same input image: a residual texture encoder and a
2-scale geometry encoder with one down-up hourglass block. Both emit maps at
a quarter of the input resolution. Global per-hand texture descriptors are
silhouette-masked means over the texture map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import ValidationError
from .layers import Conv


def box_downsample4(mask: np.ndarray) -> np.ndarray:
    """(H, W) -> (H/4, W/4) by 4x4 box averaging; H, W must divide by 4."""
    h, w = mask.shape
    if h % 4 or w % 4:
        raise ValidationError(f"mask extent {mask.shape} not a multiple of 4")
    return mask.reshape(h // 4, 4, w // 4, 4).mean(axis=(1, 3))


@dataclass
class TextureEncoder:
    conv_in: Conv
    down1: Conv
    res_a: Conv
    res_b: Conv
    down2: Conv

    @classmethod
    def create(cls, rng: np.random.Generator, d_out: int = 16) -> "TextureEncoder":
        return cls(
            conv_in=Conv.create(rng, 3, d_out, stride=1),
            down1=Conv.create(rng, d_out, d_out, stride=2),
            res_a=Conv.create(rng, d_out, d_out, stride=1),
            res_b=Conv.create(rng, d_out, d_out, stride=1),
            down2=Conv.create(rng, d_out, d_out, stride=2),
        )

    def __call__(self, image) -> Tensor:
        x = ad.relu(self.conv_in(image))
        x = ad.relu(self.down1(x))
        r = self.res_b(ad.relu(self.res_a(x)))
        x = ad.relu(ad.add(x, r))
        return ad.relu(self.down2(x))

    def named_params(self, prefix: str = "tex_enc") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name in ("conv_in", "down1", "res_a", "res_b", "down2"):
            out.update(getattr(self, name).named_params(f"{prefix}.{name}"))
        return out


@dataclass
class GeometryEncoder:
    down1: Conv
    down2: Conv
    hg_down: Conv
    hg_mid: Conv
    hg_up: Conv

    @classmethod
    def create(cls, rng: np.random.Generator, d_out: int = 16) -> "GeometryEncoder":
        return cls(
            down1=Conv.create(rng, 3, d_out, stride=2),
            down2=Conv.create(rng, d_out, d_out, stride=2),
            hg_down=Conv.create(rng, d_out, d_out, stride=2),
            hg_mid=Conv.create(rng, d_out, d_out, stride=1),
            hg_up=Conv.create(rng, d_out, d_out, stride=1),
        )

    def __call__(self, image) -> Tensor:
        x = ad.relu(self.down1(image))
        x = ad.relu(self.down2(x))
        d = ad.relu(self.hg_down(x))
        d = ad.relu(self.hg_mid(d))
        u = self.hg_up(ad.upsample_nearest2x(d))
        h4, w4 = x.shape[2], x.shape[3]
        if u.shape[2] != h4 or u.shape[3] != w4:
            u = ad.getitem(u, (slice(None), slice(None), slice(0, h4), slice(0, w4)))
        return ad.relu(ad.add(x, u))

    def named_params(self, prefix: str = "geo_enc") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name in ("down1", "down2", "hg_down", "hg_mid", "hg_up"):
            out.update(getattr(self, name).named_params(f"{prefix}.{name}"))
        return out


@dataclass
class FeatureMaps:
    texture_map: Tensor    # (1, D_t, H/4, W/4)
    geometry_map: Tensor   # (1, D_g, H/4, W/4)
    global_left: Tensor    # (D_t,)
    global_right: Tensor   # (D_t,)


def encode(
    texture_encoder: TextureEncoder,
    geometry_encoder: GeometryEncoder,
    image: np.ndarray,
    masks: np.ndarray,
) -> FeatureMaps:
    """image (3, H, W) in [0,1]; masks (2, H, W) binary, left then right."""
    image = np.asarray(image, dtype=ad.default_dtype())
    if image.ndim != 3 or image.shape[0] != 3:
        raise ValidationError(f"expected (3, H, W) image, got {image.shape}")
    if image.shape[1] % 4 or image.shape[2] % 4:
        raise ValidationError(f"image extent {image.shape[1:]} not a multiple of 4")
    if masks.shape != (2,) + image.shape[1:]:
        raise ValidationError(f"masks {masks.shape} do not match image {image.shape}")

    x = Tensor(image[None])
    tex = texture_encoder(x)
    geo = geometry_encoder(x)

    globals_ = []
    for k in range(2):
        small = box_downsample4(np.asarray(masks[k], dtype=ad.default_dtype()))
        total = float(small.sum())
        if total == 0.0:
            globals_.append(Tensor(np.zeros(tex.shape[1], dtype=ad.default_dtype())))
            continue
        weighted = ad.mul(tex, small[None, None])
        mean = ad.div(ad.sum_(weighted, axis=(0, 2, 3)), total)
        globals_.append(mean)
    return FeatureMaps(
        texture_map=tex, geometry_map=geo, global_left=globals_[0], global_right=globals_[1]
    )
