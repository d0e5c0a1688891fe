"""Reconstruction, perceptual, visibility, and adversarial loss terms.

The perceptual term uses a small randomly initialized conv stack, frozen at
dataset-seed time. Random features are a crude stand-in for a pretrained
extractor, but they preserve what the term is for: penalizing structural
mismatch that per-pixel L1 underweights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import ValidationError
from ..networks.layers import Conv
from ..rng import make_rng

VIS_CLIP = 1e-6
_PERC_STREAM = 0x7C


@dataclass
class LossWeights:
    rgb: float = 10.0
    perc: float = 1.0
    adv: float = 0.1
    vis: float = 0.1

    def __post_init__(self) -> None:
        if min(self.rgb, self.perc, self.adv, self.vis) < 0:
            raise ValidationError("loss weights must be non-negative")


def _check_aligned(a, b, what: str) -> None:
    sa = a.shape if isinstance(a, Tensor) else np.shape(a)
    sb = b.shape if isinstance(b, Tensor) else np.shape(b)
    if sa != sb:
        raise ValidationError(f"{what}: shape mismatch {sa} vs {sb}")


def loss_rgb(pred: Tensor, target: np.ndarray, mask: np.ndarray | None = None) -> Tensor:
    """Mean absolute error over every pixel and channel of the patch.

    The mask argument is accepted for callers that track foreground pixels,
    but the average deliberately runs over the whole patch: background counts.
    """
    _check_aligned(pred, target, "loss_rgb")
    return ad.mean(ad.abs_(ad.sub(pred, ad.Tensor(np.asarray(target, dtype=np.float64)))))


def loss_vis(v: Tensor, v_target: np.ndarray) -> Tensor:
    """Pixel-mean binary cross entropy; predictions clipped away from {0, 1}."""
    _check_aligned(v, v_target, "loss_vis")
    vt = np.asarray(v_target, dtype=np.float64)
    vc = ad.clip(v, VIS_CLIP, 1.0 - VIS_CLIP)
    pos = ad.mul(Tensor(vt), ad.log(vc))
    neg = ad.mul(Tensor(1.0 - vt), ad.log(ad.sub(1.0, vc)))
    return ad.neg(ad.mean(ad.add(pos, neg)))


def loss_adv_generator(logit_fake: Tensor) -> Tensor:
    """Non-saturating generator objective: softplus(-logit)."""
    return ad.mean(ad.softplus(ad.neg(logit_fake)))


def loss_adv_discriminator(logit_real: Tensor, logit_fake: Tensor) -> Tensor:
    return ad.add(
        ad.mean(ad.softplus(ad.neg(logit_real))), ad.mean(ad.softplus(logit_fake))
    )


@dataclass
class PerceptualNet:
    """Three frozen convolutions; activations tapped after the 2nd and 3rd."""

    c1: Conv
    c2: Conv
    c3: Conv

    def features(self, x: Tensor) -> tuple[Tensor, Tensor]:
        h1 = ad.relu(self.c1(x))
        h2 = ad.relu(self.c2(h1))
        h3 = self.c3(h2)
        return h2, h3


def make_perceptual(dataset_seed: int) -> PerceptualNet:
    rng = make_rng(dataset_seed, _PERC_STREAM)
    net = PerceptualNet(
        c1=Conv.create(rng, 3, 8, stride=2),
        c2=Conv.create(rng, 8, 16, stride=2),
        c3=Conv.create(rng, 16, 16, stride=2),
    )
    # conditioning inputs only; nothing trains these
    for conv in (net.c1, net.c2, net.c3):
        conv.w.requires_grad = False
        conv.b.requires_grad = False
    return net


def _nchw(x) -> Tensor:
    """(3, H, W) or (H, W, 3) array/tensor -> (1, 3, H, W) tensor."""
    t = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
    if t.data.ndim != 3:
        raise ValidationError(f"expected a 3-channel image, got shape {t.shape}")
    if t.shape[0] != 3 and t.shape[2] == 3:
        t = ad.transpose(t, (2, 0, 1))
    if t.shape[0] != 3:
        raise ValidationError(f"expected a 3-channel image, got shape {t.shape}")
    return ad.reshape(t, (1,) + t.shape)


def loss_perc(pred, target, net: PerceptualNet) -> Tensor:
    """Mean of the squared feature differences at the two tap depths."""
    p = _nchw(pred)
    t = _nchw(target)
    _check_aligned(p, t, "loss_perc")
    fp2, fp3 = net.features(p)
    ft2, ft3 = net.features(t)

    def mse(a, b):
        d = ad.sub(a, b)
        return ad.mean(ad.mul(d, d))

    return ad.mul(0.5, ad.add(mse(fp2, ft2), mse(fp3, ft3)))
