"""Patch discriminator with a realness head and a visibility-map head.

Input is the channel stack [input image, target patch, correspondence maps
for both views]. The shared trunk downsamples 16x; head A pools to a scalar
logit, head B decodes back to patch resolution with a sigmoid so the
predicted per-pixel visibility lies strictly inside (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import ValidationError
from .layers import Conv, Linear

IN_CHANNELS = 18  # 3 input rgb + 3 target rgb + 6 + 6 correspondence channels


@dataclass
class Discriminator:
    trunk: list[Conv]
    fc: Linear
    decoder: list[Conv]
    dual_head: bool = True

    @classmethod
    def create(cls, rng: np.random.Generator, in_channels: int = IN_CHANNELS,
               base: int = 32, dual_head: bool = True) -> "Discriminator":
        widths = [in_channels, base, 2 * base, 2 * base, 2 * base]
        trunk = [Conv.create(rng, widths[i], widths[i + 1], stride=2) for i in range(4)]
        dec_widths = [2 * base, base, base // 2, base // 4, 1]
        decoder = [Conv.create(rng, dec_widths[i], dec_widths[i + 1], stride=1) for i in range(4)]
        return cls(trunk=trunk, fc=Linear.create(rng, 2 * base, 1), decoder=decoder,
                   dual_head=dual_head)

    def __call__(self, stacked) -> tuple[Tensor, Tensor | None]:
        """(1, C, P, P) -> (realness logit (1, 1), visibility map (P, P) or None)."""
        x = stacked if isinstance(stacked, Tensor) else Tensor(np.asarray(stacked, dtype=ad.default_dtype()))
        if x.ndim != 4 or x.shape[2] != x.shape[3] or x.shape[2] % 16:
            raise ValidationError(f"discriminator patch must be square with side % 16 == 0, got {x.shape}")

        h = x
        for conv in self.trunk:
            h = ad.relu(conv(h))
        pooled = ad.mean(h, axis=(2, 3))  # (1, C)
        logit = self.fc(pooled)

        if not self.dual_head:
            return logit, None
        v = h
        for i, conv in enumerate(self.decoder):
            v = conv(ad.upsample_nearest2x(v))
            v = ad.sigmoid(v) if i == len(self.decoder) - 1 else ad.relu(v)
        p = x.shape[2]
        return logit, ad.reshape(v, (p, p))

    def named_params(self, prefix: str = "disc") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, conv in enumerate(self.trunk):
            out.update(conv.named_params(f"{prefix}.trunk.{i}"))
        out.update(self.fc.named_params(f"{prefix}.fc"))
        for i, conv in enumerate(self.decoder):
            out.update(conv.named_params(f"{prefix}.dec.{i}"))
        return out


def stack_discriminator_input(input_img, target_img, corr_input, corr_target) -> Tensor:
    """Channel-concatenate the four blocks; any block may carry gradients."""
    blocks = []
    for b in (input_img, target_img, corr_input, corr_target):
        t = b if isinstance(b, Tensor) else Tensor(np.asarray(b, dtype=ad.default_dtype()))
        if t.ndim == 3:
            t = ad.reshape(t, (1,) + t.shape)
        blocks.append(t)
    sides = {b.shape[2] for b in blocks} | {b.shape[3] for b in blocks}
    if len(sides) != 1:
        raise ValidationError(f"discriminator blocks disagree on patch size: {sorted(sides)}")
    return ad.concat(blocks, axis=1)
