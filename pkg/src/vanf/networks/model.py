"""Bundles of the learnable pieces, plus seeded construction.

The generator half covers everything the field needs: both encoders, one
fusion MLP per branch, the color and deviation heads, and the density width.
Ablation switches live here so configs can reduce the fused features or cut
the visibility inputs without touching call sites.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Tensor
from ..rng import make_rng
from ..sdf import DensityParams
from .discriminator import Discriminator
from .encoders import GeometryEncoder, TextureEncoder
from .fusion import FusionMlp, fused_width, fusion_in_width
from .heads import ColorHead, DeviationHead


@dataclass
class Generator:
    texture_encoder: TextureEncoder
    geometry_encoder: GeometryEncoder
    fusion_tex: FusionMlp
    fusion_geo: FusionMlp
    color: ColorHead
    deviation: DeviationHead
    density: DensityParams
    d_t: int = 16
    d_g: int = 16
    n_freqs: int = 4
    use_nearest: bool = True     # include m(p) in fusion
    use_mirrored: bool = True    # include n(p') in fusion
    fusion_visibility: bool = True  # feed v(q), v(p), v(p') to the fusion MLPs

    @classmethod
    def create(
        cls,
        seed: int,
        d_t: int = 16,
        d_g: int = 16,
        n_freqs: int = 4,
        hidden: int = 64,
        w_init: float = 0.1,
        use_nearest: bool = True,
        use_mirrored: bool = True,
        fusion_visibility: bool = True,
    ) -> "Generator":
        return cls(
            texture_encoder=TextureEncoder.create(make_rng(seed, 1), d_t),
            geometry_encoder=GeometryEncoder.create(make_rng(seed, 2), d_g),
            fusion_tex=FusionMlp.create(
                make_rng(seed, 3), fusion_in_width(d_t, texture=True, n_freqs=n_freqs), 6, hidden
            ),
            fusion_geo=FusionMlp.create(
                make_rng(seed, 4), fusion_in_width(d_g, texture=False, n_freqs=n_freqs), 4, hidden
            ),
            color=ColorHead.create(
                make_rng(seed, 5), fused_width(d_t, texture=True, n_freqs=n_freqs),
                pe_dir_width=6 * n_freqs, hidden=hidden,
            ),
            deviation=DeviationHead.create(
                make_rng(seed, 6), fused_width(d_g, texture=False, n_freqs=n_freqs), hidden
            ),
            density=DensityParams.from_w(w_init),
            d_t=d_t,
            d_g=d_g,
            n_freqs=n_freqs,
            use_nearest=use_nearest,
            use_mirrored=use_mirrored,
            fusion_visibility=fusion_visibility,
        )

    def named_params(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        out.update(self.texture_encoder.named_params("tex_enc"))
        out.update(self.geometry_encoder.named_params("geo_enc"))
        out.update(self.fusion_tex.named_params("fusion_tex"))
        out.update(self.fusion_geo.named_params("fusion_geo"))
        out.update(self.color.named_params("color"))
        out.update(self.deviation.named_params("deviation"))
        out["density.w_raw"] = self.density.w_raw
        return out


def create_discriminator(seed: int, dual_head: bool = True, base: int = 32) -> Discriminator:
    return Discriminator.create(make_rng(seed, 7), dual_head=dual_head, base=base)
