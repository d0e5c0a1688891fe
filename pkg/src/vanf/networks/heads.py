"""Output heads: view-dependent color and the SDF deviation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from .layers import Linear, mlp, mlp_params, run_mlp
from .fusion import positional_encode


@dataclass
class ColorHead:
    layers: list[Linear]
    n_dir_freqs: int = 4

    @classmethod
    def create(cls, rng: np.random.Generator, fused_width: int, pe_dir_width: int = 24,
               hidden: int = 64) -> "ColorHead":
        if pe_dir_width % 6:
            raise ValueError(f"pe_dir_width must be a multiple of 6, got {pe_dir_width}")
        return cls(layers=mlp(rng, [fused_width + pe_dir_width, hidden, hidden, 3]),
                   n_dir_freqs=pe_dir_width // 6)

    def __call__(self, fused_texture: Tensor, directions: np.ndarray) -> Tensor:
        """directions (N, 3) unit target-view vectors -> rgb (N, 3) in [0, 1]."""
        pe_d = positional_encode(np.asarray(directions, dtype=np.float64), self.n_dir_freqs)
        x = ad.concat([fused_texture, Tensor(pe_d.astype(ad.default_dtype()))], axis=1)
        return run_mlp(self.layers, x, final_activation=ad.sigmoid)

    def named_params(self, prefix: str = "color") -> dict[str, Tensor]:
        return mlp_params(self.layers, prefix)


@dataclass
class DeviationHead:
    layers: list[Linear]

    @classmethod
    def create(cls, rng: np.random.Generator, fused_width: int, hidden: int = 64) -> "DeviationHead":
        return cls(layers=mlp(rng, [fused_width, hidden, hidden, 1]))

    def __call__(self, fused_geometry: Tensor, delta_max: float) -> Tensor:
        """(N, fused) -> delta (N, 1), bounded to |delta| <= delta_max."""
        raw = run_mlp(self.layers, fused_geometry)
        return ad.mul(delta_max, ad.tanh(raw))

    def named_params(self, prefix: str = "deviation") -> dict[str, Tensor]:
        return mlp_params(self.layers, prefix)
