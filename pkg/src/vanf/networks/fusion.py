"""Positional encoding and visibility-weighted feature fusion.

Each query combines six ingredients: its positional encoding, its own
pixel-aligned feature, the nearest mesh vertex's feature, the mirrored
vertex's feature, and (texture branch only) the two per-hand global
descriptors. A small MLP looks at all of them plus three visibility bits and
emits one gate per ingredient; the fused vector is the gated concatenation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import ValidationError
from .layers import Linear, mlp, mlp_params, run_mlp

N_FREQS = 4


def positional_encode(q, n_freqs: int = N_FREQS) -> np.ndarray:
    """(N, 3) -> (N, 6*n_freqs): sin/cos of 2^k * pi * coordinate, k ascending."""
    q = np.asarray(q, dtype=np.float64)
    parts = []
    for k in range(n_freqs):
        f = float(2**k) * np.pi
        parts.append(np.sin(f * q))
        parts.append(np.cos(f * q))
    return np.concatenate(parts, axis=-1)


def pe_width(n_freqs: int = N_FREQS) -> int:
    return 6 * n_freqs


@dataclass
class FusionInput:
    """Per-query fusion ingredients; g_left/g_right are None for geometry."""

    phi: np.ndarray            # (N, D_pe) positional encoding, constant
    feat_q: Tensor             # (N, D)
    feat_near: Tensor          # (N, D)
    feat_mirror: Tensor        # (N, D)
    vis: np.ndarray            # (N, 3) binary: v(q), v(p), v(p')
    g_left: Tensor | None = None   # (N, D) texture branch only
    g_right: Tensor | None = None


@dataclass
class FusionOutput:
    weights: Tensor  # (N, 6) texture / (N, 4) geometry, each in (0, 1)
    fused: Tensor    # (N, D_pe + 5D) texture / (N, D_pe + 3D) geometry


@dataclass
class FusionMlp:
    layers: list[Linear]

    @classmethod
    def create(cls, rng: np.random.Generator, n_in: int, n_weights: int, hidden: int = 64) -> "FusionMlp":
        return cls(layers=mlp(rng, [n_in, hidden, n_weights]))

    def named_params(self, prefix: str) -> dict[str, Tensor]:
        return mlp_params(self.layers, prefix)


def fuse(mu: FusionMlp, inp: FusionInput) -> FusionOutput:
    texture = inp.g_left is not None
    if texture != (inp.g_right is not None):
        raise ValidationError("global features must be both present or both absent")
    if inp.vis.ndim != 2 or inp.vis.shape[1] != 3:
        raise ValidationError(f"expected (N, 3) visibility, got {inp.vis.shape}")

    parts = [inp.phi, inp.feat_q, inp.feat_near, inp.feat_mirror]
    if texture:
        parts += [inp.g_left, inp.g_right]
    mu_in = ad.concat([Tensor(np.ascontiguousarray(inp.vis, dtype=ad.default_dtype()))]
                      + [p if isinstance(p, Tensor) else Tensor(np.asarray(p, dtype=ad.default_dtype()))
                         for p in parts], axis=1)
    weights = ad.sigmoid(run_mlp(mu.layers, mu_in))

    gated = []
    for i, part in enumerate(parts):
        a_i = ad.getitem(weights, (slice(None), slice(i, i + 1)))
        gated.append(ad.mul(a_i, part))
    return FusionOutput(weights=weights, fused=ad.concat(gated, axis=1))


def fusion_in_width(d_feat: int, texture: bool, n_freqs: int = N_FREQS) -> int:
    n_feats = 5 if texture else 3
    return 3 + pe_width(n_freqs) + n_feats * d_feat


def fused_width(d_feat: int, texture: bool, n_freqs: int = N_FREQS) -> int:
    n_feats = 5 if texture else 3
    return pe_width(n_freqs) + n_feats * d_feat
