"""Signed distance to the scene surface and the density transform built on it.

The distance field is explicit: magnitude from the closest triangle, sign
from a 3-ray parity vote (negative inside either mesh). It is treated as a
constant per query point; gradients flow only through the learned deviation
and the width parameter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ValidationError
from .visibility.maps import SceneLike, as_bvh

W_FLOOR = 1e-4


def signed_distance(scene: SceneLike, points) -> np.ndarray:
    """Magnitude = distance to nearest triangle; negative inside either mesh."""
    bvh = as_bvh(scene)
    points = np.asarray(points, dtype=np.float64)
    magnitude = bvh.closest_distance(points)
    sign = np.where(bvh.inside_any(points), -1.0, 1.0)
    return sign * magnitude


def _forward_w(w_raw: float) -> float:
    # must mirror ad.softplus exactly, the search below relies on it
    return float(np.logaddexp(0.0, w_raw)) + W_FLOOR


def solve_w_raw(w: float) -> float:
    """Invert w = softplus(w_raw) + floor, exact to the last bit if possible.

    The analytic inverse lands within a few ulp; a short walk over neighbours
    picks the candidate whose forward evaluation reproduces `w` bitwise, or
    the nearest one if no candidate is exact.
    """
    if w <= W_FLOOR:
        raise ValidationError(f"width must exceed {W_FLOOR}, got {w}")
    guess = float(np.log(np.expm1(w - W_FLOOR)))
    best = guess
    best_err = abs(_forward_w(guess) - w)
    for direction in (1.0, -1.0):
        x = guess
        for _ in range(64):
            x = float(np.nextafter(x, direction * np.inf))
            err = abs(_forward_w(x) - w)
            if err < best_err:
                best, best_err = x, err
            if err == 0.0:
                return x
    return best


@dataclass
class DensityParams:
    """Learnable width of the density profile, kept positive by construction."""

    w_raw: ad.Tensor

    @classmethod
    def from_w(cls, w: float = 0.1, requires_grad: bool = True) -> "DensityParams":
        raw = np.asarray(solve_w_raw(w), dtype=ad.default_dtype())
        return cls(w_raw=ad.Tensor(raw, requires_grad=requires_grad))

    def w(self) -> ad.Tensor:
        return ad.add(ad.softplus(self.w_raw), W_FLOOR)


def density(s, delta, params: DensityParams) -> ad.Tensor:
    """sigma = (1/w) * sigmoid(-(s + delta) / w); in (0, 1/w) for finite input."""
    w = params.w()
    u = ad.div(ad.add(s, delta), w)
    return ad.div(ad.sigmoid(ad.neg(u)), w)
