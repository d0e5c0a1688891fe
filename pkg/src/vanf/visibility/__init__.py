from .bvh import PARITY_DIRECTIONS, Bvh, FirstHit, build_bvh
from .kernels import EPS_HIT
from .maps import (
    SURFACE_OFFSET_FACTOR,
    as_bvh,
    hand_masks,
    make_gt_visibility,
    point_visibility,
    rasterize_hits,
    rasterize_silhouette,
    render_visibility_gt,
    surface_offset,
)

__all__ = [
    "PARITY_DIRECTIONS",
    "Bvh",
    "FirstHit",
    "build_bvh",
    "EPS_HIT",
    "SURFACE_OFFSET_FACTOR",
    "as_bvh",
    "hand_masks",
    "make_gt_visibility",
    "point_visibility",
    "rasterize_hits",
    "rasterize_silhouette",
    "render_visibility_gt",
    "surface_offset",
]
