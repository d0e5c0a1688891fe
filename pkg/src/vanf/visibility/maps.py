"""Binary visibility maps and silhouette rasterization.

Ground-truth maps follow two rules. A real target image is trusted as-is, so
its whole foreground counts as visible and the map is the silhouette mask. A
synthesized target only shows what the input view could have seen, so each
target-view surface point is tested for occlusion against the input camera.
"""

from __future__ import annotations

from typing import Sequence, Union

import numpy as np

from ..geometry.camera import MIN_DEPTH, Camera
from ..geometry.mesh import TriMesh
from .bvh import Bvh, FirstHit, build_bvh

SURFACE_OFFSET_FACTOR = 1e-4

SceneLike = Union[Bvh, Sequence[TriMesh]]


def as_bvh(scene: SceneLike) -> Bvh:
    return scene if isinstance(scene, Bvh) else build_bvh(scene)


def _maybe_bvh(scene: SceneLike) -> Bvh | None:
    # empty scenes are legal for rasterization (all background), not for bvh builds
    if not isinstance(scene, Bvh) and len(scene) == 0:
        return None
    return as_bvh(scene)


def surface_offset(bvh: Bvh) -> float:
    return SURFACE_OFFSET_FACTOR * bvh.scale


def point_visibility(scene: SceneLike, points, camera: Camera, offset: float) -> np.ndarray:
    """1.0 where the segment point->camera eye is unobstructed, else 0.0.

    `offset` nudges the segment start toward the camera before testing, so a
    point lying on a surface does not get shadowed by its own triangle fan.
    Pass the scene's surface offset for on-surface points and 0.0 for
    free-space queries. Points behind the camera are reported not visible.
    """
    bvh = _maybe_bvh(scene)
    points = np.asarray(points, dtype=np.float64)
    _, depth = camera.project(points)
    in_front = depth > MIN_DEPTH
    if bvh is None:
        return in_front.astype(np.float64)

    to_eye = camera.eye[None, :] - points
    length = np.linalg.norm(to_eye, axis=1)
    safe = np.maximum(length, 1e-300)
    dirs = to_eye / safe[:, None]
    starts = points + offset * dirs
    t_max = np.maximum(length - offset, 0.0)
    blocked = bvh.any_hit(starts, dirs, t_max)
    return (in_front & ~blocked).astype(np.float64)


def rasterize_hits(scene: SceneLike, camera: Camera) -> FirstHit:
    """First hit along every pixel-center ray, fields shaped (H, W)."""
    bvh = _maybe_bvh(scene)
    shape = (camera.height, camera.width)
    if bvh is None:
        return FirstHit(
            t=np.full(shape, -1.0),
            tri=np.full(shape, -1, dtype=np.int64),
            mesh=np.full(shape, -1, dtype=np.int64),
            u=np.zeros(shape),
            v=np.zeros(shape),
        )
    origins, dirs = camera.pixel_grid()
    return bvh.first_hit(origins, dirs).reshape(shape)


def rasterize_silhouette(scene: SceneLike, camera: Camera) -> np.ndarray:
    return rasterize_hits(scene, camera).hit.astype(np.float64)


def hand_masks(scene: SceneLike, camera: Camera) -> np.ndarray:
    """(2, H, W) binary masks, one per mesh id."""
    mesh = rasterize_hits(scene, camera).mesh
    return np.stack([(mesh == 0), (mesh == 1)]).astype(np.float64)


def render_visibility_gt(scene: SceneLike, input_camera: Camera, target_camera: Camera) -> np.ndarray:
    """Input-view visibility of each target-view hit point; background is 0."""
    bvh = _maybe_bvh(scene)
    shape = (target_camera.height, target_camera.width)
    if bvh is None:
        return np.zeros(shape)
    origins, dirs = target_camera.pixel_grid()
    hits = bvh.first_hit(origins, dirs)
    mask = hits.hit
    out = np.zeros(origins.shape[0])
    if mask.any():
        x = origins[mask] + hits.t[mask, None] * dirs[mask]
        out[mask] = point_visibility(bvh, x, input_camera, surface_offset(bvh))
    return out.reshape(shape)


def make_gt_visibility(
    target_is_real: bool, scene: SceneLike, input_camera: Camera, target_camera: Camera
) -> np.ndarray:
    if target_is_real:
        return rasterize_silhouette(scene, target_camera)
    return render_visibility_gt(scene, input_camera, target_camera)
