"""Two-hand scene synthesis and nearest-vertex queries over mesh pairs.

A scene is an ordered pair (left, right) of posed hand proxies. Mesh 0 is
always the left hand; queries that return a (mesh_id, vertex_index) pair
break distance ties toward lower mesh id, then lower index, matching an
exhaustive scan in that order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from .hand import HandPose, generate_hand_proxy, random_pose
from .mesh import TriMesh, scene_scale, union_aabb


@dataclass
class Scene:
    left: TriMesh
    right: TriMesh
    pose_left: HandPose      # pre-mirror pose; generate_hand_proxy(pose, "left") == left
    pose_right: HandPose
    touching: bool = False
    min_gap: float = 0.0

    @property
    def meshes(self) -> tuple[TriMesh, TriMesh]:
        return (self.left, self.right)

    def scale(self) -> float:
        return scene_scale(self.meshes)

    def center(self) -> np.ndarray:
        lo, hi = union_aabb(self.meshes)
        return (lo + hi) / 2.0


def min_vertex_gap(a: TriMesh, b: TriMesh) -> tuple[float, np.ndarray, np.ndarray]:
    """Smallest vertex-vertex distance and the realizing pair (pa, pb)."""
    d2 = ((a.vertices[:, None, :] - b.vertices[None, :, :]) ** 2).sum(axis=2)
    ia, ib = np.unravel_index(np.argmin(d2), d2.shape)
    return float(np.sqrt(d2[ia, ib])), a.vertices[ia], b.vertices[ib]


def make_scene(rng: np.random.Generator, touching: bool, jitter: float = 0.0) -> Scene:
    """Random two-hand scene; 'touching' steers the inter-hand gap.

    The gap is adjusted by translating the left hand along the closest-pair
    direction, folded back into its pre-mirror pose so the stored pose fully
    reproduces the mesh.
    """
    pose_right = random_pose(rng)
    pose_left = random_pose(rng)
    right = generate_hand_proxy(pose_right, "right")
    target = rng.uniform(0.01, 0.05) if touching else rng.uniform(0.18, 0.5)

    left = generate_hand_proxy(pose_left, "left")
    gap = 0.0
    for _ in range(8):
        gap, pl, pr = min_vertex_gap(left, right)
        if abs(gap - target) < 0.01:
            break
        direction = pr - pl
        n = np.linalg.norm(direction)
        if n < 1e-9:
            direction, n = np.array([1.0, 0.0, 0.0]), 1.0
        delta = (gap - target) * direction / n
        # left-mesh translation by delta == pre-mirror translation by x-negated delta
        pose_left.translation = pose_left.translation + delta * np.array([-1.0, 1.0, 1.0])
        left = generate_hand_proxy(pose_left, "left")

    if jitter > 0.0:
        left = TriMesh(
            left.vertices + rng.normal(0.0, jitter, size=left.vertices.shape),
            left.faces,
            left.canonical_coords,
            hand="left",
        )
        right = TriMesh(
            right.vertices + rng.normal(0.0, jitter, size=right.vertices.shape),
            right.faces,
            right.canonical_coords,
            hand="right",
        )
        gap, _, _ = min_vertex_gap(left, right)

    return Scene(left, right, pose_left, pose_right, touching=touching, min_gap=gap)


def nearest_vertex(points: np.ndarray, meshes):
    """Closest mesh vertex per query point over the union of the meshes.

    Returns (mesh_ids (N,), vertex_indices (N,)); exact ties resolve to the
    lower mesh id, then the lower vertex index (first minimum over the
    concatenated scan order).
    """
    from ..visibility.kernels import brute_nearest_vertex

    pts = np.atleast_2d(np.ascontiguousarray(points, dtype=np.float64))
    if pts.shape[1] != 3:
        raise ValidationError(f"points must be (N, 3), got {pts.shape}")
    all_verts = np.ascontiguousarray(np.concatenate([m.vertices for m in meshes], axis=0))
    starts = np.cumsum([0] + [m.n_vertices for m in meshes])
    flat = np.empty(len(pts), dtype=np.int64)
    brute_nearest_vertex(pts, all_verts, flat)
    mesh_ids = np.searchsorted(starts, flat, side="right") - 1
    return mesh_ids.astype(np.int64), flat - starts[mesh_ids]


def mirrored_vertex(mesh_id: np.ndarray, index: np.ndarray):
    """Same vertex index on the other hand; an involution by construction."""
    return 1 - np.asarray(mesh_id), np.asarray(index)
