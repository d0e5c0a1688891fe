"""Bounding-volume hierarchy over scene triangles.

The tree is built once in Python (deterministic median split) and stored as
flat arrays so the compiled kernels can traverse it without object access.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import ValidationError
from ..geometry.mesh import TriMesh
from . import kernels

LEAF_SIZE = 4

# Fixed parity-test directions with irrational components; a mesh edge or
# vertex lying exactly on one of these rays from a query point is vanishingly
# unlikely, and the 2-of-3 majority vote absorbs a single degenerate ray.
_raw = np.array(
    [
        [1.0, np.sqrt(2.0), np.sqrt(3.0)],
        [np.sqrt(5.0), 1.0, np.sqrt(7.0)],
        [np.sqrt(11.0), np.sqrt(13.0), 1.0],
    ]
)
PARITY_DIRECTIONS = _raw / np.linalg.norm(_raw, axis=1, keepdims=True)


@dataclass
class FirstHit:
    """Per-ray first intersection; tri/mesh are -1 and t is -1.0 on a miss."""

    t: np.ndarray
    tri: np.ndarray
    mesh: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @property
    def hit(self) -> np.ndarray:
        return self.tri >= 0

    def reshape(self, shape) -> "FirstHit":
        return FirstHit(
            t=self.t.reshape(shape),
            tri=self.tri.reshape(shape),
            mesh=self.mesh.reshape(shape),
            u=self.u.reshape(shape),
            v=self.v.reshape(shape),
        )


def _as_rays(origins, dirs):
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    if origins.ndim != 2 or origins.shape[1] != 3 or origins.shape != dirs.shape:
        raise ValidationError(f"expected matching (n, 3) ray arrays, got {origins.shape} and {dirs.shape}")
    return origins, dirs


@dataclass
class Bvh:
    """Immutable after construction; every query method is read-only."""

    tris: np.ndarray       # (F, 9) triangle vertices, row = v0 v1 v2 flattened
    tri_mesh: np.ndarray   # (F,) owning mesh index
    node_min: np.ndarray
    node_max: np.ndarray
    node_left: np.ndarray
    node_right: np.ndarray
    node_start: np.ndarray
    node_count: np.ndarray
    tri_order: np.ndarray
    scale: float = field(default=0.0)

    @property
    def n_tris(self) -> int:
        return self.tris.shape[0]

    def first_hit(self, origins, dirs) -> FirstHit:
        origins, dirs = _as_rays(origins, dirs)
        n = origins.shape[0]
        out_t = np.empty(n)
        out_tri = np.empty(n, dtype=np.int64)
        out_u = np.empty(n)
        out_v = np.empty(n)
        kernels.bvh_first_hit(
            origins, dirs, self.node_min, self.node_max, self.node_left,
            self.node_right, self.node_start, self.node_count, self.tri_order,
            self.tris, out_t, out_tri, out_u, out_v,
        )
        mesh = np.where(out_tri >= 0, self.tri_mesh[np.maximum(out_tri, 0)], -1)
        return FirstHit(t=out_t, tri=out_tri, mesh=mesh, u=out_u, v=out_v)

    def any_hit(self, origins, dirs, t_max) -> np.ndarray:
        origins, dirs = _as_rays(origins, dirs)
        t_max = np.ascontiguousarray(t_max, dtype=np.float64)
        out = np.empty(origins.shape[0], dtype=np.uint8)
        kernels.bvh_any_hit(
            origins, dirs, t_max, self.node_min, self.node_max, self.node_left,
            self.node_right, self.node_start, self.node_count, self.tri_order,
            self.tris, out,
        )
        return out.astype(bool)

    def segment_blocked(self, starts, ends) -> np.ndarray:
        """True where the open segment start->end crosses any triangle."""
        starts = np.asarray(starts, dtype=np.float64)
        ends = np.asarray(ends, dtype=np.float64)
        delta = ends - starts
        length = np.linalg.norm(delta, axis=1)
        safe = np.maximum(length, 1e-300)
        dirs = delta / safe[:, None]
        return self.any_hit(starts, dirs, length)

    def closest_distance(self, points) -> np.ndarray:
        points = np.ascontiguousarray(points, dtype=np.float64)
        out = np.empty(points.shape[0])
        kernels.bvh_closest_d2(
            points, self.node_min, self.node_max, self.node_left, self.node_right,
            self.node_start, self.node_count, self.tri_order, self.tris, out,
        )
        return np.sqrt(out)

    def inside(self, points) -> np.ndarray:
        """(n, 2) bool, per-mesh containment by parity vote over 3 rays."""
        points = np.ascontiguousarray(points, dtype=np.float64)
        n = points.shape[0]
        votes = np.zeros((n, 2), dtype=np.int64)
        counts = np.empty((n, 2), dtype=np.int64)
        for d in range(PARITY_DIRECTIONS.shape[0]):
            direction = np.ascontiguousarray(PARITY_DIRECTIONS[d])
            kernels.bvh_count_crossings(
                points, direction, self.node_min, self.node_max, self.node_left,
                self.node_right, self.node_start, self.node_count, self.tri_order,
                self.tris, self.tri_mesh, counts,
            )
            votes += counts & 1
        return votes >= 2

    def inside_any(self, points) -> np.ndarray:
        return self.inside(points).any(axis=1)


def build_bvh(meshes: Sequence[TriMesh]) -> Bvh:
    """Deterministic build: median split on the longest box axis, stable sort."""
    parts = []
    mesh_ids = []
    for k, mesh in enumerate(meshes):
        tri = mesh.triangles().reshape(-1, 9)
        parts.append(tri)
        mesh_ids.append(np.full(tri.shape[0], k, dtype=np.int64))
    if not parts:
        raise ValidationError("cannot build a bvh over zero meshes")
    tris = np.ascontiguousarray(np.concatenate(parts, axis=0))
    tri_mesh = np.concatenate(mesh_ids)
    n = tris.shape[0]
    if n == 0:
        raise ValidationError("cannot build a bvh over zero triangles")

    corners = tris.reshape(n, 3, 3)
    raw_min = corners.min(axis=1)
    raw_max = corners.max(axis=1)
    root_extent = float((raw_max.max(axis=0) - raw_min.min(axis=0)).max())
    scale = float(np.linalg.norm(raw_max.max(axis=0) - raw_min.min(axis=0)))
    # pad so slab-test rounding can never miss a triangle lying on a box face
    pad = max(1e-12, 1e-9 * root_extent)
    box_min = raw_min - pad
    box_max = raw_max + pad
    centroids = corners.mean(axis=1)

    order = np.arange(n, dtype=np.int64)
    node_min: list[np.ndarray] = []
    node_max: list[np.ndarray] = []
    node_left: list[int] = []
    node_right: list[int] = []
    node_start: list[int] = []
    node_count: list[int] = []

    def rec(lo: int, hi: int) -> int:
        idx = order[lo:hi]
        me = len(node_min)
        node_min.append(box_min[idx].min(axis=0))
        node_max.append(box_max[idx].max(axis=0))
        node_left.append(-1)
        node_right.append(-1)
        node_start.append(lo)
        node_count.append(hi - lo)
        if hi - lo <= LEAF_SIZE:
            return me
        axis = int(np.argmax(node_max[me] - node_min[me]))
        perm = np.argsort(centroids[idx, axis], kind="stable")
        order[lo:hi] = idx[perm]
        mid = lo + (hi - lo) // 2
        node_left[me] = rec(lo, mid)
        node_right[me] = rec(mid, hi)
        return me

    rec(0, n)
    return Bvh(
        tris=tris,
        tri_mesh=tri_mesh,
        node_min=np.ascontiguousarray(node_min),
        node_max=np.ascontiguousarray(node_max),
        node_left=np.asarray(node_left, dtype=np.int64),
        node_right=np.asarray(node_right, dtype=np.int64),
        node_start=np.asarray(node_start, dtype=np.int64),
        node_count=np.asarray(node_count, dtype=np.int64),
        tri_order=order,
        scale=scale,
    )
