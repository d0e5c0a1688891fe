"""Procedural articulated hand proxy.

The template is the boundary surface of a voxelized hand footprint (palm
slab, four fingers, one thumb), Laplacian-smoothed into an organic blob.
Extraction from a voxel solid makes watertightness and fixed topology true
by construction; smoothing and skinning never touch the face list.

Articulation is linear blend skinning over a small skeleton: a rigid palm
root plus two bones per digit (proximal / distal), with smooth weight ramps
across the joints. The left hand is the x-mirror of the posed right hand
with flipped winding, so both hands share topology and canonical
coordinates.

Everything here is a pure function of its arguments; the template itself
contains no randomness.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import ValidationError
from .mesh import TriMesh

# voxel-grid layout (units: voxels; 20 voxels ~ 1.0 in world units)
_PALM = dict(x=(0, 12), y=(0, 12), z=(0, 4))
_FINGERS = [  # pinky, ring, middle, index: (x_start, length)
    (0, 5),
    (3, 7),
    (6, 8),
    (9, 7),
]
_FINGER_W = 2
_FINGER_Z = (1, 4)
_THUMB = dict(x=(12, 18), y=(2, 4), z=(1, 4))
_SCALE = 1.0 / 20.0
_PALM_CENTER = np.array([6.0, 6.0, 2.0])
_SMOOTH_ITERS = 5
_SMOOTH_LAMBDA = 0.5

CURL_LIMITS = (-0.3, 1.35)
SPREAD_LIMITS = (-0.25, 0.25)

# quad corners per outward face direction, CCW seen from outside
_FACE_CORNERS = {
    (1, 0, 0): ((1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)),
    (-1, 0, 0): ((0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)),
    (0, 1, 0): ((0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)),
    (0, -1, 0): ((0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)),
    (0, 0, 1): ((0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)),
    (0, 0, -1): ((0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)),
}


def _solid_voxels() -> set[tuple[int, int, int]]:
    solid = set()
    for i in range(*_PALM["x"]):
        for j in range(*_PALM["y"]):
            for k in range(*_PALM["z"]):
                solid.add((i, j, k))
    y0 = _PALM["y"][1]
    for x0, length in _FINGERS:
        for i in range(x0, x0 + _FINGER_W):
            for j in range(y0, y0 + length):
                for k in range(*_FINGER_Z):
                    solid.add((i, j, k))
    for i in range(*_THUMB["x"]):
        for j in range(*_THUMB["y"]):
            for k in range(*_THUMB["z"]):
                solid.add((i, j, k))
    return solid


def _extract_boundary(solid: set) -> tuple[np.ndarray, np.ndarray]:
    vert_id: dict[tuple[int, int, int], int] = {}
    verts: list[tuple[int, int, int]] = []
    faces: list[list[int]] = []

    def vid(p):
        if p not in vert_id:
            vert_id[p] = len(verts)
            verts.append(p)
        return vert_id[p]

    for vox in sorted(solid):
        i, j, k = vox
        for d, corners in _FACE_CORNERS.items():
            if (i + d[0], j + d[1], k + d[2]) in solid:
                continue
            ids = [vid((i + c[0], j + c[1], k + c[2])) for c in corners]
            faces.append([ids[0], ids[1], ids[2]])
            faces.append([ids[0], ids[2], ids[3]])
    return np.asarray(verts, dtype=np.float64), np.asarray(faces, dtype=np.int64)


def _smooth(verts: np.ndarray, faces: np.ndarray, iters: int, lam: float) -> np.ndarray:
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]], axis=0)
    v = verts.copy()
    deg = np.zeros(len(verts))
    np.add.at(deg, edges[:, 0], 1.0)
    for _ in range(iters):
        acc = np.zeros_like(v)
        np.add.at(acc, edges[:, 0], v[edges[:, 1]])
        v = v + lam * (acc / deg[:, None] - v)
    return v


@dataclass(frozen=True)
class _Skeleton:
    starts: np.ndarray   # (5, 3) digit base joints, voxel units
    axes: np.ndarray     # (5, 3) digit directions
    bend_axes: np.ndarray  # (5, 3) curl rotation axes
    lengths: np.ndarray  # (5,)


def _skeleton() -> _Skeleton:
    starts, axes, bends, lengths = [], [], [], []
    y0 = float(_PALM["y"][1])
    zc = 2.5
    for x0, length in _FINGERS:
        starts.append([x0 + _FINGER_W / 2.0, y0, zc])
        axes.append([0.0, 1.0, 0.0])
        bends.append([-1.0, 0.0, 0.0])  # curl rotates +y toward -z
        lengths.append(float(length))
    starts.append([float(_THUMB["x"][0]), 3.0, zc])
    axes.append([1.0, 0.0, 0.0])
    bends.append([0.0, 1.0, 0.0])
    lengths.append(float(_THUMB["x"][1] - _THUMB["x"][0]))
    return _Skeleton(
        np.asarray(starts), np.asarray(axes), np.asarray(bends), np.asarray(lengths)
    )


def _ramp(x: np.ndarray) -> np.ndarray:
    t = np.clip(x, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _skin_weights(verts: np.ndarray, skel: _Skeleton) -> np.ndarray:
    """(V, 5, 2) weights for (digit, bone); palm weight is the remainder."""
    w = np.zeros((len(verts), 5, 2))
    for d in range(5):
        rel = verts - skel.starts[d]
        t = rel @ skel.axes[d]
        lateral = rel - t[:, None] * skel.axes[d]
        # lateral distance in the splay plane only (ignore thickness axis z)
        lat = np.abs(lateral[:, 0] if d < 4 else lateral[:, 1])
        member = (lat < 1.8) & (t > -1.0)
        w_digit = _ramp((t + 0.5) / 1.5) * member
        s = _ramp((t - skel.lengths[d] / 2.0 + 0.75) / 1.5)
        w[:, d, 0] = w_digit * (1.0 - s)
        w[:, d, 1] = w_digit * s
    return w


def _rot(axis: np.ndarray, angle: float) -> np.ndarray:
    a = np.asarray(axis, dtype=np.float64)
    a = a / np.linalg.norm(a)
    c, s = np.cos(angle), np.sin(angle)
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return c * np.eye(3) + s * k + (1 - c) * np.outer(a, a)


@lru_cache(maxsize=1)
def _template():
    verts, faces = _extract_boundary(_solid_voxels())
    verts = _smooth(verts, faces, _SMOOTH_ITERS, _SMOOTH_LAMBDA)
    skel = _skeleton()
    weights = _skin_weights(verts, skel)
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    canonical = (verts - lo) / (hi - lo)
    return verts, faces, canonical, skel, weights


def template_vertex_count() -> int:
    return len(_template()[0])


@dataclass
class HandPose:
    """Per-digit curl angles plus a global rigid transform.

    ``curl`` is (5, 2) radians: rows pinky, ring, middle, index, thumb;
    columns (base joint, middle joint). ``spread`` is a per-digit splay
    angle. Curl bends toward the palm for positive angles.
    """

    curl: np.ndarray
    spread: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        self.curl = np.asarray(self.curl, dtype=np.float64).reshape(5, 2)
        self.spread = np.asarray(self.spread, dtype=np.float64).reshape(5)
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        lo, hi = CURL_LIMITS
        if (self.curl < lo - 1e-9).any() or (self.curl > hi + 1e-9).any():
            raise ValidationError(f"curl angles outside [{lo}, {hi}]")
        lo, hi = SPREAD_LIMITS
        if (self.spread < lo - 1e-9).any() or (self.spread > hi + 1e-9).any():
            raise ValidationError(f"spread angles outside [{lo}, {hi}]")

    @classmethod
    def rest(cls) -> "HandPose":
        return cls(np.zeros((5, 2)), np.zeros(5), np.eye(3), np.zeros(3))

    def to_dict(self) -> dict:
        return {
            "curl_radians": self.curl.tolist(),
            "spread_radians": self.spread.tolist(),
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HandPose":
        try:
            return cls(
                np.asarray(d["curl_radians"]),
                np.asarray(d["spread_radians"]),
                np.asarray(d["rotation"]),
                np.asarray(d["translation"]),
            )
        except KeyError as e:
            raise ValidationError(f"pose json missing field {e}") from e


def random_pose(rng: np.random.Generator, center=(0.45, 0.0, 0.0), radius: float = 0.15) -> HandPose:
    curl = rng.uniform(-0.15, 1.2, size=(5, 2))
    spread = rng.uniform(-0.15, 0.15, size=5)
    axis = rng.standard_normal(3)
    axis /= np.linalg.norm(axis)
    rot = _rot(axis, rng.uniform(0.0, np.pi))
    offset = rng.uniform(-1.0, 1.0, size=3)
    translation = np.asarray(center, dtype=np.float64) + radius * offset
    return HandPose(curl, spread, rot, translation)


def _pose_vertices(pose: HandPose) -> np.ndarray:
    verts, _, _, skel, weights = _template()
    posed = np.zeros_like(verts)
    w_digit_total = weights.sum(axis=(1, 2))
    posed += (1.0 - w_digit_total)[:, None] * verts
    for d in range(5):
        r_spread = _rot(np.array([0.0, 0.0, 1.0]), float(pose.spread[d])) if d < 4 else np.eye(3)
        r1 = r_spread @ _rot(skel.bend_axes[d], float(pose.curl[d, 0]))
        r2 = _rot(skel.bend_axes[d], float(pose.curl[d, 1]))
        s = skel.starts[d]
        mid = s + skel.axes[d] * (skel.lengths[d] / 2.0)
        prox = (verts - s) @ r1.T + s
        dist_local = (verts - mid) @ r2.T + mid
        dist = (dist_local - s) @ r1.T + s
        posed += weights[:, d, 0, None] * prox + weights[:, d, 1, None] * dist
    centered = (posed - _PALM_CENTER) * _SCALE
    return centered @ pose.rotation.T + pose.translation


def generate_hand_proxy(pose: HandPose, hand: str) -> TriMesh:
    """Posed watertight hand mesh; 'left' is the exact mirror of 'right'."""
    if hand not in ("left", "right"):
        raise ValidationError(f"hand must be 'left' or 'right', got {hand!r}")
    _, faces, canonical, _, _ = _template()
    mesh = TriMesh(
        vertices=_pose_vertices(pose), faces=faces.copy(), canonical_coords=canonical, hand="right"
    )
    return mesh.mirrored() if hand == "left" else mesh


def icosphere(subdivisions: int = 2, radius: float = 0.5, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Convex watertight sphere mesh (test proxy for occlusion reasoning)."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    faces = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}
        vlist = list(verts)
        new_faces = []

        def midpoint(a: int, b: int) -> int:
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = vlist[a] + vlist[b]
                m = m / np.linalg.norm(m)
                cache[key] = len(vlist)
                vlist.append(m)
            return cache[key]

        for f in faces:
            a, b, c = (int(x) for x in f)
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        verts = np.asarray(vlist)
        faces = np.asarray(new_faces, dtype=np.int64)
    verts = verts * radius + np.asarray(center, dtype=np.float64)
    canonical = (verts - verts.min(axis=0)) / (verts.max(axis=0) - verts.min(axis=0))
    return TriMesh(vertices=verts, faces=faces, canonical_coords=canonical, hand="right")


def write_pose_json(path: str | os.PathLike, left: HandPose, right: HandPose) -> None:
    with open(path, "w") as f:
        json.dump({"left_premirror": left.to_dict(), "right": right.to_dict()}, f, indent=1)


def read_pose_json(path: str | os.PathLike) -> tuple[HandPose, HandPose]:
    with open(path) as f:
        d = json.load(f)
    return HandPose.from_dict(d["left_premirror"]), HandPose.from_dict(d["right"])
