"""Triangle mesh container, watertightness census, and OBJ round trip.

Coordinates are float64 throughout. ``canonical_coords`` live in [0, 1]^3 and
are a property of the shared topology: every posed or mirrored instance of
the same template carries identical values, which is what makes them usable
as dense correspondence targets.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

LEFT, RIGHT = 0, 1
HAND_NAMES = ("left", "right")


@dataclass
class TriMesh:
    vertices: np.ndarray            # (V, 3) float64
    faces: np.ndarray               # (F, 3) int64, CCW outward
    canonical_coords: np.ndarray    # (V, 3) in [0, 1]
    hand: str = "right"

    def __post_init__(self) -> None:
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        self.canonical_coords = np.ascontiguousarray(self.canonical_coords, dtype=np.float64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValidationError(f"vertices must be (V, 3), got {self.vertices.shape}")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValidationError(f"faces must be (F, 3), got {self.faces.shape}")
        if self.canonical_coords.shape != self.vertices.shape:
            raise ValidationError("canonical_coords must match vertices shape")
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise ValidationError("face indices out of range")
        if self.hand not in HAND_NAMES:
            raise ValidationError(f"hand must be one of {HAND_NAMES}, got {self.hand!r}")

    # -- derived quantities ------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def triangles(self) -> np.ndarray:
        """(F, 3, 3) corner positions."""
        return self.vertices[self.faces]

    def aabb(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def face_normals(self, normalized: bool = True) -> np.ndarray:
        tri = self.triangles()
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        if normalized:
            n = n / np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-300)
        return n

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals(normalized=False), axis=1)

    def vertex_normals(self) -> np.ndarray:
        """Area-weighted vertex normals (unnormalized cross products summed)."""
        fn = self.face_normals(normalized=False)
        vn = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(vn, self.faces[:, k], fn)
        return vn / np.maximum(np.linalg.norm(vn, axis=1, keepdims=True), 1e-300)

    def signed_volume(self) -> float:
        tri = self.triangles()
        return float(np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0)

    def edge_census(self) -> dict:
        """Counts for the watertightness check.

        A closed orientable 2-manifold has every directed edge exactly once
        and every edge paired with its reverse.
        """
        e = np.concatenate(
            [self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]], axis=0
        )
        directed = set(map(tuple, e.tolist()))
        duplicates = len(e) - len(directed)
        unpaired = sum(1 for (a, b) in directed if (b, a) not in directed)
        return {"directed_edges": len(e), "duplicate_directed": duplicates, "unpaired": unpaired}

    def is_watertight(self) -> bool:
        c = self.edge_census()
        return c["duplicate_directed"] == 0 and c["unpaired"] == 0

    def min_face_area(self) -> float:
        tri = self.triangles()
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return float(0.5 * np.linalg.norm(n, axis=1).min()) if len(tri) else 0.0

    def mirrored(self) -> "TriMesh":
        """x-negated twin with flipped winding; topology and canonicals shared."""
        v = self.vertices.copy()
        v[:, 0] = -v[:, 0]
        return TriMesh(
            vertices=v,
            faces=self.faces[:, [0, 2, 1]].copy(),
            canonical_coords=self.canonical_coords,
            hand=HAND_NAMES[1 - HAND_NAMES.index(self.hand)],
        )

    def translated(self, offset: np.ndarray) -> "TriMesh":
        return TriMesh(
            vertices=self.vertices + np.asarray(offset, dtype=np.float64),
            faces=self.faces,
            canonical_coords=self.canonical_coords,
            hand=self.hand,
        )


def union_aabb(meshes) -> tuple[np.ndarray, np.ndarray]:
    los, his = zip(*(m.aabb() for m in meshes))
    return np.min(los, axis=0), np.max(his, axis=0)


def scene_scale(meshes) -> float:
    """Diagonal of the union AABB; the package's reference length unit."""
    lo, hi = union_aabb(meshes)
    return float(np.linalg.norm(hi - lo))


def write_obj(path: str | os.PathLike, mesh: TriMesh) -> None:
    lines = [f"# vanf hand={mesh.hand}\n"]
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
    for f in mesh.faces + 1:
        lines.append(f"f {f[0]} {f[1]} {f[2]}\n")
    with open(path, "w") as fh:
        fh.writelines(lines)


def read_obj(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    """Positions and faces from a triangle OBJ; v/vt/vn face forms accepted."""
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 3:
                    raise ValidationError(f"non-triangle face in {path}")
                faces.append([i - 1 for i in idx])
    if not verts:
        raise ValidationError(f"no vertices in {path}")
    return np.asarray(verts, dtype=np.float64), np.asarray(faces, dtype=np.int64)
