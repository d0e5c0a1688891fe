"""Pinhole cameras: projection, ray generation, JSON serialization.

Conventions (used everywhere in the package):

* camera frame: x right, y down, z forward; world-to-camera is
  ``Xc = R @ (Xw - eye)`` with R rows = (right, down, forward);
* integer pixel coordinates address pixel centers, so the principal point
  of a centered W x H camera is ((W-1)/2, (H-1)/2);
* ``project`` maps world points to continuous (u, v) plus depth; callers
  decide what to do with points behind the camera (depth <= 0) or outside
  the image.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

MIN_DEPTH = 1e-6


@dataclass
class Camera:
    rotation: np.ndarray          # (3, 3) world-to-camera, rows right/down/forward
    eye: np.ndarray               # (3,) camera center in world
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    azimuth_deg: float = 0.0      # view-sphere metadata, used for yaw buckets
    elevation_deg: float = 0.0

    def __post_init__(self) -> None:
        self.rotation = np.ascontiguousarray(self.rotation, dtype=np.float64)
        self.eye = np.ascontiguousarray(self.eye, dtype=np.float64)
        if self.rotation.shape != (3, 3) or self.eye.shape != (3,):
            raise ValidationError("camera needs (3,3) rotation and (3,) eye")
        err = np.abs(self.rotation @ self.rotation.T - np.eye(3)).max()
        if err > 1e-8:
            raise ValidationError(f"camera rotation not orthonormal (err={err:.2e})")
        if self.fx <= 0 or self.fy <= 0 or self.width <= 0 or self.height <= 0:
            raise ValidationError("camera intrinsics must be positive")

    @property
    def forward(self) -> np.ndarray:
        return self.rotation[2]

    def project(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """World points (N, 3) -> (uv (N, 2), depth (N,)).

        Points with depth <= MIN_DEPTH get NaN uv; their depth is returned
        unchanged so callers can detect and handle them.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        cam = (pts - self.eye) @ self.rotation.T
        z = cam[:, 2]
        safe = np.where(z > MIN_DEPTH, z, np.nan)
        u = self.fx * cam[:, 0] / safe + self.cx
        v = self.fy * cam[:, 1] / safe + self.cy
        return np.stack([u, v], axis=1), z

    def ray(self, u, v) -> tuple[np.ndarray, np.ndarray]:
        """Pixel coords (scalars or arrays) -> (origins, unit directions)."""
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        d_cam = np.stack(
            [(u - self.cx) / self.fx, (v - self.cy) / self.fy, np.ones_like(u)], axis=-1
        )
        d_world = d_cam @ self.rotation  # == rotation.T applied to rows
        d_world = d_world / np.linalg.norm(d_world, axis=-1, keepdims=True)
        origins = np.broadcast_to(self.eye, d_world.shape).copy()
        return origins, d_world

    def pixel_grid(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened (origins, dirs) for every pixel, row-major."""
        vv, uu = np.meshgrid(np.arange(self.height), np.arange(self.width), indexing="ij")
        return self.ray(uu.reshape(-1).astype(np.float64), vv.reshape(-1).astype(np.float64))

    def to_dict(self) -> dict:
        return {
            "rotation_rows_right_down_forward": self.rotation.tolist(),
            "eye": self.eye.tolist(),
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
            "azimuth_deg": self.azimuth_deg,
            "elevation_deg": self.elevation_deg,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        try:
            return cls(
                rotation=np.asarray(d["rotation_rows_right_down_forward"], dtype=np.float64),
                eye=np.asarray(d["eye"], dtype=np.float64),
                fx=float(d["fx"]),
                fy=float(d["fy"]),
                cx=float(d["cx"]),
                cy=float(d["cy"]),
                width=int(d["width"]),
                height=int(d["height"]),
                azimuth_deg=float(d.get("azimuth_deg", 0.0)),
                elevation_deg=float(d.get("elevation_deg", 0.0)),
            )
        except KeyError as e:
            raise ValidationError(f"camera json missing field {e}") from e


def look_at(eye: np.ndarray, target: np.ndarray, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """World-to-camera rotation with rows (right, down, forward)."""
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    n = np.linalg.norm(fwd)
    if n < 1e-12:
        raise ValidationError("look_at: eye coincides with target")
    fwd = fwd / n
    upv = np.asarray(up, dtype=np.float64)
    right = np.cross(fwd, upv)
    rn = np.linalg.norm(right)
    if rn < 1e-9:
        # forward parallel to up: fall back to a fixed lateral axis
        right = np.cross(fwd, np.array([1.0, 0.0, 0.0]))
        rn = np.linalg.norm(right)
    right = right / rn
    down = np.cross(fwd, right)
    return np.stack([right, down, fwd])


def view_sphere_camera(
    center: np.ndarray,
    radius: float,
    azimuth_deg: float,
    elevation_deg: float,
    image_size: int,
    fov_deg: float = 40.0,
) -> Camera:
    az = np.deg2rad(azimuth_deg)
    el = np.deg2rad(elevation_deg)
    offset = radius * np.array(
        [np.cos(el) * np.sin(az), np.sin(el), np.cos(el) * np.cos(az)]
    )
    eye = np.asarray(center, dtype=np.float64) + offset
    focal = (image_size / 2.0) / np.tan(np.deg2rad(fov_deg) / 2.0)
    c = (image_size - 1) / 2.0
    return Camera(
        rotation=look_at(eye, center),
        eye=eye,
        fx=focal,
        fy=focal,
        cx=c,
        cy=c,
        width=image_size,
        height=image_size,
        azimuth_deg=float(azimuth_deg),
        elevation_deg=float(elevation_deg),
    )


def relative_yaw_deg(a: Camera, b: Camera) -> float:
    """Azimuth separation on the view sphere, wrapped to [0, 180]."""
    d = abs(a.azimuth_deg - b.azimuth_deg) % 360.0
    return min(d, 360.0 - d)


def write_cameras_json(path: str | os.PathLike, cameras: list[Camera]) -> None:
    with open(path, "w") as f:
        json.dump({"cameras": [c.to_dict() for c in cameras]}, f, indent=1)


def read_cameras_json(path: str | os.PathLike) -> list[Camera]:
    with open(path) as f:
        data = json.load(f)
    if "cameras" not in data:
        raise ValidationError(f"{path}: missing 'cameras' key")
    return [Camera.from_dict(d) for d in data["cameras"]]
