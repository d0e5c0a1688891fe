"""Synthetic two-hand dataset: reference-rasterized views plus training loader.

Every image is produced by casting the same rays the visibility module uses,
then shading hit points procedurally from their canonical surface coordinates
with a fixed directional light. Silhouettes in the dataset are therefore
bit-identical to rasterize_silhouette on the same meshes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import DataSection
from .errors import ValidationError
from .geometry.camera import (
    Camera,
    read_cameras_json,
    relative_yaw_deg,
    view_sphere_camera,
    write_cameras_json,
)
from .geometry.hand import generate_hand_proxy, read_pose_json, write_pose_json
from .geometry.mesh import TriMesh, write_obj
from .geometry.scene import Scene, make_scene, scene_scale
from .image_io import read_pgm, read_ppm, write_pgm, write_ppm
from .rng import STREAM_CAMS, hash_u01, make_rng
from .visibility.bvh import FirstHit, build_bvh
from .visibility.maps import rasterize_hits

_LIGHT = np.array([0.45, -0.65, 0.61])
_LIGHT = _LIGHT / np.linalg.norm(_LIGHT)
_AMBIENT = 0.35
_DIFFUSE = 0.65
_BASE_TONE = {
    "left": np.array([0.86, 0.63, 0.51]),
    "right": np.array([0.80, 0.58, 0.47]),
}
_SPLIT_TAG = {"train": 0, "test": 1}


def _face_offsets(meshes) -> np.ndarray:
    counts = [len(m.faces) for m in meshes]
    return np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)


def _interp_vertex_attr(meshes, hits: FirstHit, attr: str) -> np.ndarray:
    """Barycentric interpolation of a per-vertex attribute at hit pixels.

    Returns (H, W, 3); zeros where the ray missed.
    """
    h, w = hits.t.shape
    offs = _face_offsets(meshes)
    out = np.zeros((h, w, 3))
    tri = hits.tri.reshape(-1)
    mesh = hits.mesh.reshape(-1)
    u = hits.u.reshape(-1)
    v = hits.v.reshape(-1)
    flat = out.reshape(-1, 3)
    for mid, m in enumerate(meshes):
        sel = mesh == mid
        if not sel.any():
            continue
        faces = m.faces[tri[sel] - offs[mid]]
        vals = getattr(m, attr)
        w0 = (1.0 - u[sel] - v[sel])[:, None]
        flat[sel] = (
            w0 * vals[faces[:, 0]]
            + u[sel][:, None] * vals[faces[:, 1]]
            + v[sel][:, None] * vals[faces[:, 2]]
        )
    return out


def _face_normals(meshes, hits: FirstHit) -> np.ndarray:
    h, w = hits.t.shape
    offs = _face_offsets(meshes)
    out = np.zeros((h, w, 3))
    tri = hits.tri.reshape(-1)
    mesh = hits.mesh.reshape(-1)
    flat = out.reshape(-1, 3)
    for mid, m in enumerate(meshes):
        sel = mesh == mid
        if not sel.any():
            continue
        faces = m.faces[tri[sel] - offs[mid]]
        p0 = m.vertices[faces[:, 0]]
        n = np.cross(m.vertices[faces[:, 1]] - p0, m.vertices[faces[:, 2]] - p0)
        norm = np.linalg.norm(n, axis=1, keepdims=True)
        flat[sel] = n / np.maximum(norm, 1e-300)
    return out


def shade_views(meshes, camera: Camera):
    """Reference render: returns (image (3,H,W), sil, masks (2,H,W), corr (2,3,H,W))."""
    hits = rasterize_hits(meshes, camera)
    hit_mask = hits.hit
    canon = _interp_vertex_attr(meshes, hits, "canonical_coords")
    normals = _face_normals(meshes, hits)

    lit = _AMBIENT + _DIFFUSE * np.clip(np.abs(normals @ _LIGHT), 0.0, 1.0)
    ripple = 0.10 * np.sin(2.0 * np.pi * (canon @ np.array([3.0, 5.0, 7.0])))
    image = np.zeros(hits.t.shape + (3,))
    for mid, m in enumerate(meshes):
        sel = hits.mesh == mid
        tone = _BASE_TONE[m.hand][None, :] * (1.0 + ripple[sel][:, None])
        image[sel] = np.clip(tone * lit[sel][:, None], 0.0, 1.0)

    masks = np.stack([(hits.mesh == 0), (hits.mesh == 1)]).astype(np.float64)
    corr = np.zeros((2, 3) + hits.t.shape)
    for mid in range(len(meshes)):
        sel = hits.mesh == mid
        corr[mid, :, sel] = np.clip(canon[sel], 0.0, 1.0)
    return image.transpose(2, 0, 1), hit_mask.astype(np.float64), masks, corr


def scene_cameras(cfg: DataSection, split: str, index: int, center, radius: float):
    cams = []
    for k in range(cfg.n_cameras):
        az = 360.0 * float(hash_u01(cfg.seed, _SPLIT_TAG[split], index, k, STREAM_CAMS, 0))
        el = cfg.elevation_lo + (cfg.elevation_hi - cfg.elevation_lo) * float(
            hash_u01(cfg.seed, _SPLIT_TAG[split], index, k, STREAM_CAMS, 1)
        )
        cams.append(
            view_sphere_camera(center, radius, az, el, cfg.image_size, fov_deg=cfg.fov_deg)
        )
    return cams


def _touching_flags(n: int, fraction: float) -> list[bool]:
    # evenly interleaved quota: floor((i+1)f) - floor(if) marks touching scenes
    return [int((i + 1) * fraction) - int(i * fraction) == 1 for i in range(n)]


def synth_dataset(cfg: DataSection) -> dict:
    """Writes the dataset tree under cfg.root and returns the manifest dict."""
    root = Path(cfg.root)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "image_size": cfg.image_size,
        "n_cameras": cfg.n_cameras,
        "seed": cfg.seed,
        "splits": {"train": cfg.n_train, "test": cfg.n_test},
        "scenes": [],
    }
    for split, count in (("train", cfg.n_train), ("test", cfg.n_test)):
        touching = _touching_flags(count, cfg.touching_fraction)
        for i in range(count):
            scene = make_scene(
                make_rng(cfg.seed, _SPLIT_TAG[split], i), touching=touching[i]
            )
            rel = Path(split) / f"scene_{i:03d}"
            sdir = root / rel
            sdir.mkdir(parents=True, exist_ok=True)
            write_obj(sdir / "left.obj", scene.left)
            write_obj(sdir / "right.obj", scene.right)
            write_pose_json(sdir / "poses.json", scene.pose_left, scene.pose_right)

            scale = scene_scale(scene.meshes)
            cams = scene_cameras(cfg, split, i, scene.center(), cfg.radius_factor * scale)
            write_cameras_json(sdir / "cameras.json", cams)
            for k, cam in enumerate(cams):
                image, sil, masks, corr = shade_views(scene.meshes, cam)
                # writers quantize to 8 bits themselves; hand them [0, 1] floats
                write_ppm(sdir / f"view_{k:02d}.ppm", image.transpose(1, 2, 0))
                write_pgm(sdir / f"sil_{k:02d}.pgm", sil)
                for hid, hand in enumerate(("left", "right")):
                    write_pgm(sdir / f"mask_{k:02d}_{hand}.pgm", masks[hid])
                    write_ppm(sdir / f"corr_{k:02d}_{hand}.ppm",
                              corr[hid].transpose(1, 2, 0))
            manifest["scenes"].append(
                {
                    "split": split,
                    "index": i,
                    "dir": str(rel),
                    "touching": bool(touching[i]),
                    "scale": scale,
                }
            )
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


@dataclass
class SceneViews:
    """One scene with everything its views need, loaded from disk."""

    scene_id: str
    meshes: tuple[TriMesh, TriMesh]
    cameras: list[Camera]
    images: np.ndarray        # (K, 3, H, W) in [0, 1]
    silhouettes: np.ndarray   # (K, H, W) binary
    masks: np.ndarray         # (K, 2, H, W) binary
    corr: np.ndarray          # (K, 6, H, W): left 3ch then right 3ch

    def yaw_between(self, k_in: int, k_tgt: int) -> float:
        return relative_yaw_deg(self.cameras[k_in], self.cameras[k_tgt])


@dataclass
class SceneSample:
    """One (input view, target view) training pair."""

    scene_id: str
    meshes: tuple[TriMesh, TriMesh]
    input_camera: Camera
    input_image: np.ndarray
    input_masks: np.ndarray
    input_corr: np.ndarray
    target_camera: Camera
    target_image: np.ndarray
    target_silhouette: np.ndarray
    target_corr: np.ndarray
    yaw_deg: float


def load_scene(root, split: str, index: int) -> SceneViews:
    sdir = Path(root) / split / f"scene_{index:03d}"
    if not sdir.is_dir():
        raise ValidationError(f"scene directory {sdir} does not exist")
    pose_left, pose_right = read_pose_json(sdir / "poses.json")
    meshes = (
        generate_hand_proxy(pose_left, "left"),
        generate_hand_proxy(pose_right, "right"),
    )
    cameras = read_cameras_json(sdir / "cameras.json")
    images, sils, masks, corrs = [], [], [], []
    for k in range(len(cameras)):
        # readers already scale 8-bit payloads to [0, 1]
        images.append(read_ppm(sdir / f"view_{k:02d}.ppm").transpose(2, 0, 1))
        sils.append((read_pgm(sdir / f"sil_{k:02d}.pgm") > 0.5).astype(np.float64))
        masks.append(
            np.stack(
                [
                    (read_pgm(sdir / f"mask_{k:02d}_{hand}.pgm") > 0.5).astype(np.float64)
                    for hand in ("left", "right")
                ]
            )
        )
        corrs.append(
            np.concatenate(
                [
                    read_ppm(sdir / f"corr_{k:02d}_{hand}.ppm").transpose(2, 0, 1)
                    for hand in ("left", "right")
                ]
            )
        )
    return SceneViews(
        scene_id=f"{split}/scene_{index:03d}",
        meshes=meshes,
        cameras=cameras,
        images=np.stack(images),
        silhouettes=np.stack(sils),
        masks=np.stack(masks),
        corr=np.stack(corrs),
    )


def make_sample(views: SceneViews, k_in: int, k_tgt: int) -> SceneSample:
    return SceneSample(
        scene_id=views.scene_id,
        meshes=views.meshes,
        input_camera=views.cameras[k_in],
        input_image=views.images[k_in],
        input_masks=views.masks[k_in],
        input_corr=views.corr[k_in],
        target_camera=views.cameras[k_tgt],
        target_image=views.images[k_tgt],
        target_silhouette=views.silhouettes[k_tgt],
        target_corr=views.corr[k_tgt],
        yaw_deg=views.yaw_between(k_in, k_tgt),
    )


def load_manifest(root) -> dict:
    path = Path(root) / "manifest.json"
    if not path.is_file():
        raise ValidationError(f"no manifest at {path}; run synth first")
    return json.loads(path.read_text())
