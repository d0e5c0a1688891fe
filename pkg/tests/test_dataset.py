"""Dataset generation: determinism, silhouette consistency, loader fidelity."""

import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from vanf.config import DataSection
from vanf.dataset import (
    _touching_flags,
    load_manifest,
    load_scene,
    make_sample,
    scene_cameras,
    synth_dataset,
)
from vanf.visibility.bvh import build_bvh
from vanf.image_io import read_pgm, read_ppm
from vanf.visibility.maps import rasterize_hits, rasterize_silhouette


def _tiny_cfg(root) -> DataSection:
    return DataSection(root=str(root), n_train=2, n_test=1, image_size=32, n_cameras=3)


def _tree_digest(root: Path) -> dict:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    cfg = _tiny_cfg(root)
    manifest = synth_dataset(cfg)
    return cfg, root, manifest


def test_resynthesis_is_byte_identical(dataset, tmp_path):
    cfg, root, _ = dataset
    cfg2 = DataSection(root=str(tmp_path / "again"), n_train=cfg.n_train, n_test=cfg.n_test,
                       image_size=cfg.image_size, n_cameras=cfg.n_cameras)
    synth_dataset(cfg2)
    assert _tree_digest(root) == _tree_digest(Path(cfg2.root))


def test_manifest_counts_and_files(dataset):
    cfg, root, manifest = dataset
    assert manifest["splits"] == {"train": 2, "test": 1}
    assert len(manifest["scenes"]) == 3
    on_disk = load_manifest(root)
    assert on_disk == manifest
    scene_dir = root / manifest["scenes"][0]["dir"]
    names = {p.name for p in scene_dir.iterdir()}
    assert {"left.obj", "right.obj", "poses.json", "cameras.json"} <= names
    for k in range(cfg.n_cameras):
        assert f"view_{k:02d}.ppm" in names
        assert f"sil_{k:02d}.pgm" in names
        assert f"mask_{k:02d}_left.pgm" in names
        assert f"corr_{k:02d}_right.ppm" in names


def test_silhouette_files_match_rasterizer(dataset):
    cfg, root, manifest = dataset
    views = load_scene(root, "train", 0)
    for k, cam in enumerate(views.cameras):
        expected = rasterize_silhouette(list(views.meshes), cam)
        stored = read_pgm(root / manifest["scenes"][0]["dir"] / f"sil_{k:02d}.pgm")
        assert np.array_equal(stored > 0.5, expected > 0.5)
        assert np.array_equal(views.silhouettes[k], expected)


def test_loader_round_trip(dataset):
    cfg, root, _ = dataset
    views = load_scene(root, "test", 0)
    assert views.images.shape == (3, 3, 32, 32)
    assert views.masks.shape == (3, 2, 32, 32)
    assert views.corr.shape == (3, 6, 32, 32)
    assert set(np.unique(views.silhouettes)) <= {0.0, 1.0}
    # masks partition the silhouette: exactly one hand per foreground pixel
    union = views.masks.sum(axis=1)
    assert np.array_equal(union > 0, views.silhouettes > 0)
    assert union.max() <= 1.0
    # regenerated meshes rasterize to the stored silhouettes
    sil = rasterize_silhouette(list(views.meshes), views.cameras[0])
    assert np.array_equal(sil > 0.5, views.silhouettes[0] > 0.5)


def test_images_quantize_to_stored_bytes(dataset):
    cfg, root, manifest = dataset
    views = load_scene(root, "train", 1)
    raw = read_ppm(root / manifest["scenes"][1]["dir"] / "view_00.ppm")
    assert np.array_equal(views.images[0], raw.transpose(2, 0, 1))
    assert views.images.min() >= 0.0 and views.images.max() <= 1.0
    # 8-bit payloads: every value is k/255
    scaled = views.images * 255.0
    assert np.allclose(scaled, np.rint(scaled), atol=1e-9)


def test_touching_quota_interleaves():
    flags = _touching_flags(8, 0.5)
    assert sum(flags) == 4
    assert flags == [False, True, False, True, False, True, False, True]
    assert sum(_touching_flags(10, 0.3)) == 3
    assert sum(_touching_flags(5, 0.0)) == 0
    assert sum(_touching_flags(5, 1.0)) == 5


def test_correspondence_matches_barycentric_oracle(dataset):
    cfg, root, _ = dataset
    views = load_scene(root, "train", 0)
    cam = views.cameras[0]
    bvh = build_bvh(list(views.meshes))
    origins, dirs = cam.pixel_grid()
    hits = bvh.first_hit(origins, dirs).reshape((cfg.image_size, cfg.image_size))
    counts = [m.faces.shape[0] for m in views.meshes]
    checked = 0
    for py in range(cfg.image_size):
        for px in range(cfg.image_size):
            mid = hits.mesh[py, px]
            if mid < 0:
                continue
            mesh = views.meshes[mid]
            tri = hits.tri[py, px] - (0 if mid == 0 else counts[0])
            u, v = hits.u[py, px], hits.v[py, px]
            f = mesh.faces[tri]
            canon = (
                (1.0 - u - v) * mesh.canonical_coords[f[0]]
                + u * mesh.canonical_coords[f[1]]
                + v * mesh.canonical_coords[f[2]]
            )
            stored = views.corr[0, 3 * mid : 3 * mid + 3, py, px]
            assert np.abs(stored - np.clip(canon, 0.0, 1.0)).max() <= 0.5 / 255.0 + 1e-12
            checked += 1
    assert checked > 20


def test_make_sample_fields_and_yaw(dataset):
    cfg, root, _ = dataset
    views = load_scene(root, "train", 0)
    s = make_sample(views, 0, 2)
    assert s.input_image.shape == (3, 32, 32)
    assert s.target_silhouette.shape == (32, 32)
    assert s.input_corr.shape == (6, 32, 32)
    assert s.yaw_deg == views.yaw_between(0, 2)
    assert 0.0 <= s.yaw_deg <= 180.0
    assert make_sample(views, 1, 1).yaw_deg == 0.0


def test_cameras_depend_on_split_and_index(dataset):
    cfg, _, _ = dataset
    center = np.zeros(3)
    a = scene_cameras(cfg, "train", 0, center, 2.0)
    b = scene_cameras(cfg, "train", 1, center, 2.0)
    c = scene_cameras(cfg, "test", 0, center, 2.0)
    assert not np.allclose(a[0].eye, b[0].eye)
    assert not np.allclose(a[0].eye, c[0].eye)
    a2 = scene_cameras(cfg, "train", 0, center, 2.0)
    assert np.array_equal(a[0].eye, a2[0].eye)
