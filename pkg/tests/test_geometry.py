import json

import numpy as np
import pytest

from vanf.errors import ValidationError
from vanf.geometry import (
    Camera,
    HandPose,
    Scene,
    TriMesh,
    generate_hand_proxy,
    make_scene,
    mirrored_vertex,
    nearest_vertex,
    random_pose,
    scene_scale,
)
from vanf.geometry.camera import (
    look_at,
    read_cameras_json,
    relative_yaw_deg,
    view_sphere_camera,
    write_cameras_json,
)
from vanf.geometry.hand import icosphere, read_pose_json, write_pose_json
from vanf.geometry.mesh import read_obj, write_obj
from vanf.rng import make_rng


def test_proxy_is_watertight_and_bounded():
    mesh = generate_hand_proxy(HandPose.rest(), "right")
    assert mesh.is_watertight()
    assert mesh.vertices.shape[0] <= 2000
    assert mesh.signed_volume() > 0
    assert mesh.min_face_area() > 1e-12


def test_proxy_watertight_across_random_poses():
    rng = make_rng(101)
    for _ in range(10):
        mesh = generate_hand_proxy(random_pose(rng), "left")
        assert mesh.is_watertight()
        assert mesh.signed_volume() > 0
        assert mesh.min_face_area() > 1e-12


def test_proxy_deterministic():
    pose = random_pose(make_rng(5))
    a = generate_hand_proxy(pose, "right")
    b = generate_hand_proxy(pose, "right")
    assert np.array_equal(a.vertices, b.vertices)
    assert np.array_equal(a.faces, b.faces)


def test_left_is_exact_mirror_of_right():
    pose = random_pose(make_rng(9))
    right = generate_hand_proxy(pose, "right")
    left = generate_hand_proxy(pose, "left")
    np.testing.assert_array_equal(left.vertices, right.vertices * np.array([-1.0, 1.0, 1.0]))
    # winding flip preserves orientation under reflection
    assert left.signed_volume() > 0
    np.testing.assert_array_equal(left.canonical_coords, right.canonical_coords)


def test_canonical_coords_in_unit_cube():
    mesh = generate_hand_proxy(HandPose.rest(), "right")
    assert mesh.canonical_coords.min() >= 0.0
    assert mesh.canonical_coords.max() <= 1.0


def test_icosphere_watertight_and_round():
    sph = icosphere(2, 1.5, np.array([1.0, 2.0, 3.0]))
    assert sph.is_watertight()
    r = np.linalg.norm(sph.vertices - np.array([1.0, 2.0, 3.0]), axis=1)
    np.testing.assert_allclose(r, 1.5, atol=1e-12)


# ---------------------------------------------------------------- scenes


def test_make_scene_deterministic():
    a = make_scene(make_rng(77, 3), touching=True)
    b = make_scene(make_rng(77, 3), touching=True)
    assert np.array_equal(a.left.vertices, b.left.vertices)
    assert np.array_equal(a.right.vertices, b.right.vertices)


def test_touching_scenes_are_closer():
    rng = make_rng(42)
    touch = [make_scene(rng, touching=True).min_gap for _ in range(3)]
    apart = [make_scene(rng, touching=False).min_gap for _ in range(3)]
    assert max(touch) < min(apart)
    assert all(g < 0.05 * 2.5 for g in touch)


def test_scene_mesh_matches_regenerated_pose():
    scene = make_scene(make_rng(8), touching=True)
    re_left = generate_hand_proxy(scene.pose_left, "left")
    re_right = generate_hand_proxy(scene.pose_right, "right")
    np.testing.assert_array_equal(scene.left.vertices, re_left.vertices)
    np.testing.assert_array_equal(scene.right.vertices, re_right.vertices)


def test_nearest_vertex_matches_linear_scan():
    scene = make_scene(make_rng(13), touching=True)
    rng = make_rng(13, 99)
    pts = scene.center() + rng.normal(size=(200, 3))
    mesh_id, idx = nearest_vertex(pts, scene.meshes)
    allv = np.concatenate([scene.left.vertices, scene.right.vertices])
    n_left = scene.left.vertices.shape[0]
    for k in range(pts.shape[0]):
        d = np.linalg.norm(allv - pts[k], axis=1)
        j = int(np.argmin(d))  # argmin already takes the first minimum
        assert (mesh_id[k], idx[k]) == (j >= n_left, j - n_left if j >= n_left else j)


def test_nearest_vertex_tie_prefers_lower_mesh():
    tri = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    faces = np.array([[0, 1, 2]])
    canon = np.zeros((3, 3))
    a = TriMesh(tri, faces, canon, hand="left")
    b = TriMesh(tri.copy(), faces.copy(), canon.copy(), hand="right")  # identical position
    mesh_id, idx = nearest_vertex(np.array([[0.0, 0.0, 0.5]]), [a, b])
    assert mesh_id[0] == 0 and idx[0] == 0


def test_mirrored_vertex_is_involution():
    mesh_id = np.array([0, 1, 0])
    idx = np.array([3, 7, 100])
    m2, i2 = mirrored_vertex(mesh_id, idx)
    m3, i3 = mirrored_vertex(m2, i2)
    assert np.array_equal(m3, mesh_id) and np.array_equal(i3, idx)
    assert np.array_equal(m2, 1 - mesh_id) and np.array_equal(i2, idx)


# ---------------------------------------------------------------- cameras


def test_project_ray_round_trip():
    cam = view_sphere_camera(np.array([0.3, -0.2, 0.1]), 4.0, 35.0, 10.0, 64)
    rng = make_rng(21)
    u = rng.uniform(0, 63, size=50)
    v = rng.uniform(0, 63, size=50)
    origins, dirs = cam.ray(u, v)
    pts = origins + dirs * rng.uniform(1.0, 6.0, size=(50, 1))
    uv, depth = cam.project(pts)
    np.testing.assert_allclose(uv[:, 0], u, atol=1e-9)
    np.testing.assert_allclose(uv[:, 1], v, atol=1e-9)
    assert (depth > 0).all()


def test_project_behind_camera_is_nan():
    cam = view_sphere_camera(np.zeros(3), 3.0, 0.0, 0.0, 32)
    behind = cam.eye[None, :] + cam.forward[None, :] * -1.0
    uv, depth = cam.project(behind)
    assert np.isnan(uv).all() and depth[0] < 0


def test_look_at_rows_orthonormal():
    rot = look_at(np.array([1.0, 2.0, 3.0]), np.zeros(3))
    np.testing.assert_allclose(rot @ rot.T, np.eye(3), atol=1e-12)
    fwd = rot[2]
    np.testing.assert_allclose(fwd, -np.array([1.0, 2.0, 3.0]) / np.sqrt(14.0), atol=1e-12)


def test_relative_yaw_wraps():
    a = view_sphere_camera(np.zeros(3), 3.0, 10.0, 0.0, 16)
    b = view_sphere_camera(np.zeros(3), 3.0, 350.0, 0.0, 16)
    assert relative_yaw_deg(a, b) == pytest.approx(20.0)
    c = view_sphere_camera(np.zeros(3), 3.0, 200.0, 0.0, 16)
    assert relative_yaw_deg(a, c) == pytest.approx(170.0)


def test_camera_json_round_trip(tmp_path):
    cams = [
        view_sphere_camera(np.array([0.1, 0.2, 0.3]), 4.0, az, 12.0, 64)
        for az in (0.0, 120.0, 240.0)
    ]
    path = tmp_path / "cams.json"
    write_cameras_json(path, cams)
    back = read_cameras_json(path)
    assert len(back) == 3
    for a, b in zip(cams, back):
        np.testing.assert_array_equal(a.rotation, b.rotation)
        np.testing.assert_array_equal(a.eye, b.eye)
        assert (a.fx, a.fy, a.cx, a.cy, a.width, a.height) == (b.fx, b.fy, b.cx, b.cy, b.width, b.height)


def test_camera_rejects_bad_rotation():
    with pytest.raises(ValidationError):
        Camera(rotation=np.eye(3) * 2.0, eye=np.zeros(3), fx=10, fy=10, cx=1, cy=1, width=4, height=4)


# ---------------------------------------------------------------- serialization


def test_obj_round_trip(tmp_path):
    mesh = generate_hand_proxy(random_pose(make_rng(3)), "right")
    path = tmp_path / "hand.obj"
    write_obj(path, mesh)
    verts, faces = read_obj(path)
    np.testing.assert_allclose(verts, mesh.vertices, rtol=0, atol=1e-13)
    np.testing.assert_array_equal(faces, mesh.faces)


def test_pose_json_round_trip(tmp_path):
    left = random_pose(make_rng(1))
    right = random_pose(make_rng(2))
    path = tmp_path / "pose.json"
    write_pose_json(path, left, right)
    l2, r2 = read_pose_json(path)
    np.testing.assert_array_equal(l2.curl, left.curl)
    np.testing.assert_array_equal(r2.rotation, right.rotation)
    np.testing.assert_array_equal(r2.translation, right.translation)
    with open(path) as fh:
        json.load(fh)  # stays plain JSON


def test_pose_rejects_out_of_range_curl():
    with pytest.raises(ValidationError):
        HandPose(
            curl=np.full((5, 2), 3.0),
            spread=np.zeros(5),
            rotation=np.eye(3),
            translation=np.zeros(3),
        )


def test_scene_scale_is_union_diagonal():
    sph = icosphere(1, 1.0, np.zeros(3))
    far = sph.translated(np.array([10.0, 0.0, 0.0]))
    scale = scene_scale([sph, far])
    assert scale == pytest.approx(np.sqrt(12.0**2 + 2.0**2 + 2.0**2), rel=1e-12)
