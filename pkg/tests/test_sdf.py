import numpy as np
import pytest

from vanf import autodiff as ad
from vanf.autodiff import Tensor, grad_check
from vanf.errors import ValidationError
from vanf.geometry import make_scene, scene_scale
from vanf.geometry.hand import icosphere
from vanf.geometry.mesh import TriMesh
from vanf.rng import make_rng
from vanf.sdf import W_FLOOR, DensityParams, density, signed_distance, solve_w_raw
from vanf.visibility import build_bvh
from vanf.visibility.bvh import PARITY_DIRECTIONS


def unit_cube() -> TriMesh:
    bits = [(x, y, z) for x in (0, 1) for y in (0, 1) for z in (0, 1)]
    verts = np.array(bits, dtype=np.float64) - 0.5
    faces = np.array(
        [
            [4, 6, 7], [4, 7, 5],  # +x
            [0, 1, 3], [0, 3, 2],  # -x
            [2, 3, 7], [2, 7, 6],  # +y
            [0, 4, 5], [0, 5, 1],  # -y
            [1, 5, 7], [1, 7, 3],  # +z
            [0, 2, 6], [0, 6, 4],  # -z
        ],
        dtype=np.int64,
    )
    return TriMesh(verts, faces, canonical_coords=np.zeros((8, 3)))


def _np_point_tri_d2(p: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Plane projection + three point-segment distances; an algorithm
    deliberately different from the library's closest-point decomposition."""
    v0, v1, v2 = tris[:, 0:3], tris[:, 3:6], tris[:, 6:9]
    n = np.cross(v1 - v0, v2 - v0)
    nn = (n * n).sum(1)
    w = p - v0
    # signed areas give barycentric signs of the projected point
    s0 = np.einsum("ij,ij->i", np.cross(v1 - v0, p - v0), n)
    s1 = np.einsum("ij,ij->i", np.cross(v2 - v1, p - v1), n)
    s2 = np.einsum("ij,ij->i", np.cross(v0 - v2, p - v2), n)
    inside = (s0 >= 0) & (s1 >= 0) & (s2 >= 0)
    plane_d2 = np.einsum("ij,ij->i", w, n) ** 2 / nn

    def seg_d2(a, b):
        ab = b - a
        tt = np.clip(np.einsum("ij,ij->i", p - a, ab) / (ab * ab).sum(1), 0.0, 1.0)
        diff = a + tt[:, None] * ab - p
        return (diff * diff).sum(1)

    edge_d2 = np.minimum(seg_d2(v0, v1), np.minimum(seg_d2(v1, v2), seg_d2(v2, v0)))
    return np.where(inside, plane_d2, edge_d2)


def _np_parity_inside(points: np.ndarray, tris: np.ndarray, tri_mesh: np.ndarray) -> np.ndarray:
    v0 = tris[:, 0:3]
    e1 = tris[:, 3:6] - v0
    e2 = tris[:, 6:9] - v0
    votes = np.zeros((points.shape[0], 2), dtype=np.int64)
    for d in PARITY_DIRECTIONS:
        h = np.cross(np.broadcast_to(d, e2.shape), e2)
        a = np.einsum("ij,ij->i", e1, h)
        ok = np.abs(a) >= 1e-12
        f = np.where(ok, 1.0 / np.where(ok, a, 1.0), 0.0)
        q_cross = None
        for k, p in enumerate(points):
            s = p - v0
            u = f * np.einsum("ij,ij->i", s, h)
            q = np.cross(s, e1)
            v = f * (q @ d)
            t = f * np.einsum("ij,ij->i", q, e2)
            valid = ok & (u >= 0) & (u <= 1) & (v >= 0) & (u + v <= 1) & (t > 0)
            for m in (0, 1):
                votes[k, m] += int(valid[tri_mesh == m].sum()) & 1
    return (votes >= 2).any(axis=1)


# ---------------------------------------------------------------- signed distance


def test_cube_center_and_face_points():
    cube = unit_cube()
    assert cube.is_watertight() and cube.signed_volume() > 0
    s = signed_distance([cube], np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0]]))
    assert s[0] == -0.5
    assert s[1] == 0.5


def test_signed_distance_matches_independent_oracle():
    scene = make_scene(make_rng(55), touching=True)
    bvh = build_bvh(scene.meshes)
    rng = make_rng(55, 1)
    pts = scene.center() + rng.normal(size=(1_000, 3)) * 0.8
    got = signed_distance(bvh, pts)

    ref_mag = np.empty(pts.shape[0])
    for k, p in enumerate(pts):
        ref_mag[k] = np.sqrt(_np_point_tri_d2(p, bvh.tris).min())
    np.testing.assert_allclose(np.abs(got), ref_mag, rtol=1e-9, atol=1e-12)

    ref_inside = _np_parity_inside(pts[:200], bvh.tris, bvh.tri_mesh)
    np.testing.assert_array_equal(got[:200] < 0, ref_inside)


def test_surface_vertices_have_near_zero_distance():
    scene = make_scene(make_rng(56), touching=False)
    verts = np.concatenate([m.vertices for m in scene.meshes])
    s = signed_distance(scene.meshes, verts)
    assert np.abs(s).max() < 1e-6 * scene_scale(scene.meshes)


def test_sphere_sign_flips_across_surface():
    sph = icosphere(3, 0.5, np.zeros(3))
    bvh = build_bvh([sph])
    normals = sph.vertices / np.linalg.norm(sph.vertices, axis=1, keepdims=True)
    inside = signed_distance(bvh, sph.vertices - 0.01 * normals)
    outside = signed_distance(bvh, sph.vertices + 0.01 * normals)
    assert (inside < 0).all() and (outside > 0).all()


# ---------------------------------------------------------------- density


def test_density_at_zero_is_half_over_w():
    p = DensityParams.from_w(0.1)
    sigma = density(np.array([0.0]), Tensor(np.array([0.0])), p)
    assert sigma.data[0] == 5.0  # bitwise: 0.5 / 0.1 is exact in binary64


def test_density_limits():
    p = DensityParams.from_w(0.1)
    lo = density(np.array([1e3]), Tensor(np.array([0.0])), p)
    hi = density(np.array([-1e3]), Tensor(np.array([0.0])), p)
    assert lo.data[0] == 0.0
    assert hi.data[0] == pytest.approx(10.0, rel=1e-12)


def test_density_value_matches_extended_precision():
    p = DensityParams.from_w(0.1)
    sigma = density(np.array([-0.2]), Tensor(np.array([0.0])), p).data[0]
    x = np.float128(2.0)
    ref = np.float64(np.float128(10.0) / (np.float128(1.0) + np.exp(-x)))
    assert abs(sigma - ref) <= 2 * np.spacing(ref)


def test_density_strictly_decreasing_and_bounded():
    p = DensityParams.from_w(0.17)
    grid = np.linspace(-2.0, 2.0, 100)
    sigma = density(grid, Tensor(np.zeros(100)), p).data
    assert (np.diff(sigma) < 0).all()
    assert (sigma > 0).all() and (sigma < 1.0 / 0.17).all()


def test_density_gradients_match_fd():
    raw = solve_w_raw(0.1)

    def f(s, delta, w_raw):
        return ad.sum_(density(s, delta, DensityParams(w_raw=w_raw)))

    rep = grad_check(
        f,
        [np.array([0.03, -0.05, 0.2]), np.array([0.01, 0.0, -0.02]), np.asarray(raw)],
        h=1e-5,
        tol=1e-4,
    )
    assert rep.ok, rep.per_input


def test_w_raw_round_trip_and_floor():
    for w in (0.05, 0.1, 0.3, 1.0):
        raw = solve_w_raw(w)
        p = DensityParams(w_raw=Tensor(np.asarray(raw)))
        assert p.w().data == pytest.approx(w, rel=1e-15)
    assert solve_w_raw(0.1) == pytest.approx(-2.2532, rel=1e-4)
    with pytest.raises(ValidationError):
        solve_w_raw(W_FLOOR)


def test_w_stays_positive_for_extreme_raw():
    p = DensityParams(w_raw=Tensor(np.asarray(-200.0)))
    assert p.w().data == pytest.approx(W_FLOOR, rel=1e-9)
    sigma = density(np.array([0.0]), Tensor(np.array([0.0])), p)
    assert np.isfinite(sigma.data).all()
