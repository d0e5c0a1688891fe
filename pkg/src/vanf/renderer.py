"""Volume rendering of the learned field along target-view rays.

The field is evaluated per sample point: explicit signed distance plus a
learned deviation gives density, and the fused texture feature drives color.
Sampling is coarse-to-fine. All per-pixel randomness comes from counter
hashes keyed on (seed, pixel, stream, index), so a patch render and the same
region of a full-image render draw identical numbers and produce identical
bytes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ValidationError
from .geometry.camera import MIN_DEPTH, Camera
from .geometry.mesh import HAND_NAMES, TriMesh, union_aabb
from .geometry.scene import mirrored_vertex, nearest_vertex
from .networks.encoders import FeatureMaps, encode
from .networks.fusion import FusionInput, fuse, positional_encode
from .networks.model import Generator
from .rng import STREAM_COARSE, STREAM_FINE, hash_u01
from .sdf import density, signed_distance
from .visibility.bvh import Bvh, build_bvh
from .visibility.maps import point_visibility, surface_offset

BOX_INFLATE = 0.10
DELTA_MAX_FACTOR = 0.05


@dataclass
class RenderConfig:
    n_coarse: int = 16
    n_fine: int = 32
    patch_size: int = 32
    background: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if self.n_coarse < 2 or self.n_fine < 0:
            raise ValidationError("need n_coarse >= 2 and n_fine >= 0")


@dataclass
class ScenePack:
    """Static per-(scene, input view) data shared by every render call."""

    meshes: list
    hand_ids: np.ndarray        # local mesh index -> 0 (left) / 1 (right)
    bvh: Bvh
    input_camera: Camera
    input_image: np.ndarray     # (3, H, W)
    input_masks: np.ndarray     # (2, H, W), excluded hand's mask zeroed
    vertices: np.ndarray        # concatenated (V, 3)
    offsets: np.ndarray         # flat start per local mesh
    vert_uv: np.ndarray         # (V, 2) input-view map coordinates
    vert_valid: np.ndarray      # (V,) in front of the input camera
    vert_vis: np.ndarray        # (V,) input-view visibility
    box_min: np.ndarray
    box_max: np.ndarray
    scale: float

    @property
    def has_mirror(self) -> bool:
        return len(self.meshes) == 2

    @property
    def delta_max(self) -> float:
        return DELTA_MAX_FACTOR * self.scale


def _map_uv(uv: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Full-resolution pixel coords -> quarter-scale feature-map coords."""
    safe = np.where(valid[:, None], uv, 0.0)
    return (safe - 1.5) / 4.0


def make_scene_pack(
    meshes: Sequence[TriMesh],
    input_camera: Camera,
    input_image: np.ndarray,
    input_masks: np.ndarray,
    exclude_hand: str | None = None,
) -> ScenePack:
    """input_masks rows are (left, right) regardless of exclusion."""
    meshes = list(meshes)
    masks = np.asarray(input_masks, dtype=np.float64).copy()
    if exclude_hand is not None:
        if exclude_hand not in HAND_NAMES:
            raise ValidationError(f"exclude_hand must be one of {HAND_NAMES}")
        meshes = [m for m in meshes if m.hand != exclude_hand]
        masks[HAND_NAMES.index(exclude_hand)] = 0.0
    if not meshes:
        raise ValidationError("scene pack needs at least one mesh")

    bvh = build_bvh(meshes)
    verts = np.concatenate([m.vertices for m in meshes])
    counts = [m.vertices.shape[0] for m in meshes]
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
    uv, depth = input_camera.project(verts)
    valid = depth > MIN_DEPTH
    vis = point_visibility(bvh, verts, input_camera, surface_offset(bvh))
    box_min, box_max = union_aabb(meshes)
    return ScenePack(
        meshes=meshes,
        hand_ids=np.array([HAND_NAMES.index(m.hand) for m in meshes], dtype=np.int64),
        bvh=bvh,
        input_camera=input_camera,
        input_image=np.asarray(input_image, dtype=np.float64),
        input_masks=masks,
        vertices=verts,
        offsets=offsets,
        vert_uv=_map_uv(uv, valid),
        vert_valid=valid,
        vert_vis=vis,
        box_min=box_min,
        box_max=box_max,
        scale=float(np.linalg.norm(box_max - box_min)),
    )


def encode_input(gen: Generator, pack: ScenePack) -> FeatureMaps:
    return encode(gen.texture_encoder, gen.geometry_encoder, pack.input_image, pack.input_masks)


def ray_bounds(pack: ScenePack, origins: np.ndarray, dirs: np.ndarray):
    """Entry/exit of each ray with the 10%-inflated scene box.

    Rays that miss get (1, 1): a degenerate interval whose quadrature steps
    are all zero, so they composite to the exact background color.
    """
    center = 0.5 * (pack.box_min + pack.box_max)
    half = 0.5 * (pack.box_max - pack.box_min) * (1.0 + BOX_INFLATE)
    lo, hi = center - half, center + half
    d = np.where(dirs == 0.0, 1e-300, dirs)
    t1 = (lo[None, :] - origins) / d
    t2 = (hi[None, :] - origins) / d
    tn = np.minimum(t1, t2).max(axis=1)
    tf = np.maximum(t1, t2).min(axis=1)
    tn = np.maximum(tn, MIN_DEPTH)
    valid = tf > tn
    return np.where(valid, tn, 1.0), np.where(valid, tf, 1.0), valid


def sample_coarse(t_near, t_far, n: int, u01=None) -> np.ndarray:
    """Stratified samples, one per equal bin; u01 None -> bin midpoints."""
    r = t_near.shape[0]
    if u01 is None:
        u01 = np.full((r, n), 0.5)
    if u01.shape != (r, n):
        raise ValidationError(f"jitter shape {u01.shape} != {(r, n)}")
    i = np.arange(n)
    return t_near[:, None] + (i[None, :] + u01) / n * (t_far - t_near)[:, None]


def sample_fine(t_coarse: np.ndarray, weights: np.ndarray, u01: np.ndarray) -> np.ndarray:
    """Inverse-CDF draws from the piecewise-constant coarse weight profile.

    Intervals are the gaps between consecutive coarse samples; interval i
    carries the weight of its left sample. Rays whose weights are all tiny
    fall back to uniform over the full coarse span.
    """
    r, s = t_coarse.shape
    n_fine = u01.shape[1]
    out = np.empty((r, n_fine))
    for k in range(r):
        w = weights[k, : s - 1].copy()
        total = w.sum()
        if total <= 1e-8:
            out[k] = t_coarse[k, 0] + u01[k] * (t_coarse[k, -1] - t_coarse[k, 0])
            continue
        cdf = np.cumsum(w) / total
        j = np.searchsorted(cdf, u01[k], side="right")
        j = np.minimum(j, s - 2)
        cdf_lo = np.where(j > 0, cdf[np.maximum(j - 1, 0)], 0.0)
        span = cdf[j] - cdf_lo
        frac = np.where(span > 0, (u01[k] - cdf_lo) / np.where(span > 0, span, 1.0), 0.5)
        out[k] = t_coarse[k, j] + frac * (t_coarse[k, j + 1] - t_coarse[k, j])
    return out


def compute_field(
    gen: Generator, pack: ScenePack, fm: FeatureMaps, positions: np.ndarray, view_dirs: np.ndarray
):
    """Field evaluation at (M, 3) points: returns (sigma (M,), rgb (M, 3))."""
    m = positions.shape[0]
    s_vals = signed_distance(pack.bvh, positions)

    mid, idx = nearest_vertex(positions, pack.meshes)
    flat = pack.offsets[mid] + idx
    near_uv = pack.vert_uv[flat]
    near_valid = pack.vert_valid[flat]
    near_vis = pack.vert_vis[flat]

    if pack.has_mirror:
        mmid, midx = mirrored_vertex(mid, idx)
        mflat = pack.offsets[mmid] + midx
        mirror_uv = pack.vert_uv[mflat]
        mirror_valid = pack.vert_valid[mflat]
        mirror_vis = pack.vert_vis[mflat]
    else:
        mirror_uv = np.zeros((m, 2))
        mirror_valid = np.zeros(m, dtype=bool)
        mirror_vis = np.zeros(m)

    uv_q, depth_q = pack.input_camera.project(positions)
    q_valid = depth_q > MIN_DEPTH
    q_uv = _map_uv(uv_q, q_valid)
    v_q = point_visibility(pack.bvh, positions, pack.input_camera, 0.0)

    use_near = 1.0 if gen.use_nearest else 0.0
    use_mirror = 1.0 if gen.use_mirrored else 0.0
    gate_q = q_valid.astype(np.float64)[:, None]
    gate_near = use_near * near_valid.astype(np.float64)[:, None]
    gate_mirror = use_mirror * mirror_valid.astype(np.float64)[:, None]

    tex_map = ad.getitem(fm.texture_map, 0)
    geo_map = ad.getitem(fm.geometry_map, 0)

    def sample(map_t, uv, gate):
        return ad.mul(ad.bilinear_sample(map_t, uv[:, 0], uv[:, 1]), gate)

    k_tex = sample(tex_map, q_uv, gate_q)
    m_tex = sample(tex_map, near_uv, gate_near)
    n_tex = sample(tex_map, mirror_uv, gate_mirror)
    k_geo = sample(geo_map, q_uv, gate_q)
    m_geo = sample(geo_map, near_uv, gate_near)
    n_geo = sample(geo_map, mirror_uv, gate_mirror)

    vis_gate = 1.0 if gen.fusion_visibility else 0.0
    vis = vis_gate * np.stack([v_q, use_near * near_vis, use_mirror * mirror_vis], axis=1)

    extent = np.maximum(pack.box_max - pack.box_min, 1e-12)
    qn = (positions - pack.box_min[None, :]) / extent[None, :]
    phi = positional_encode(qn, gen.n_freqs)

    g_l = ad.broadcast_to(ad.reshape(fm.global_left, (1, gen.d_t)), (m, gen.d_t))
    g_r = ad.broadcast_to(ad.reshape(fm.global_right, (1, gen.d_t)), (m, gen.d_t))

    fused_tex = fuse(
        gen.fusion_tex,
        FusionInput(phi=phi, feat_q=k_tex, feat_near=m_tex, feat_mirror=n_tex, vis=vis,
                    g_left=g_l, g_right=g_r),
    ).fused
    fused_geo = fuse(
        gen.fusion_geo,
        FusionInput(phi=phi, feat_q=k_geo, feat_near=m_geo, feat_mirror=n_geo, vis=vis),
    ).fused

    delta = ad.reshape(gen.deviation(fused_geo, pack.delta_max), (m,))
    sigma = density(s_vals, delta, gen.density)
    rgb = gen.color(fused_tex, view_dirs)
    return sigma, rgb


def _dt_for(t_all: np.ndarray, t_far: np.ndarray) -> np.ndarray:
    gaps = np.diff(t_all, axis=1)
    last = (t_far - t_all[:, -1])[:, None]
    return np.concatenate([gaps, last], axis=1)


def render_rays(
    gen: Generator,
    pack: ScenePack,
    fm: FeatureMaps,
    origins: np.ndarray,
    dirs: np.ndarray,
    pix_u: np.ndarray,
    pix_v: np.ndarray,
    cfg: RenderConfig,
    seed: int,
    jitter: bool = True,
) -> Tensor:
    """(R,) pixel rays -> (R, 4) composited [r, g, b, alpha]."""
    t_near, t_far, _ = ray_bounds(pack, origins, dirs)
    n_c = cfg.n_coarse
    idx = np.arange(n_c)
    u01 = (
        hash_u01(seed, pix_v[:, None], pix_u[:, None], STREAM_COARSE, idx[None, :])
        if jitter else None
    )
    t_c = sample_coarse(t_near, t_far, n_c, u01)

    if cfg.n_fine > 0:
        with ad.no_grad():
            pos_c = origins[:, None, :] + t_c[..., None] * dirs[:, None, :]
            dirs_c = np.broadcast_to(dirs[:, None, :], pos_c.shape)
            sigma_c, _ = compute_field(
                gen, pack, fm, pos_c.reshape(-1, 3), dirs_c.reshape(-1, 3)
            )
        w_c, _ = ad.quadrature_weights(sigma_c.data.reshape(t_c.shape), _dt_for(t_c, t_far))
        idx_f = np.arange(cfg.n_fine)
        u01_f = hash_u01(seed, pix_v[:, None], pix_u[:, None], STREAM_FINE, idx_f[None, :])
        t_f = sample_fine(t_c, w_c, u01_f)
        t_all = np.sort(np.concatenate([t_c, t_f], axis=1), axis=1)
    else:
        t_all = t_c

    pos = origins[:, None, :] + t_all[..., None] * dirs[:, None, :]
    view = np.broadcast_to(dirs[:, None, :], pos.shape)
    sigma, rgb = compute_field(gen, pack, fm, pos.reshape(-1, 3), view.reshape(-1, 3))
    sigma = ad.reshape(sigma, t_all.shape)
    rgb = ad.reshape(rgb, t_all.shape + (3,))
    dt = _dt_for(t_all, t_far)
    return ad.composite_rays(sigma, rgb, dt, np.asarray(cfg.background, dtype=np.float64))


def render_rect(
    gen: Generator,
    pack: ScenePack,
    target_camera: Camera,
    v0: int,
    u0: int,
    height: int,
    width: int,
    cfg: RenderConfig,
    seed: int,
    fm: FeatureMaps | None = None,
    jitter: bool = True,
) -> Tensor:
    """Renders rows v0..v0+height, cols u0..u0+width -> (height, width, 4)."""
    if (
        v0 < 0 or u0 < 0
        or v0 + height > target_camera.height or u0 + width > target_camera.width
    ):
        raise ValidationError(
            f"patch [{v0}:{v0 + height}, {u0}:{u0 + width}] outside "
            f"{target_camera.height}x{target_camera.width} image"
        )
    if fm is None:
        fm = encode_input(gen, pack)
    vv, uu = np.meshgrid(np.arange(v0, v0 + height), np.arange(u0, u0 + width), indexing="ij")
    pix_v = vv.ravel()
    pix_u = uu.ravel()
    origins, dirs = target_camera.ray(pix_u.astype(np.float64), pix_v.astype(np.float64))
    out = render_rays(gen, pack, fm, origins, dirs, pix_u, pix_v, cfg, seed, jitter=jitter)
    return ad.reshape(out, (height, width, 4))


def render_patch(
    gen: Generator,
    pack: ScenePack,
    target_camera: Camera,
    v0: int,
    u0: int,
    size: int,
    cfg: RenderConfig,
    seed: int,
    fm: FeatureMaps | None = None,
    jitter: bool = True,
) -> Tensor:
    return render_rect(gen, pack, target_camera, v0, u0, size, size, cfg, seed,
                       fm=fm, jitter=jitter)


def render_pixel(gen, pack, target_camera, u: int, v: int, cfg: RenderConfig, seed: int) -> np.ndarray:
    return render_patch(gen, pack, target_camera, v, u, 1, cfg, seed).data[0, 0]


def render_image(
    gen: Generator,
    pack: ScenePack,
    target_camera: Camera,
    cfg: RenderConfig,
    seed: int,
    jitter: bool = True,
) -> np.ndarray:
    """Full frame as (H, W, 4) float64, assembled from patch-sized tiles.

    Per-pixel hash seeding means each pixel's samples depend only on its
    absolute coordinates, never on which tile it was rendered in.
    """
    h, w = target_camera.height, target_camera.width
    p = cfg.patch_size
    out = np.empty((h, w, 4))
    with ad.no_grad():
        fm = encode_input(gen, pack)
        for v0 in range(0, h, p):
            for u0 in range(0, w, p):
                dv = min(p, h - v0)
                du = min(p, w - u0)
                tile = render_rect(gen, pack, target_camera, v0, u0, dv, du, cfg, seed,
                                   fm=fm, jitter=jitter)
                out[v0 : v0 + dv, u0 : u0 + du] = tile.data
    return out
