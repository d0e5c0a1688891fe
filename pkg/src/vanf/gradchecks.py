"""Curated finite-difference checks over the differentiable stack.

Each check builds a small scalar function and compares tape gradients against
central differences. The list runs from primitive layers up through the heads,
the ray compositor, the losses, and finally a one-ray render through a real
scene, so a regression in any backward rule shows up with a name attached.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import GradCheckReport, Tensor, grad_check
from .dataset import _SPLIT_TAG, scene_cameras
from .config import DataSection
from .geometry.scene import make_scene
from .networks.discriminator import Discriminator
from .networks.fusion import FusionInput, FusionMlp, fuse, fusion_in_width
from .networks.model import Generator
from .renderer import RenderConfig, make_scene_pack, render_patch
from .rng import make_rng
from .sdf import DensityParams, density
from .training.losses import (
    loss_adv_discriminator,
    loss_adv_generator,
    loss_perc,
    loss_rgb,
    loss_vis,
    make_perceptual,
)
from .visibility.maps import hand_masks


def _check_linear_relu(rng) -> GradCheckReport:
    x = rng.standard_normal((4, 5))
    w1 = rng.standard_normal((5, 6)) * 0.5
    b1 = rng.standard_normal(6) * 0.1
    w2 = rng.standard_normal((6, 2)) * 0.5

    def f(x_t, w1_t, b1_t, w2_t):
        h = ad.relu(ad.add(ad.matmul(x_t, w1_t), b1_t))
        return ad.sum_(ad.matmul(h, w2_t))

    return grad_check(f, [x, w1, b1, w2], names=["x", "w1", "b1", "w2"])


def _check_conv_stride2(rng) -> GradCheckReport:
    x = rng.standard_normal((1, 2, 6, 6))
    w = rng.standard_normal((3, 2, 3, 3)) * 0.3
    b = rng.standard_normal(3) * 0.1

    def f(x_t, w_t, b_t):
        return ad.sum_(ad.relu(ad.conv2d(x_t, w_t, b_t, stride=2)))

    return grad_check(f, [x, w, b], names=["x", "w", "b"])


def _check_bilinear(rng) -> GradCheckReport:
    fmap = rng.standard_normal((3, 5, 5))
    # sample points sit strictly inside cells so central differences never
    # step across an interpolation boundary
    us = np.array([0.3, 1.7, 3.4])
    vs = np.array([2.6, 0.4, 3.3])

    def f(m_t):
        return ad.sum_(ad.bilinear_sample(m_t, us, vs))

    return grad_check(f, [fmap], names=["map"])


def _check_upsample_decoder(rng) -> GradCheckReport:
    x = rng.standard_normal((1, 2, 3, 3))
    w = rng.standard_normal((1, 2, 3, 3)) * 0.3

    def f(x_t, w_t):
        return ad.sum_(ad.sigmoid(ad.conv2d(ad.upsample_nearest2x(x_t), w_t, None, stride=1)))

    return grad_check(f, [x, w], names=["x", "w"])


def _check_density(rng) -> GradCheckReport:
    s = rng.standard_normal(6) * 0.3
    delta = rng.standard_normal(6) * 0.02
    raw = np.asarray(DensityParams.from_w(0.1).w_raw.data)

    def f(s_t, d_t, raw_t):
        return ad.sum_(density(s_t, d_t, DensityParams(w_raw=raw_t)))

    return grad_check(f, [s, delta, raw], names=["s", "delta", "w_raw"])


def _check_fusion(rng) -> GradCheckReport:
    d = 4
    mu = FusionMlp.create(make_rng(11, 0), fusion_in_width(d, texture=False, n_freqs=1), 4, hidden=8)
    n = 3
    vis = rng.random((n, 3))
    phi = rng.standard_normal((n, 6))  # pe_width(1)
    feats = [rng.standard_normal((n, d)) * 0.5 for _ in range(3)]
    w0 = np.asarray(mu.layers[0].w.data)

    def f(w0_t, fq_t):
        mu.layers[0].w = w0_t
        out = fuse(mu, FusionInput(vis=vis, phi=Tensor(phi), feat_q=fq_t,
                                   feat_near=Tensor(feats[1]), feat_mirror=Tensor(feats[2]),
                                   g_left=None, g_right=None))
        return ad.sum_(out.fused)

    return grad_check(f, [w0, feats[0]], names=["mu.w0", "feat_q"])


def _check_compositor(rng) -> GradCheckReport:
    sigma = rng.random((2, 5)) * 3.0
    rgb = rng.random((2, 5, 3))
    dt = 0.05 + rng.random((2, 5)) * 0.1
    bg = np.array([0.1, 0.2, 0.3])

    def f(s_t, c_t):
        return ad.sum_(ad.composite_rays(s_t, c_t, dt, bg))

    return grad_check(f, [sigma, rgb], names=["sigma", "rgb"])


def _check_losses(rng) -> GradCheckReport:
    pred = rng.random((4, 4, 3))
    tgt = rng.random((4, 4, 3))
    v = 0.2 + 0.6 * rng.random((4, 4))
    vt = (rng.random((4, 4)) > 0.5).astype(np.float64)
    logit = rng.standard_normal((1, 1))

    def f(p_t, v_t, l_t):
        a = loss_rgb(p_t, tgt)
        b = loss_vis(v_t, vt)
        c = loss_adv_generator(l_t)
        d = loss_adv_discriminator(l_t, ad.mul(-1.0, l_t))
        return ad.add(ad.add(a, b), ad.add(c, d))

    return grad_check(f, [pred, v, logit], names=["pred", "v", "logit"])


def _check_perceptual(rng) -> GradCheckReport:
    net = make_perceptual(123)
    pred = rng.random((3, 16, 16))
    tgt = rng.random((3, 16, 16))

    def f(p_t):
        return loss_perc(p_t, tgt, net)

    return grad_check(f, [pred], names=["pred"])


def _check_discriminator(rng) -> GradCheckReport:
    disc = Discriminator.create(make_rng(21, 0), in_channels=4, base=4)
    x = rng.random((1, 4, 16, 16))

    def f(x_t):
        logit, vmap = disc(x_t)
        return ad.add(ad.sum_(logit), ad.mean(vmap))

    return grad_check(f, [x], names=["stack"])


def _check_pixel_render(rng, n_coarse: int = 4) -> GradCheckReport:
    """One ray through encoders, fusion, heads, compositor; one param per net."""
    scene = make_scene(make_rng(31), touching=True)
    data_cfg = DataSection(image_size=32, n_cameras=2)
    cams = scene_cameras(data_cfg, "train", 0, scene.center(), scene.scale() * data_cfg.radius_factor)
    img = rng.random((3, 32, 32))
    pack = make_scene_pack(scene.meshes, cams[0], img, hand_masks(scene.meshes, cams[0]))
    gen = Generator.create(seed=13, d_t=4, d_g=4, n_freqs=2, hidden=8)
    cfg = RenderConfig(n_coarse=n_coarse, n_fine=0, patch_size=1)
    params = gen.named_params()
    checked = {
        "density.w_raw": None,
        "color.2.w": (slice(0, 3), slice(0, 1)),
        "deviation.1.w": (slice(0, 2), slice(0, 2)),
        "fusion_tex.0.b": (slice(0, 3),),
        "tex_enc.conv_in.w": (slice(0, 1), slice(0, 1), slice(0, 2), slice(0, 2)),
        "geo_enc.down1.b": (slice(0, 2),),
    }

    def pixel_scalar() -> Tensor:
        out = render_patch(gen, pack, cams[1], 16, 16, 1, cfg, seed=5, jitter=False)
        return ad.sum_(ad.getitem(out, (slice(None), slice(None), slice(0, 3))))

    with ad.no_grad():
        hit = render_patch(gen, pack, cams[1], 16, 16, 1, cfg, seed=5, jitter=False)
    if float(hit.data[0, 0, 3]) <= 0.0:
        raise RuntimeError("probe pixel missed the scene; check failed to set up")

    worst = 0.0
    per_input: dict[str, float] = {}
    ok = True
    for name, sel in checked.items():
        leaf = params[name]
        base = leaf.data.copy()
        err = _fd_on_param(pixel_scalar, leaf, base, sel)
        per_input[name] = err
        worst = max(worst, err)
        ok = ok and err < 1e-4
        leaf.data = base
    return GradCheckReport(ok=ok, max_rel_err=worst, per_input=per_input)


def _fd_on_param(scalar_fn, leaf: Tensor, base: np.ndarray, sel) -> float:
    """Central differences against tape grads for one (sliced) live parameter.

    The parameter tensor participates in the graph directly, so the analytic
    gradient is read off ``leaf.grad`` rather than a synthetic input leaf.
    """
    h = 1e-5

    def splice(vals: np.ndarray) -> None:
        if sel is None:
            leaf.data = np.asarray(vals, dtype=base.dtype).reshape(base.shape)
        else:
            patched = base.copy()
            patched[sel] = vals
            leaf.data = patched

    probe = np.asarray(base if sel is None else base[sel], dtype=np.float64).copy()
    leaf.grad = None
    splice(probe)
    with ad.Tape() as tape:
        y = scalar_fn()
    tape.backward(y)
    g = leaf.grad if sel is None else (None if leaf.grad is None else leaf.grad[sel])
    analytic = np.zeros_like(probe) if g is None else np.asarray(g, dtype=np.float64).copy()

    numeric = np.zeros_like(probe)
    flat_p = probe.reshape(-1)
    flat_n = numeric.reshape(-1)
    for k in range(flat_p.size):
        orig = flat_p[k]
        flat_p[k] = orig + h
        splice(probe)
        fp = float(scalar_fn().data.reshape(()))
        flat_p[k] = orig - h
        splice(probe)
        fm = float(scalar_fn().data.reshape(()))
        flat_p[k] = orig
        flat_n[k] = (fp - fm) / (2.0 * h)
    splice(probe)
    denom = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-12)
    return float(np.abs(analytic - numeric).max() / denom)


CHECKS = {
    "linear_relu_mlp": _check_linear_relu,
    "conv_stride2": _check_conv_stride2,
    "bilinear_sample": _check_bilinear,
    "upsample_decoder": _check_upsample_decoder,
    "density_profile": _check_density,
    "fusion_weights": _check_fusion,
    "ray_compositor": _check_compositor,
    "losses": _check_losses,
    "perceptual": _check_perceptual,
    "discriminator": _check_discriminator,
    "pixel_render": _check_pixel_render,
}


def run_checks(names: list[str] | None = None, seed: int = 0) -> dict:
    """Run the named checks (all by default); returns a JSON-ready report."""
    selected = list(CHECKS) if not names else names
    results = []
    all_ok = True
    for name in selected:
        rng = np.random.default_rng(seed + 1)
        rep = CHECKS[name](rng)
        results.append({"name": name, "ok": bool(rep.ok),
                        "max_rel_err": float(rep.max_rel_err),
                        "per_input": {k: float(v) for k, v in rep.per_input.items()}})
        all_ok = all_ok and rep.ok
    return {"ok": all_ok, "checks": results}
