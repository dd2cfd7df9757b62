import numpy as np
import pytest
import torch

from wxdepth.exceptions import ConfigurationError, DegenerateInputError
from wxdepth.geometry import (
    CameraRig,
    RIGHT_TO_LEFT,
    LEFT_TO_RIGHT,
    default_rig,
    depth_to_disparity,
    disparity_to_depth,
    semi_augmented_warp,
    warp,
    warp_disparity,
)
from wxdepth.synthdata import Scene, SceneObject, TextureSpec, render_stereo
from wxdepth.validation import check_disparity

from conftest import to_tensor
from oracles import depth_from_disparity_loop, shift_image_loop


def smooth_image(h, w, seed=0, channels=3):
    """Band-limited test image: low-frequency sinusoid mix in [0.1, 0.9]."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    img = np.zeros((h, w, channels))
    for c in range(channels):
        acc = np.zeros((h, w))
        for _ in range(3):
            fx, fy = rng.uniform(0.005, 0.03, size=2)
            acc += rng.uniform(0.05, 0.12) * np.sin(2 * np.pi * (fx * xs + fy * ys) + rng.uniform(0, 6.28))
        img[..., c] = 0.5 + acc
    return np.clip(img, 0.0, 1.0)


# --- camera rig -------------------------------------------------------------

def test_rig_transform_round_trip():
    rig = default_rig()
    assert np.abs(rig.T_rl @ rig.T_lr - np.eye(4)).max() < 1e-9


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(fx=-1.0),
        dict(baseline=0.0),
        dict(cx=400.0),
        dict(cy=-1.0),
    ],
)
def test_rig_rejects_bad_values(kwargs):
    base = dict(fx=100.0, fy=100.0, cx=95.5, cy=31.5, baseline=0.5, width=192, height=64)
    base.update(kwargs)
    with pytest.raises(ConfigurationError):
        CameraRig(**base)


# --- disparity <-> depth ----------------------------------------------------

def test_unit_disparity_depth():
    rig = CameraRig(fx=1.0, fy=1.0, cx=0.0, cy=0.0, baseline=1.0, width=8, height=8)
    d = torch.ones(1, 1, 8, 8, dtype=torch.float64)
    assert torch.allclose(disparity_to_depth(d, rig), torch.ones_like(d))


def test_constant_disparity_depth():
    rig = CameraRig(fx=720.0, fy=720.0, cx=64.0, cy=32.0, baseline=0.5, width=128, height=64)
    d = torch.full((1, 1, 8, 8), 90.0, dtype=torch.float64)
    assert torch.allclose(disparity_to_depth(d, rig), torch.full_like(d, 4.0))


def test_disparity_to_depth_matches_scalar_loop():
    rig = default_rig()
    rng = np.random.default_rng(42)
    disp = rng.uniform(1.0, 64.0, size=(8, 8))
    got = disparity_to_depth(torch.from_numpy(disp)[None, None], rig)[0, 0].numpy()
    want = depth_from_disparity_loop(disp, rig.baseline, rig.fx)
    assert np.abs(got / want - 1.0).max() < 1e-12


def test_degenerate_disparity_rejected():
    rig = default_rig()
    d = torch.ones(1, 1, 4, 4, dtype=torch.float64)
    d[0, 0, 2, 2] = 0.0
    with pytest.raises(DegenerateInputError):
        disparity_to_depth(d, rig)


def test_disparity_depth_bijection():
    rig = default_rig()
    rng = np.random.default_rng(1)
    d = torch.from_numpy(rng.uniform(0.5, 60.0, size=(1, 1, 16, 16)))
    back = depth_to_disparity(disparity_to_depth(d, rig), rig)
    assert float((back / d - 1.0).abs().max()) < 1e-9


def test_check_disparity_enforces_bounds():
    d = torch.full((1, 1, 4, 4), 10.0, dtype=torch.float64)
    check_disparity(d, d_max=64.0)
    with pytest.raises(DegenerateInputError):
        check_disparity(d, d_max=5.0)


# --- warping ----------------------------------------------------------------

def test_zero_shift_warp_is_identity():
    img = to_tensor(smooth_image(32, 64, seed=3))
    shift = torch.zeros(1, 1, 32, 64, dtype=torch.float64)
    warped, valid = warp_disparity(img, shift, RIGHT_TO_LEFT)
    assert float((warped - img).abs().max()) < 1e-6
    assert valid.all()


@pytest.mark.parametrize("direction", [RIGHT_TO_LEFT, LEFT_TO_RIGHT])
def test_constant_shift_matches_translation_oracle(direction):
    img = smooth_image(16, 48, seed=5)
    shift = torch.full((1, 1, 16, 48), 3.0, dtype=torch.float64)
    warped, valid = warp_disparity(to_tensor(img), shift, direction)
    want = shift_image_loop(img, 3.0, direction)
    got = warped[0].numpy().transpose(1, 2, 0)
    mask = valid[0, 0].numpy()
    assert np.abs(got - want)[mask].max() < 1e-6
    # integer shift: exactly 3 boundary columns are invalid
    assert mask.sum() == 16 * (48 - 3)


def test_fractional_shift_matches_translation_oracle():
    img = smooth_image(16, 48, seed=6)
    warped, valid = warp_disparity(
        to_tensor(img), torch.full((1, 1, 16, 48), 2.25, dtype=torch.float64), RIGHT_TO_LEFT
    )
    want = shift_image_loop(img, 2.25, RIGHT_TO_LEFT)
    mask = valid[0, 0].numpy()
    assert np.abs(warped[0].numpy().transpose(1, 2, 0) - want)[mask].max() < 1e-6


def _plane_scene(rig, z=20.0, freq_px=0.015):
    cyc_m = freq_px * rig.fx / z
    texture = TextureSpec(
        base=(0.5, 0.45, 0.55),
        chroma=(1.0, 0.9, 0.8),
        freq_x=(cyc_m, 0.43 * cyc_m),
        freq_y=(0.31 * cyc_m, cyc_m),
        phase=(0.7, 2.1),
        amplitude=(0.15, 0.12),
    )
    plane = SceneObject(kind="plane", x=0.0, y=0.0, z=z, half_w=1e4, half_h=1e4, texture=texture)
    return Scene(rig=rig, objects=(plane,), background_z=80.0, background=texture)


def test_warp_reconstructs_textured_plane(rig):
    sample_scene = _plane_scene(rig)
    frame = render_stereo(sample_scene, quantize=False)
    depth = torch.from_numpy(frame.depth)[None, None]
    warped, valid = warp(to_tensor(frame.right), depth, rig, RIGHT_TO_LEFT)
    mask = valid[0, 0].numpy() & frame.nonocc
    err = np.abs(warped[0].numpy().transpose(1, 2, 0) - frame.left)[mask]
    assert err.mean() < 1e-3


def test_projective_warp_matches_shift_warp(rig):
    frame = render_stereo(_plane_scene(rig, z=11.37), quantize=False)
    depth = torch.from_numpy(frame.depth)[None, None]
    source = to_tensor(frame.right)
    w_shift, m_shift = warp(source, depth, rig, RIGHT_TO_LEFT, method="shift")
    w_proj, m_proj = warp(source, depth, rig, RIGHT_TO_LEFT, method="projective")
    assert float((w_shift - w_proj).abs().max()) < 1e-9
    assert torch.equal(m_shift, m_proj)


def test_warp_dimension_mismatch_rejected(rig):
    img = torch.rand(1, 3, 16, 16, dtype=torch.float64)
    depth = torch.ones(1, 1, 16, 16, dtype=torch.float64)
    with pytest.raises(ConfigurationError):
        warp(img, depth, rig, RIGHT_TO_LEFT)


def test_valid_mask_ignores_dmax_config():
    # the mask is purely geometric: revalidating the same disparities under a
    # larger d_max never flips a pixel
    img = to_tensor(smooth_image(16, 32, seed=8))
    shift = torch.full((1, 1, 16, 32), 5.0, dtype=torch.float64)
    _, mask_a = warp_disparity(img, shift, RIGHT_TO_LEFT)
    check_disparity(shift, d_max=8.0)
    check_disparity(shift, d_max=16.0)
    _, mask_b = warp_disparity(img, shift, RIGHT_TO_LEFT)
    assert torch.equal(mask_a, mask_b)


def test_semi_augmented_warp_identical_to_warp(rig):
    frame = render_stereo(_plane_scene(rig), quantize=False)
    depth = torch.from_numpy(frame.depth)[None, None]
    source = to_tensor(frame.right)
    a, ma = warp(source, depth, rig, RIGHT_TO_LEFT)
    b, mb = semi_augmented_warp(source, depth, rig, RIGHT_TO_LEFT)
    assert torch.equal(a, b) and torch.equal(ma, mb)


def test_semi_augmented_warp_invariant_to_target_weather(rig):
    # weather on the *target* image never enters the warp: reconstruction from
    # the clear source with GT depth stays within the clear-case bound
    frame = render_stereo(_plane_scene(rig), quantize=False)
    depth = torch.from_numpy(frame.depth)[None, None]
    warped, valid = semi_augmented_warp(to_tensor(frame.right), depth, rig, RIGHT_TO_LEFT)
    mask = valid[0, 0].numpy() & frame.nonocc
    err = np.abs(warped[0].numpy().transpose(1, 2, 0) - frame.left)[mask]
    assert err.mean() < 1e-3


# --- gradients ---------------------------------------------------------------

def test_warp_gradient_matches_finite_differences():
    h, w = 16, 32
    img = to_tensor(smooth_image(h, w, seed=9, channels=1)).double()
    rng = np.random.default_rng(10)
    base = rng.uniform(1.2, 4.8, size=(h, w))
    base = np.where((base % 1 < 0.2) | (base % 1 > 0.8), base + 0.3, base)

    shift = torch.from_numpy(base)[None, None].clone().requires_grad_(True)
    warped, _ = warp_disparity(img, shift, RIGHT_TO_LEFT)

    checked = 0
    step = 1e-3
    for y, x in [(4, 10), (8, 20), (12, 25), (5, 15), (10, 8)]:
        grad = torch.autograd.grad(warped[0, 0, y, x], shift, retain_graph=True)[0][0, 0, y, x]
        plus = base.copy()
        plus[y, x] += step
        minus = base.copy()
        minus[y, x] -= step
        wp, _ = warp_disparity(img, torch.from_numpy(plus)[None, None], RIGHT_TO_LEFT)
        wm, _ = warp_disparity(img, torch.from_numpy(minus)[None, None], RIGHT_TO_LEFT)
        fd = float(wp[0, 0, y, x] - wm[0, 0, y, x]) / (2 * step)
        if abs(fd) > 1e-4:
            assert abs(float(grad) - fd) / abs(fd) < 1e-2
            checked += 1
    assert checked >= 3


def test_warp_gradient_wrt_depth_matches_finite_differences(rig):
    frame = render_stereo(_plane_scene(rig), quantize=False)
    img = to_tensor(frame.right)
    base = frame.depth.copy()

    depth = torch.from_numpy(base)[None, None].clone().requires_grad_(True)
    warped, _ = warp(img, depth, rig, RIGHT_TO_LEFT)
    y, x = 10, 30
    grad = torch.autograd.grad(warped[0, 0, y, x], depth)[0][0, 0, y, x]

    step = 1e-4 * base[y, x]
    plus, minus = base.copy(), base.copy()
    plus[y, x] += step
    minus[y, x] -= step
    wp, _ = warp(img, torch.from_numpy(plus)[None, None], rig, RIGHT_TO_LEFT)
    wm, _ = warp(img, torch.from_numpy(minus)[None, None], rig, RIGHT_TO_LEFT)
    fd = float(wp[0, 0, y, x] - wm[0, 0, y, x]) / (2 * step)
    assert abs(fd) > 0
    assert abs(float(grad) - fd) / abs(fd) < 1e-2
