import numpy as np
import pytest
import torch

from wxdepth.exceptions import DataError, MissingVariantError
from wxdepth.geometry import LEFT_TO_RIGHT, default_rig, warp
from wxdepth.synthdata import (
    Scene,
    SceneObject,
    augment_dataset,
    generate_dataset,
    generate_scene,
    load_dataset,
    nonoccluded_mask,
    render_stereo,
    render_view,
    write_dataset,
)

from conftest import small_rig, to_tensor


# --- scene generation -----------------------------------------------------------

def test_same_seed_same_scene(rig):
    a = generate_scene(5, rig)
    b = generate_scene(5, rig)
    assert a.to_dict() == b.to_dict()
    assert a.to_dict() != generate_scene(6, rig).to_dict()


def test_object_count_range(rig):
    for seed in range(30):
        n = len(generate_scene(seed, rig).objects)
        assert 3 <= n <= 10


def test_depth_range_sweep(rig):
    for seed in range(1000):
        scene = generate_scene(seed, rig)
        for obj in scene.objects:
            assert 2.0 <= obj.z <= 80.0
        assert scene.background_z <= 80.0


def test_object_depths_distinct(rig):
    for seed in range(100):
        zs = [o.z for o in generate_scene(seed, rig).objects]
        assert len(set(zs)) == len(zs)


def test_background_only_scene(rig):
    scene = generate_scene(0, rig, num_objects=0)
    assert scene.objects == ()
    sample = render_stereo(scene)
    assert np.all(sample.depth == scene.background_z)


# --- rendering ---------------------------------------------------------------------

def test_background_disparity_constant(rig):
    scene = generate_scene(1, rig, num_objects=0)
    sample = render_stereo(scene)
    disparity = rig.baseline * rig.fx / sample.depth
    assert np.allclose(disparity, rig.baseline * rig.fx / scene.background_z)


def test_plane_disparity_from_formula():
    rig = default_rig(256, 64)
    rig = type(rig)(fx=720.0, fy=720.0, cx=rig.cx, cy=rig.cy, baseline=0.5, width=256, height=64)
    texture = generate_scene(0, rig).background
    plane = SceneObject(kind="plane", x=0.0, y=0.0, z=4.0, half_w=0.2, half_h=0.1, texture=texture)
    scene = Scene(rig=rig, objects=(plane,), background_z=80.0, background=texture)
    sample = render_stereo(scene)
    disparity = rig.baseline * rig.fx / sample.depth
    on_plane = sample.depth == 4.0
    assert on_plane.any()
    assert np.allclose(disparity[on_plane], 90.0)


def test_depth_exact_on_plane_interiors(rig):
    scene = generate_scene(3, rig)
    sample = render_stereo(scene)
    zs = {scene.background_z} | {o.z for o in scene.objects}
    assert set(np.unique(sample.depth)) <= zs


def test_gt_warp_reconstructs_left(rig):
    scene = generate_scene(9, rig)
    sample = render_stereo(scene)
    depth = torch.from_numpy(sample.depth)[None, None]
    warped, valid = warp(to_tensor(sample.right), depth, rig)
    mask = valid[0, 0].numpy() & sample.nonocc
    err = np.abs(warped[0].numpy().transpose(1, 2, 0) - sample.left)[mask]
    assert err.mean() < 1e-2


def test_gt_warp_reconstructs_right_from_left(rig):
    # mirrored consistency: right-view depth drives a left->right warp
    scene = generate_scene(12, rig)
    left, _, id_left = render_view(scene, "L")
    right, depth_right, id_right = render_view(scene, "R")
    disparity = rig.baseline * rig.fx / depth_right
    nonocc = nonoccluded_mask(id_right, id_left, disparity, "left_to_right")
    warped, valid = warp(
        to_tensor(left), torch.from_numpy(depth_right)[None, None], rig, LEFT_TO_RIGHT
    )
    mask = valid[0, 0].numpy() & nonocc
    err = np.abs(warped[0].numpy().transpose(1, 2, 0) - right)[mask]
    assert err.mean() < 1e-2


def test_images_quantized_to_8bit_grid(rendered_sample):
    for img in (rendered_sample.left, rendered_sample.right):
        assert np.array_equal(img, np.round(img * 255) / 255)
        assert img.min() >= 0.0 and img.max() <= 1.0


# --- dataset round trip ----------------------------------------------------------------

def build_samples(rig, n=3, with_variants=True):
    samples = []
    for i in range(n):
        sample = render_stereo(generate_scene(100 + i, rig), scene_id=f"scene_{i:05d}")
        if with_variants:
            from wxdepth.augmentation import WEATHER_VARIANTS, build_variant

            for variant in WEATHER_VARIANTS:
                sample.variants[variant.name] = build_variant(
                    sample.left, variant, seed=i, depth=sample.depth
                )
        samples.append(sample)
    return samples


def test_write_load_round_trip(tmp_path, rig):
    samples = build_samples(rig, n=3)
    root = write_dataset(samples, tmp_path / "ds", rig)
    dataset = load_dataset(root)
    assert len(dataset) == 3
    assert dataset.rig.to_dict() == rig.to_dict()
    for i, sample in enumerate(samples):
        assert np.array_equal(dataset.load_left(i), sample.left)
        assert np.array_equal(dataset.load_right(i), sample.right)
        assert np.abs(dataset.load_depth(i) - sample.depth).max() < 1e-6
        assert np.array_equal(dataset.load_nonocc(i), sample.nonocc)
        for name, img in sample.variants.items():
            got = dataset.load_left(i, name)
            assert np.abs(got - img).max() <= 0.5 / 255 + 1e-12


def test_depth_round_trip_is_exact(tmp_path, rig):
    samples = build_samples(rig, n=1, with_variants=False)
    root = write_dataset(samples, tmp_path / "ds", rig)
    assert np.array_equal(load_dataset(root).load_depth(0), samples[0].depth)


def test_listing_order_lexicographic(tmp_path, rig):
    samples = build_samples(rig, n=4, with_variants=False)
    root = write_dataset(list(reversed(samples)), tmp_path / "ds", rig)
    dataset = load_dataset(root)
    assert dataset.records == [(f"scene_{i:05d}", "0000") for i in range(4)]


def test_deleted_variant_reported_with_location(tmp_path, rig):
    samples = build_samples(rig, n=2)
    root = write_dataset(samples, tmp_path / "ds", rig)
    victim = root / "scene_00001" / "0000_L_snow_2.png"
    victim.unlink()
    with pytest.raises(DataError) as err:
        load_dataset(root)
    message = str(err.value)
    assert "scene_00001" in message and "0000" in message and "snow_2" in message


def test_clear_only_dataset_loads_and_defers_variant_errors(clear_only_dataset):
    dataset = load_dataset(clear_only_dataset)
    assert dataset.variants == ["clear_0"]
    with pytest.raises(MissingVariantError) as err:
        dataset.require_variants(["rain_1"])
    assert err.value.variant == "rain_1"
    with pytest.raises(MissingVariantError):
        dataset.load_left(0, "fog_2")


def test_missing_rig_rejected(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(DataError):
        load_dataset(tmp_path / "empty")


def test_generate_and_augment_dataset(tmp_path):
    rig = small_rig()
    root = generate_dataset(tmp_path / "ds", num_scenes=2, seed=0, rig=rig)
    names = augment_dataset(root, weathers=("fog",), magnitudes=(1, 2), seed=1)
    assert names == ["fog_1", "fog_2"]
    dataset = load_dataset(root)
    assert set(dataset.variants) == {"clear_0", "fog_1", "fog_2"}
    fog = dataset.load_left(0, "fog_1")
    assert fog.shape == dataset.load_left(0).shape
    assert not np.array_equal(fog, dataset.load_left(0))


def test_augment_is_deterministic(tmp_path):
    rig = small_rig()
    root_a = generate_dataset(tmp_path / "a", num_scenes=1, seed=0, rig=rig)
    root_b = generate_dataset(tmp_path / "b", num_scenes=1, seed=0, rig=rig)
    augment_dataset(root_a, seed=3)
    augment_dataset(root_b, seed=3)
    a, b = load_dataset(root_a), load_dataset(root_b)
    for name in a.variants:
        assert np.array_equal(a.load_left(0, name), b.load_left(0, name))


def test_variant_generation_leaves_gt_untouched(tmp_path):
    rig = small_rig()
    root = generate_dataset(tmp_path / "ds", num_scenes=1, seed=2, rig=rig)
    before = load_dataset(root).load_depth(0)
    augment_dataset(root, seed=9)
    after = load_dataset(root).load_depth(0)
    assert np.array_equal(before, after)
