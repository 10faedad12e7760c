from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wecs.synth import (
    EllipseSpec,
    NoiseModel,
    SceneError,
    add_speckle,
    gen_ellipse_scene,
    image_rng,
    default_scene,
    default_scene_specs,
    planted_change_stack,
    rasterize,
)
from wecs.series import ImageStack


def test_rasterize_axis_aligned_matches_loop():
    spec = EllipseSpec((10.0, 12.0), (5.0, 3.0))
    mask = rasterize(spec, (24, 30))
    for i in range(24):
        for j in range(30):
            inside = ((j - 12.0) / 5.0) ** 2 + ((i - 10.0) / 3.0) ** 2 <= 1.0
            assert mask[i, j] == inside


def test_rasterize_circle_area_and_rotation():
    circle = rasterize(EllipseSpec((50.0, 50.0), (20.0, 20.0)), (101, 101))
    assert abs(circle.sum() - math.pi * 400) < 0.02 * math.pi * 400
    rot = rasterize(EllipseSpec((50.0, 50.0), (20.0, 20.0), rotation=0.7), (101, 101))
    # rotation only moves pixels sitting exactly on the rim (float trig)
    assert np.count_nonzero(circle != rot) <= 8
    wide = rasterize(EllipseSpec((50.0, 50.0), (30.0, 5.0)), (101, 101))
    tall = rasterize(EllipseSpec((50.0, 50.0), (30.0, 5.0), rotation=math.pi / 2), (101, 101))
    assert np.count_nonzero(wide.T != tall) <= 8
    assert tall.sum() > 0 and tall[50, 50]


def test_rasterize_rejects_out_of_bounds():
    with pytest.raises(SceneError, match="does not fit"):
        rasterize(EllipseSpec((2.0, 2.0), (5.0, 5.0)), (20, 20))
    with pytest.raises(SceneError):
        EllipseSpec((0.0, 0.0), (0.0, 1.0))


def test_scene_builds_cumulatively():
    base = [EllipseSpec((8.0, 8.0), (3.0, 3.0))]
    changes = [EllipseSpec((20.0, 20.0), (4.0, 2.0), amplitude=1.5, onset=3)]
    scene = gen_ellipse_scene((32, 32), base, changes, 4)
    imgs = scene.images.images
    assert np.array_equal(imgs[0], imgs[1])
    assert np.array_equal(imgs[2], imgs[3])
    assert np.max(imgs[3]) == 2.0
    assert imgs[3][20, 20] == 1.5
    assert not scene.per_step_masks[0].any() and not scene.per_step_masks[2].any()
    assert np.array_equal(scene.per_step_masks[1], scene.truth_mask)
    assert scene.base_mask[8, 8] and not scene.base_mask[20, 20]
    with pytest.raises(SceneError, match="onset"):
        gen_ellipse_scene((32, 32), base, [EllipseSpec((20.0, 20.0), (2.0, 2.0), onset=5)], 4)


def test_default_scene_layout():
    scene = default_scene()
    assert scene.dims == (256, 256) and scene.n == 4
    counts = [int(m.sum()) for m in scene.per_step_masks]
    assert counts == [3442, 804, 50]
    assert int(scene.truth_mask.sum()) == 4296
    # change waves never overlap each other or the base features
    assert not (scene.truth_mask & scene.base_mask).any()
    assert sum(counts) == scene.truth_mask.sum()
    base, changes = default_scene_specs()
    assert len(base) == 3 and [c.onset for c in changes].count(4) == 6


def test_default_scene_other_sizes():
    scene = default_scene((128, 160), n=6)
    assert scene.dims == (128, 160)
    assert scene.truth_mask.any()
    with pytest.raises(SceneError, match="n >= 4"):
        default_scene(n=3)


def test_noise_model_parse():
    assert NoiseModel.parse("gamma:4") == NoiseModel("gamma", 4.0)
    assert str(NoiseModel.parse("gauss:0.5")) == "gauss:0.5"
    assert NoiseModel.parse("none").kind == "none"
    for bad in ("gamma:0.5", "gamma:x", "poisson:2", "gauss:-1"):
        with pytest.raises(SceneError):
            NoiseModel.parse(bad)


def test_speckle_statistics():
    clean = ImageStack(np.zeros((2, 300, 300)))
    noisy = add_speckle(clean, NoiseModel("gamma", 4.0), seed=1)
    g = noisy.images.ravel()
    # Gamma(L, 1/L): mean 1, variance 1/L
    assert abs(g.mean() - 1.0) < 0.01
    assert abs(g.var() - 0.25) < 0.01
    assert np.all(g > 0)


def test_speckle_streams_are_per_image():
    scene = default_scene((64, 64))
    a = add_speckle(scene.images, NoiseModel("gamma", 4.0), seed=5)
    b = add_speckle(scene.images, NoiseModel("gamma", 4.0), seed=5)
    assert np.array_equal(a.images, b.images)
    # image m only depends on (seed, m): a sub-stack reproduces the same draws
    sub = add_speckle(ImageStack(scene.images.images[:2]), NoiseModel("gamma", 4.0), seed=5)
    assert np.array_equal(sub.images, a.images[:2])
    c = add_speckle(scene.images, NoiseModel("gamma", 4.0), seed=6)
    assert not np.array_equal(a.images, c.images)


def test_rng_is_pcg64_seeded_by_seed_and_index():
    expected = np.random.Generator(np.random.PCG64(np.random.SeedSequence([3, 2]))).random(4)
    assert np.array_equal(image_rng(3, 2).random(4), expected)
    # frozen draws guard against silent generator changes
    assert image_rng(0, 1).integers(0, 2**31, 3).tolist() == [1121323794, 1910699505, 2132340198]
    assert image_rng(7, 3).gamma(4.0, 0.25) == 0.32775800285816264


def test_gauss_and_none_noise():
    clean = ImageStack(np.full((1, 8, 8), 2.0))
    assert np.array_equal(add_speckle(clean, NoiseModel("none"), 0).images, clean.images)
    g = add_speckle(clean, NoiseModel("gauss", 0.0), 0)
    assert np.array_equal(g.images, clean.images)


def test_planted_stack():
    stack, truth = planted_change_stack(0)
    assert stack.log_domain and stack.images.shape == (20, 256, 256)
    assert truth.shape == (64, 64) and truth.sum() == 20
    diff = stack.images[-1] - stack.images[0]
    fp = np.repeat(np.repeat(truth, 4, axis=0), 4, axis=1)
    assert abs(diff[fp].mean() - math.log(3.0)) < 0.15
    assert abs(diff[~fp].mean()) < 0.02


@settings(max_examples=20, deadline=None)
@given(
    r=st.floats(10, 50), c=st.floats(10, 50), a=st.floats(1, 9), b=st.floats(1, 9), rot=st.floats(0, math.pi)
)
def test_property_rasterize_inside_bounding_box(r, c, a, b, rot):
    spec = EllipseSpec((r, c), (a, b), rot)
    mask = rasterize(spec, (61, 61))
    hr, hc = spec.extent()
    ii, jj = np.nonzero(mask)
    if ii.size:
        assert np.all(np.abs(ii - r) <= hr + 1e-9) and np.all(np.abs(jj - c) <= hc + 1e-9)
    assert mask.sum() <= math.pi * (a + 1) * (b + 1)
