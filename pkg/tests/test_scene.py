"""Scene rendering, patch pasting, and the crop dataset."""

import numpy as np
import pytest

from motpatch.attack import place_patch
from motpatch.geometry import BBox, FrameDims
from motpatch.patchopt.eot import EOTSample
from motpatch.patchopt.scene import (
    LUMA,
    Scene,
    SceneTarget,
    build_clip_dataset,
    render,
    scenes_from_gt,
)

DIMS = FrameDims(320, 180)


def one_target_scene(box: BBox = BBox(136, 48, 48, 96), patched: bool = True) -> Scene:
    return Scene(dims=DIMS, targets=(SceneTarget(box=box, patched=patched),))


def test_clean_render_paints_background_and_bodies():
    raster, ctx = render(one_target_scene(patched=False))
    assert raster.shape == (180, 320)
    assert np.all(raster[48:144, 136:184] == 0.15)
    mask = np.full(raster.shape, True)
    mask[48:144, 136:184] = False
    assert np.all(raster[mask] == 0.35)
    assert ctx.pastes == [] and ctx.patch_shape == (0, 0, 3)


def test_identity_paste_writes_patch_luminance_verbatim():
    # a 48x64 body gives a 32x32 placement rect: rows 103:135, cols 108:140
    scene = one_target_scene(BBox(100, 100, 48, 64))
    rng = np.random.default_rng(3)
    patch = rng.random((32, 32, 3))
    raster, ctx = render(scene, patch)
    assert np.array_equal(raster[103:135, 108:140], patch @ LUMA)
    assert raster[102, 120] == 0.15  # body pixel just above the patch
    assert raster[50, 50] == 0.35
    assert len(ctx.pastes) == 1
    assert ctx.pastes[0].rect == (103, 135, 108, 140)


def test_unpatched_targets_are_left_alone():
    scene = Scene(
        dims=DIMS,
        targets=(
            SceneTarget(box=BBox(40, 40, 48, 64), patched=False),
            SceneTarget(box=BBox(200, 40, 48, 64), patched=True),
        ),
    )
    patch = np.full((16, 16, 3), 0.9)
    raster, ctx = render(scene, patch)
    assert len(ctx.pastes) == 1
    assert np.all(raster[40:104, 40:88] == 0.15)  # first body untouched


def test_patch_regions_follow_standard_placement():
    scene = Scene(
        dims=DIMS,
        targets=(
            SceneTarget(box=BBox(40, 40, 48, 64)),
            SceneTarget(box=BBox(200, 40, 48, 64), patched=False),
            SceneTarget(box=BBox(120, 60, 30, 90)),
        ),
    )
    regions = scene.patch_regions()
    assert regions == [place_patch(BBox(40, 40, 48, 64)), place_patch(BBox(120, 60, 30, 90))]


def test_render_vjp_matches_finite_differences():
    scene = one_target_scene(BBox(100, 100, 48, 64))
    rng = np.random.default_rng(7)
    patch = 0.3 + 0.4 * rng.random((8, 8, 3))
    smpl = EOTSample(rotation=10.0, scale=0.95, blur=0.6, brightness=1.0)
    weights = rng.random((180, 320))

    def objective(p):
        raster, _ = render(scene, p, smpl)
        return float(np.sum(weights * raster))

    _, ctx = render(scene, patch, smpl)
    grad = ctx.vjp(weights)
    assert grad.shape == patch.shape
    step = 1e-6
    for idx in [(0, 0, 0), (3, 4, 1), (7, 7, 2), (2, 6, 0), (5, 1, 2)]:
        hi = patch.copy()
        hi[idx] += step
        lo = patch.copy()
        lo[idx] -= step
        fd = (objective(hi) - objective(lo)) / (2 * step)
        assert grad[idx] == pytest.approx(fd, abs=1e-6)


def test_vjp_sums_over_multiple_pastes():
    scene = Scene(
        dims=DIMS,
        targets=(
            SceneTarget(box=BBox(30, 40, 48, 64)),
            SceneTarget(box=BBox(200, 40, 48, 64)),
        ),
    )
    rng = np.random.default_rng(9)
    patch = 0.3 + 0.4 * rng.random((8, 8, 3))
    weights = rng.random((180, 320))
    _, ctx = render(scene, patch)
    assert len(ctx.pastes) == 2
    combined = ctx.vjp(weights)

    singles = []
    for keep in (0, 1):
        solo = Scene(dims=DIMS, targets=(scene.targets[keep],))
        _, c = render(solo, patch)
        singles.append(c.vjp(weights))
    assert np.allclose(combined, singles[0] + singles[1], atol=1e-12)


def test_scenes_from_gt_ordering_and_fields():
    frames = {
        3: [BBox(10, 10, 20, 40)],
        1: [BBox(50, 50, 20, 40), BBox(100, 50, 20, 40)],
    }
    scenes = scenes_from_gt(frames, DIMS, intensity=0.1, background=0.4)
    assert len(scenes) == 2
    assert len(scenes[0].targets) == 2  # frame 1 first
    assert len(scenes[1].targets) == 1
    assert all(t.patched for s in scenes for t in s.targets)
    assert scenes[0].targets[0].intensity == 0.1
    assert scenes[0].background == 0.4


def test_build_clip_dataset_crops_and_rebases():
    scene = Scene(
        dims=FrameDims(640, 360),
        targets=(
            SceneTarget(box=BBox(100, 100, 50, 100)),
            SceneTarget(box=BBox(500, 50, 40, 80)),
        ),
    )
    crops = build_clip_dataset([scene], margin=0.2)
    assert len(crops) == 2
    first = crops[0]
    assert first.dims == FrameDims(70.0, 140.0)
    assert first.targets == (SceneTarget(box=BBox(10.0, 20.0, 50.0, 100.0)),)
    assert first.background == scene.background


def test_build_clip_dataset_keeps_intersecting_neighbours():
    scene = Scene(
        dims=FrameDims(640, 360),
        targets=(
            SceneTarget(box=BBox(100, 100, 50, 100)),
            SceneTarget(box=BBox(140, 100, 50, 100)),  # overlaps the first crop
        ),
    )
    crops = build_clip_dataset([scene], margin=0.2)
    assert len(crops) == 2
    first = crops[0]
    assert len(first.targets) == 2
    assert first.targets[1].box.w < 50.0  # neighbour truncated at the crop edge


def test_build_clip_dataset_clips_at_frame_borders():
    scene = Scene(dims=FrameDims(640, 360), targets=(SceneTarget(box=BBox(2, 3, 50, 100)),))
    crop = build_clip_dataset([scene], margin=0.2)[0]
    assert crop.targets[0].box.x == 2.0  # left margin swallowed by the border
    assert crop.targets[0].box.y == 3.0
    assert crop.dims.width == 2 + 50 + 10


def test_build_clip_dataset_count_scales_with_targets():
    scenes = [
        Scene(
            dims=FrameDims(640, 360),
            targets=tuple(
                SceneTarget(box=BBox(60 + 150 * k, 100, 40, 80)) for k in range(3)
            ),
        )
        for _ in range(4)
    ]
    assert len(build_clip_dataset(scenes)) == 12


def test_scene_validation():
    with pytest.raises(ValueError, match="intensity"):
        SceneTarget(box=BBox(0, 0, 10, 10), intensity=1.5)
    with pytest.raises(ValueError, match="positive area"):
        SceneTarget(box=BBox(0, 0, 0, 10))
    with pytest.raises(ValueError, match="at least one target"):
        Scene(dims=DIMS, targets=())
    with pytest.raises(ValueError, match="background"):
        Scene(dims=DIMS, targets=(SceneTarget(box=BBox(0, 0, 10, 10)),), background=2.0)
    with pytest.raises(ValueError, match="outside"):
        Scene(dims=DIMS, targets=(SceneTarget(box=BBox(400, 10, 10, 10)),))
    with pytest.raises(ValueError, match="HxWx3"):
        render(one_target_scene(), np.zeros((4, 4)))
