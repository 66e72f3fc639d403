"""Patch optimisation: gradient exactness, reference-run bands, RNG contracts."""

import math

import numpy as np
import pytest

from motpatch.geometry import BBox, FrameDims
from motpatch.patchopt.eot import EOTParams
from motpatch.patchopt.gradcheck import grad_fd, max_rel_error
from motpatch.patchopt.losses import LossWeights, loss_total
from motpatch.patchopt.optimize import (
    _prep_scene,
    _scene_pass,
    DEFAULT_TEMP,
    eval_loss,
    optimize_patch,
)
from motpatch.patchopt.scene import Scene, SceneTarget
from motpatch.patchopt.surrogate import DetectorConfig
from motpatch.tracker import Detection


def reference_scene() -> Scene:
    return Scene(
        dims=FrameDims(320, 180),
        targets=(SceneTarget(box=BBox(136, 40, 48, 96)),),
    )


def test_scene_pass_gradient_matches_finite_differences():
    det = DetectorConfig()
    weights = LossWeights()
    prep = _prep_scene(reference_scene(), det)
    rng = np.random.default_rng(19)
    patch = 0.2 + 0.5 * rng.random((8, 8, 3))

    from motpatch.patchopt.eot import EOTSample

    smpl = EOTSample.identity()
    _, grad = _scene_pass(patch, prep, det, weights, smpl, DEFAULT_TEMP, with_grad=True)

    def objective(p):
        terms, _ = _scene_pass(p, prep, det, weights, smpl, DEFAULT_TEMP, with_grad=False)
        return terms.total

    numeric = grad_fd(objective, patch, step=1e-5)
    assert max_rel_error(grad, numeric, floor=1e-6) < 1e-3


def test_initial_terms_on_camouflage_patch():
    terms = eval_loss(np.full((32, 32, 3), 0.15), reference_scene())
    # constant patch: variation sits on the epsilon floor
    assert terms.tv == pytest.approx(1024 * 1e-4, rel=1e-12)
    # body-coloured patch leaves the target's 0.20 contrast intact
    assert terms.ap == pytest.approx(1.0 / (1.0 + math.exp(-3.2)), abs=1e-9)
    # silent patch anchors collapse the soft box: overlap term is all miss
    assert terms.bbr == pytest.approx(48 / 320 + 96 / 180 + 1.0, abs=2e-3)
    assert terms.total == pytest.approx(loss_total(terms.bbr, terms.tv, terms.ap), abs=1e-12)


def test_reference_run_bands_and_determinism():
    scenes = [reference_scene()]
    a = optimize_patch(scenes)
    assert len(a.trace) == 500
    assert a.trace[0][0] == 1 and a.trace[-1][0] == 500
    assert a.final.total / a.initial.total < 0.7
    assert a.final.total < 2.2
    assert a.final.ap < 0.01  # target confidence crushed
    assert a.patch.min() >= 0.0 and a.patch.max() <= 1.0
    b = optimize_patch(scenes)
    assert np.array_equal(a.patch, b.patch)
    assert a.trace == b.trace
    assert a.initial == b.initial and a.final == b.final


def test_trace_opens_at_the_initial_terms():
    res = optimize_patch([reference_scene()], iterations=3)
    it, bbr, tv, ap, total = res.trace[0]
    assert it == 1
    assert (bbr, tv, ap, total) == (res.initial.bbr, res.initial.tv, res.initial.ap, res.initial.total)


def test_zero_step_size_is_a_no_op():
    rng = np.random.default_rng(23)
    init = rng.random((16, 16, 3))
    res = optimize_patch([reference_scene()], iterations=5, step_size=0.0, init=init)
    assert np.array_equal(res.patch, init)
    assert res.initial == res.final
    totals = [row[4] for row in res.trace]
    assert totals == [totals[0]] * 5


def test_iterates_stay_inside_unit_cube_under_large_steps():
    res = optimize_patch([reference_scene()], iterations=30, step_size=0.2)
    assert res.patch.min() >= 0.0 and res.patch.max() <= 1.0


def test_identity_eot_ranges_match_disabled_eot_bitwise():
    scenes = [reference_scene()]
    off = optimize_patch(scenes, iterations=20)
    ident = optimize_patch(scenes, iterations=20, eot=EOTParams.identity())
    assert np.array_equal(off.patch, ident.patch)
    assert off.trace == ident.trace


def test_eot_run_executes_with_sampled_transforms():
    res = optimize_patch([reference_scene()], iterations=15, eot=EOTParams())
    assert len(res.trace) == 15
    assert np.isfinite([row[4] for row in res.trace]).all()
    assert res.patch.min() >= 0.0 and res.patch.max() <= 1.0


def test_optimized_patch_draws_detections_onto_the_body():
    from motpatch.patchopt.scene import render
    from motpatch.patchopt.surrogate import detect
    from motpatch.geometry import iou

    res = optimize_patch([reference_scene()])
    raster, _ = render(reference_scene(), res.patch)
    dets = detect(raster)
    body = reference_scene().targets[0].box
    assert dets  # the patch creates detections on the patched body
    assert max(iou(d.box, body) for d in dets) > 0.2
    assert all(isinstance(d, Detection) for d in dets)


def test_validation_errors():
    scenes = [reference_scene()]
    with pytest.raises(ValueError, match="iterations"):
        optimize_patch(scenes, iterations=0)
    with pytest.raises(ValueError, match="step size"):
        optimize_patch(scenes, step_size=-0.1)
    with pytest.raises(ValueError, match="at least one scene"):
        optimize_patch([])
    with pytest.raises(ValueError, match="lie in"):
        optimize_patch(scenes, init=1.5)
    with pytest.raises(ValueError, match="HxWx3"):
        optimize_patch(scenes, init=np.zeros((4, 4)))
    unpatched = Scene(
        dims=FrameDims(320, 180),
        targets=(SceneTarget(box=BBox(136, 40, 48, 96), patched=False),),
    )
    with pytest.raises(ValueError, match="no patched targets"):
        optimize_patch([unpatched])
    tiny = Scene(dims=FrameDims(320, 180), targets=(SceneTarget(box=BBox(0, 0, 8, 8)),))
    with pytest.raises(ValueError, match="no bright-center anchors"):
        optimize_patch([tiny])
