"""Projected gradient patch optimization.

Each iteration samples one scene and one transform, renders the patch in,
scores all anchors, assembles the weighted objective, and takes a signed
step against the analytic pixel gradient with geometric step decay,
projecting back to [0, 1] afterwards. Signed steps are the right shape
for this objective: logistic-score gradients span many orders of
magnitude between saturated and active anchors, so unscaled descent
crawls, while sign steps move every pixel at full speed as long as the
score terms agree on a direction. Their weakness is the endgame. Once
scores saturate, the residual gradients are numerical noise with random
signs, and each sign step injects step-sized pixel dust whose smoothness
gradient then drowns the attack signal. Two measures keep that in check:
the geometric decay caps the dust at the current step size, and a short
smoothing pass after every step drains both the dust and the slow
brightness ramps left over from pixels crossing saturation at different
times, which the smoothness term values but barely gradients. Per-
iteration terms land in a trace suitable for the loss-trace CSV writer.

The regression term needs a differentiable stand-in for "the patch's
detection box": a soft box built from the anchors whose centers fall in
the patch placement region. Its center is the softmax-weighted anchor
center and its extent is the weighted anchor extent scaled by the weighted
score, so the box grows inside the target as patch anchors start to fire
and collapses toward a point while they are silent. Gradient flows through
both the weights and the scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..attack import place_patch
from ..geometry import BBox
from .eot import EOTParams, EOTSample, sample
from .losses import LossWeights, grad_tv, iou_box_grad, loss_ap, loss_bbr, loss_total, loss_tv
from .scene import Scene, render
from .surrogate import AnchorGrid, DetectorConfig, anchor_scores, build_anchor_grid, score_grad_raster

DEFAULT_ITERATIONS = 500
DEFAULT_STEP = 0.05
DEFAULT_SEED = 7
DEFAULT_PATCH_SIZE = 32
DEFAULT_TEMP = 20.0
DEFAULT_INIT = 0.15  # camouflage start: matches the default body texture
DECAY = 0.98  # per-iteration step decay
SMOOTH_LAMBDA = 0.125  # 1 - 8*lambda = 0: one sweep zeroes the checkerboard mode
SMOOTH_SWEEPS = 4


@dataclass(frozen=True)
class LossTerms:
    bbr: float
    tv: float
    ap: float
    total: float


@dataclass
class OptimizeResult:
    patch: np.ndarray
    trace: list[tuple[int, float, float, float, float]]
    initial: LossTerms  # reference-scene loss before the first step
    final: LossTerms  # and after the last, both under the identity transform


@dataclass
class _ScenePrep:
    scene: Scene
    grid: AnchorGrid
    target_idx: list[int]  # best-overlap anchor per patched target
    target_boxes: list[BBox]
    patch_anchors: list[np.ndarray]  # anchor indices inside each placement region


def _prep_scene(scene: Scene, det: DetectorConfig) -> _ScenePrep:
    grid = build_anchor_grid((int(round(scene.dims.height)), int(round(scene.dims.width))), det)
    t_idx, t_boxes, p_sets = [], [], []
    for t in scene.targets:
        if not t.patched:
            continue
        k = grid.best_overlap(t.box)
        t_idx.append(k)
        t_boxes.append(BBox(*map(float, grid.boxes[k])))
        anchors = grid.centers_in(place_patch(t.box))
        # the patch's detection box comes from the bright-center channel;
        # dark-center anchors over the region belong to the body behind it
        anchors = anchors[grid.polarity[anchors] > 0]
        if anchors.size == 0:
            raise ValueError(f"no bright-center anchors inside the placement region of target {t.box}")
        p_sets.append(anchors)
    if not t_idx:
        raise ValueError("scene has no patched targets to optimize against")
    return _ScenePrep(scene=scene, grid=grid, target_idx=t_idx, target_boxes=t_boxes, patch_anchors=p_sets)


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max())
    return e / e.sum()


def _smooth(patch: np.ndarray) -> np.ndarray:
    """Damp pixel noise left behind by the signed steps.

    A few Jacobi sweeps of four-neighbour averaging with replicated edges.
    Convex weights keep the result inside [0, 1], a uniform patch passes
    through unchanged, and at the default weight a single sweep removes the
    alternating-sign mode exactly, so step-scale dust cannot accumulate
    between iterations.
    """
    lam = SMOOTH_LAMBDA
    for _ in range(SMOOTH_SWEEPS):
        q = np.pad(patch, ((1, 1), (1, 1), (0, 0)), mode="edge")
        patch = (1.0 - 4.0 * lam) * patch + lam * (
            q[:-2, 1:-1] + q[2:, 1:-1] + q[1:-1, :-2] + q[1:-1, 2:]
        )
    return patch


def _soft_patch_box(
    scores: np.ndarray, grid: AnchorGrid, anchors: np.ndarray, temp: float
) -> tuple[BBox, np.ndarray]:
    """Soft detection box over the patch anchors and dIoU-ready internals.

    Returns the box and d(box)/d(score_l) as a (len(anchors), 4) array."""
    s = scores[anchors]
    w = _softmax(temp * s)
    bx = grid.boxes[anchors]
    centers = bx[:, :2] + bx[:, 2:] / 2
    sizes = bx[:, 2:]
    c = w @ centers
    u = w @ sizes
    m = float(w @ s)
    box = BBox(
        float(c[0] - m * u[0] / 2), float(c[1] - m * u[1] / 2), float(m * u[0]), float(m * u[1])
    )

    dc = temp * w[:, None] * (centers - c)  # (L, 2)
    du = temp * w[:, None] * (sizes - u)
    dm = w * (1.0 + temp * (s - m))  # (L,)
    d_ext = dm[:, None] * u + m * du  # d(m*u)/ds
    dbox = np.empty((len(s), 4))
    dbox[:, 0] = dc[:, 0] - d_ext[:, 0] / 2
    dbox[:, 1] = dc[:, 1] - d_ext[:, 1] / 2
    dbox[:, 2] = d_ext[:, 0]
    dbox[:, 3] = d_ext[:, 1]
    return box, dbox


def _scene_pass(
    patch: np.ndarray,
    prep: _ScenePrep,
    det: DetectorConfig,
    weights: LossWeights,
    smpl: EOTSample,
    temp: float,
    with_grad: bool,
) -> tuple[LossTerms, np.ndarray | None]:
    raster, rctx = render(prep.scene, patch, smpl)
    scores = anchor_scores(raster, prep.grid, det)
    n = len(prep.target_idx)

    ap = loss_ap([float(scores[k]) for k in prep.target_idx])
    soft = [_soft_patch_box(scores, prep.grid, a, temp) for a in prep.patch_anchors]
    bbr = loss_bbr(
        [b for b, _ in soft],
        prep.target_boxes,
        [tb.w for tb in prep.target_boxes],
        [tb.h for tb in prep.target_boxes],
        prep.scene.dims,
    )
    tv = loss_tv(patch)
    terms = LossTerms(bbr=float(bbr), tv=float(tv), ap=float(ap), total=float(loss_total(bbr, tv, ap, weights)))
    if not with_grad:
        return terms, None

    coeffs: dict[int, float] = {}
    for k in prep.target_idx:
        coeffs[k] = coeffs.get(k, 0.0) + weights.delta / n
    for (box, dbox), anchors, tbox in zip(soft, prep.patch_anchors, prep.target_boxes):
        g_iou = iou_box_grad(box, tbox)
        contrib = -(weights.beta / n) * (dbox @ g_iou)
        for a, c in zip(anchors, contrib):
            coeffs[int(a)] = coeffs.get(int(a), 0.0) + float(c)
    g_raster = score_grad_raster(prep.grid.shape, prep.grid, det, scores, coeffs)
    grad = rctx.vjp(g_raster) + weights.gamma * grad_tv(patch)
    return terms, grad


def eval_loss(
    patch: np.ndarray,
    scene: Scene,
    weights: LossWeights | None = None,
    detector: DetectorConfig | None = None,
    temp: float = DEFAULT_TEMP,
) -> LossTerms:
    """Objective terms for a patch on one scene, identity transform."""
    det = detector or DetectorConfig()
    terms, _ = _scene_pass(
        np.asarray(patch, dtype=float), _prep_scene(scene, det), det,
        weights or LossWeights(), EOTSample.identity(), temp, with_grad=False,
    )
    return terms


def optimize_patch(
    scenes: list[Scene],
    weights: LossWeights | None = None,
    eot: EOTParams | None = None,
    iterations: int = DEFAULT_ITERATIONS,
    step_size: float = DEFAULT_STEP,
    seed: int = DEFAULT_SEED,
    detector: DetectorConfig | None = None,
    patch_size: int = DEFAULT_PATCH_SIZE,
    selection_temp: float = DEFAULT_TEMP,
    init: np.ndarray | float = DEFAULT_INIT,
) -> OptimizeResult:
    """Train a patch against the scene set; scenes[0] is the reference the
    initial/final losses are measured on."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if step_size < 0:
        raise ValueError("step size must be non-negative")
    if not scenes:
        raise ValueError("need at least one scene")
    weights = weights or LossWeights()
    det = detector or DetectorConfig()
    preps = [_prep_scene(s, det) for s in scenes]

    if np.isscalar(init):
        patch = np.full((patch_size, patch_size, 3), float(init))
    else:
        patch = np.array(init, dtype=float, copy=True)
        if patch.ndim != 3 or patch.shape[2] != 3:
            raise ValueError("initial patch must be HxWx3")
    if patch.min() < 0 or patch.max() > 1:
        raise ValueError("initial patch values must lie in [0, 1]")

    # independent streams so identity-range EOT draws cannot shift the
    # scene sampling and the eot=None path stays bit-identical to it
    scene_ss, eot_ss = np.random.SeedSequence(seed).spawn(2)
    rng_scene = np.random.default_rng(scene_ss)
    rng_eot = np.random.default_rng(eot_ss)

    initial = eval_loss(patch, scenes[0], weights, det, selection_temp)
    trace: list[tuple[int, float, float, float, float]] = []
    for it in range(1, iterations + 1):
        prep = preps[int(rng_scene.integers(len(preps)))]
        smpl = sample(eot, rng_eot) if eot is not None else EOTSample.identity()
        terms, grad = _scene_pass(patch, prep, det, weights, smpl, selection_temp, with_grad=True)
        trace.append((it, terms.bbr, terms.tv, terms.ap, terms.total))
        if step_size:
            patch = np.clip(patch - step_size * DECAY**it * np.sign(grad), 0.0, 1.0)
            patch = _smooth(patch)
    final = eval_loss(patch, scenes[0], weights, det, selection_temp)
    return OptimizeResult(patch=patch, trace=trace, initial=initial, final=final)
