"""Effect-level attack injection: perturb a clean detection stream the way a
physical adversarial patch perturbs a real detector.

Four modes are modelled:

id_hijack      a false high-confidence box appears next to the victim while
               the victim's own detection confidence collapses; the false box
               stays where the attack began, so the victim's track latches
               onto it and the pedestrian walks away from their own identity.
detector_only  false boxes only (low overlap, no score suppression); spawns
               fresh identities without stealing existing ones.
noise_jitter   every detection in the window gets noisy coordinates and
               jittered scores.
control_blank  an unoptimised occluder: the victim's box shrinks by the
               covered area fraction and nothing else changes.

Every perturbed or injected box is logged in an AttackLedger; a ground-truth
box counts as attacked when such a box overlaps it with IoU above 0.2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import BBox, FrameDims, clip_to_frame, iou
from .io import MotRecord
from .tracker import Detection

ATTACK_MODES = ("id_hijack", "detector_only", "noise_jitter", "control_blank")
ATTACKED_IOU = 0.2  # overlap above which a ground-truth box counts as attacked
DETECTOR_ONLY_MAX_IOU = 0.15


@dataclass(frozen=True)
class AttackConfig:
    mode: str
    victim_ids: tuple[int, ...] = (1,)
    onset: int = 40
    duration: int = 20
    kappa_iou: float = 0.7  # overlap of the injected box with the victim at onset
    score_drop: float = 0.5  # multiplier on the victim's genuine scores
    false_score: float = 0.8  # confidence of injected boxes
    noise_sigma: float = 10.0  # pixel noise for noise_jitter
    score_jitter: float = 0.05  # score noise for noise_jitter
    occlusion: float = 0.3  # covered area fraction for control_blank
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ATTACK_MODES:
            raise ValueError(f"unknown attack mode {self.mode!r}; choose from {ATTACK_MODES}")
        if not self.victim_ids:
            raise ValueError("victim_ids must not be empty")
        if self.onset < 1 or self.duration < 1:
            raise ValueError("onset and duration must be >= 1")
        if not 0.0 < self.kappa_iou < 1.0:
            raise ValueError(f"kappa_iou must lie in (0, 1), got {self.kappa_iou}")
        if self.mode == "detector_only" and self.kappa_iou > DETECTOR_ONLY_MAX_IOU:
            raise ValueError(
                f"detector_only requires kappa_iou <= {DETECTOR_ONLY_MAX_IOU}, got {self.kappa_iou}"
            )
        if not 0.0 <= self.score_drop <= 1.0:
            raise ValueError("score_drop must lie in [0, 1]")
        if not 0.0 <= self.false_score <= 1.0:
            raise ValueError("false_score must lie in [0, 1]")
        if self.noise_sigma < 0 or self.score_jitter < 0:
            raise ValueError("noise parameters must be >= 0")
        if not 0.0 <= self.occlusion < 1.0:
            raise ValueError("occlusion must lie in [0, 1)")

    @property
    def window(self) -> range:
        return range(self.onset, self.onset + self.duration)


@dataclass
class AttackLedger:
    """Which ground-truth boxes were attacked, frame by frame."""

    n_frames: int
    total_gt: int
    marks: set[tuple[int, int]] = field(default_factory=set)  # (frame, gt id)

    @property
    def p_n(self) -> int:
        """Total count of attacked ground-truth boxes."""
        return len(self.marks)

    @property
    def r_bbox(self) -> float:
        """Fraction of all ground-truth boxes that were attacked."""
        if self.total_gt == 0:
            return 0.0
        return self.p_n / self.total_gt

    def attacked_frames(self) -> list[int]:
        return sorted({f for f, _ in self.marks})

    def longest_run(self) -> int:
        """Length of the longest consecutive run of attacked frames (the T
        that scales the identity-obfuscation metric)."""
        frames = self.attacked_frames()
        best = run = 0
        prev = None
        for f in frames:
            run = run + 1 if prev is not None and f == prev + 1 else 1
            best = max(best, run)
            prev = f
        return best

    def to_csv(self) -> str:
        lines = ["frame,gt_id"] + [f"{f},{g}" for f, g in sorted(self.marks)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, n_frames: int, total_gt: int) -> "AttackLedger":
        lines = text.splitlines()
        if not lines or lines[0] != "frame,gt_id":
            raise ValueError("ledger CSV must start with 'frame,gt_id'")
        marks = set()
        for line in lines[1:]:
            if not line.strip():
                continue
            f, g = line.split(",")
            marks.add((int(f), int(g)))
        return cls(n_frames=n_frames, total_gt=total_gt, marks=marks)


def place_false_box(victim: BBox, kappa: float, dims: FrameDims, tol: float = 1e-4) -> BBox:
    """Same-size box at a horizontal offset chosen so its IoU with the victim
    hits kappa. The offset is found by bisection; the box is pushed toward
    the roomier side of the frame so clipping cannot starve the search."""
    if not 0.0 < kappa < 1.0:
        raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
    direction = 1.0 if victim.cx <= dims.width / 2.0 else -1.0

    def iou_at(d: float) -> float:
        return iou(victim, clip_to_frame(victim.shifted(direction * d, 0.0), dims))

    lo, hi = 0.0, victim.w  # iou_at(lo) = 1, iou_at(hi) = 0
    for _ in range(200):
        mid = (lo + hi) / 2.0
        val = iou_at(mid)
        if abs(val - kappa) <= tol:
            lo = hi = mid
            break
        if val > kappa:
            lo = mid
        else:
            hi = mid
    d = (lo + hi) / 2.0
    return clip_to_frame(victim.shifted(direction * d, 0.0), dims)


def place_patch(victim: BBox) -> BBox:
    """Square patch region covering one third of the victim's area, centred
    horizontally at the upper torso (0.3 of the height down), clipped to the
    victim box."""
    if victim.area <= 0:
        raise ValueError("victim box must have positive area")
    side = math.sqrt(victim.area / 3.0)
    cx = victim.cx
    cy = victim.y + 0.3 * victim.h
    patch = BBox(cx - side / 2.0, cy - side / 2.0, side, side)
    # clip to the victim box
    x1 = max(patch.x, victim.x)
    y1 = max(patch.y, victim.y)
    x2 = min(patch.x2, victim.x2)
    y2 = min(patch.y2, victim.y2)
    return BBox(x1, y1, max(0.0, x2 - x1), max(0.0, y2 - y1))


def _gt_by_frame(gt: Sequence[MotRecord]) -> dict[int, list[MotRecord]]:
    out: dict[int, list[MotRecord]] = {}
    for rec in gt:
        out.setdefault(rec.frame, []).append(rec)
    return out


def _victim_box(gt_frame: list[MotRecord], victim_id: int) -> BBox | None:
    for rec in gt_frame:
        if rec.track_id == victim_id:
            return rec.bbox
    return None


def _closest_det(dets: list[Detection], box: BBox) -> int | None:
    """Index of the genuine detection best overlapping the box, if any."""
    best, best_iou = None, 0.0
    for i, d in enumerate(dets):
        if d.source != "genuine":
            continue
        v = iou(d.box, box)
        if v > best_iou:
            best, best_iou = i, v
    return best


def inject(
    detections: Sequence[Detection],
    gt: Sequence[MotRecord],
    cfg: AttackConfig,
    dims: FrameDims,
) -> tuple[list[Detection], AttackLedger]:
    """Apply the configured attack to a clean detection stream.

    Returns the perturbed stream (genuine detections are rescored or moved,
    never deleted) and the ledger of attacked ground-truth boxes.
    """
    gt_frames = _gt_by_frame(gt)
    n_frames = max(gt_frames) if gt_frames else 0
    window = cfg.window
    if window.start < 1 or window.stop - 1 > n_frames:
        raise ValueError(
            f"attack window [{window.start}, {window.stop}) falls outside the "
            f"sequence of {n_frames} frames"
        )
    if cfg.mode in ("id_hijack", "detector_only", "control_blank"):
        for f in window:
            for vid in cfg.victim_ids:
                if _victim_box(gt_frames.get(f, []), vid) is None:
                    raise ValueError(f"victim id {vid} missing from ground truth at frame {f}")

    rng = np.random.default_rng(cfg.seed)
    by_frame: dict[int, list[Detection]] = {f: [] for f in range(1, n_frames + 1)}
    touched: dict[int, list[Detection]] = {f: [] for f in range(1, n_frames + 1)}
    for d in detections:
        by_frame.setdefault(d.frame, []).append(d)
        touched.setdefault(d.frame, [])

    if cfg.mode in ("id_hijack", "detector_only"):
        # the false box locks onto where the patch first fooled the detector
        ghosts = {
            vid: place_false_box(_victim_box(gt_frames[cfg.onset], vid), cfg.kappa_iou, dims)
            for vid in cfg.victim_ids
        }

    for f in window:
        dets = by_frame.get(f, [])
        if cfg.mode == "id_hijack":
            for vid in cfg.victim_ids:
                gt_box = _victim_box(gt_frames[f], vid)
                di = _closest_det(dets, gt_box)
                if di is not None:
                    old = dets[di]
                    dets[di] = Detection(old.box, old.score * cfg.score_drop, f, "genuine")
                    touched[f].append(dets[di])
                ghost = Detection(ghosts[vid], cfg.false_score, f, "injected")
                dets.append(ghost)
                touched[f].append(ghost)
        elif cfg.mode == "detector_only":
            for vid in cfg.victim_ids:
                ghost = Detection(ghosts[vid], cfg.false_score, f, "injected")
                dets.append(ghost)
                touched[f].append(ghost)
        elif cfg.mode == "noise_jitter":
            for i, d in enumerate(dets):
                dx, dy = rng.normal(0.0, cfg.noise_sigma, size=2)
                dw, dh = rng.normal(0.0, cfg.noise_sigma / 2.0, size=2)
                box = BBox(d.box.x + dx, d.box.y + dy,
                           max(1.0, d.box.w + dw), max(1.0, d.box.h + dh))
                box = clip_to_frame(box, dims)
                score = float(np.clip(d.score + rng.normal(0.0, cfg.score_jitter), 0.0, 1.0))
                dets[i] = Detection(box, score, f, d.source)
                touched[f].append(dets[i])
        elif cfg.mode == "control_blank":
            scale = math.sqrt(1.0 - cfg.occlusion)
            for vid in cfg.victim_ids:
                gt_box = _victim_box(gt_frames[f], vid)
                di = _closest_det(dets, gt_box)
                if di is None:
                    continue
                old = dets[di]
                b = old.box
                nw, nh = b.w * scale, b.h * scale
                shrunk = BBox(b.cx - nw / 2.0, b.cy - nh / 2.0, nw, nh)
                dets[di] = Detection(shrunk, old.score, f, "genuine")
                touched[f].append(dets[di])

    ledger = AttackLedger(n_frames=n_frames, total_gt=len(gt))
    for f, changed in touched.items():
        if not changed:
            continue
        for rec in gt_frames.get(f, []):
            if any(iou(c.box, rec.bbox) > ATTACKED_IOU for c in changed):
                ledger.marks.add((f, rec.track_id))

    perturbed = [d for f in sorted(by_frame) for d in by_frame[f]]
    return perturbed, ledger
