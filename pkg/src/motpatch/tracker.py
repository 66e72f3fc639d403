"""Tracking-by-detection with two-stage score-split association.

High-score detections are associated first against every live track
(tentative, confirmed and lost alike); leftovers with lower scores get a
second, tighter pass against the tracks that stage one left unmatched.
Unmatched high-score detections spawn new tracks. This is the ByteTrack-style
recipe; all thresholds live in TrackerConfig.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kalman
from .assignment import CostMatrix, solve
from .geometry import BBox, iou_matrix


@dataclass(frozen=True)
class Detection:
    """One detector output: a box with a confidence score, tagged by origin."""

    box: BBox
    score: float
    frame: int = 1
    source: str = "genuine"  # "genuine" or "injected"

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")
        if self.frame < 1:
            raise ValueError(f"frame index must be >= 1, got {self.frame}")
        if self.source not in ("genuine", "injected"):
            raise ValueError(f"unknown detection source {self.source!r}")


@dataclass(frozen=True)
class TrackerConfig:
    tau_high: float = 0.6  # stage-1 score threshold
    tau_low: float = 0.1  # stage-2 floor; below this a detection is ignored
    iou_gate_1: float = 0.2  # minimum IoU for a stage-1 match
    iou_gate_2: float = 0.5  # minimum IoU for a stage-2 match
    max_age: int = 30  # frames a track survives without a match
    min_hits: int = 3  # consecutive matches before a track is confirmed
    kalman_params: kalman.KalmanParams = field(default_factory=kalman.KalmanParams)

    def __post_init__(self):
        if not 0.0 <= self.tau_low <= self.tau_high <= 1.0:
            raise ValueError("need 0 <= tau_low <= tau_high <= 1")
        if not (0.0 <= self.iou_gate_1 <= 1.0 and 0.0 <= self.iou_gate_2 <= 1.0):
            raise ValueError("iou gates must lie in [0, 1]")
        if self.max_age < 1 or self.min_hits < 1:
            raise ValueError("max_age and min_hits must be >= 1")


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    LOST = "lost"


@dataclass
class Track:
    track_id: int
    state: kalman.KalmanState
    status: TrackStatus
    score: float
    hits: int = 1
    hit_streak: int = 1
    frames_since_update: int = 0

    def predicted_box(self) -> BBox:
        return self.state.box()


@dataclass(frozen=True)
class ResultRow:
    frame: int
    track_id: int
    box: BBox
    score: float


@dataclass
class TrackingResult:
    rows: list[ResultRow]
    n_frames: int

    def frame_rows(self, frame: int) -> list[ResultRow]:
        return [r for r in self.rows if r.frame == frame]

    def track_ids(self) -> list[int]:
        return sorted({r.track_id for r in self.rows})


class Tracker:
    """Stateful tracker; feed one frame of detections at a time via step()."""

    def __init__(self, cfg: TrackerConfig | None = None):
        self.cfg = cfg or TrackerConfig()
        self.tracks: list[Track] = []
        self.frame_idx = 0
        self.next_id = 1
        # diagnostics for the latest step: (track_id, det_index, iou, stage)
        self.last_matches: list[tuple[int, int, float, int]] = []

    def step(self, detections: Sequence[Detection]) -> list[ResultRow]:
        self.frame_idx += 1
        for d in detections:
            if d.frame != self.frame_idx:
                raise ValueError(
                    f"detection frame {d.frame} does not match tracker frame {self.frame_idx}; "
                    "frames must be fed consecutively"
                )

        cfg = self.cfg
        for t in self.tracks:
            t.state = kalman.predict(t.state, cfg.kalman_params)

        det_idx = list(range(len(detections)))
        high = [i for i in det_idx if detections[i].score >= cfg.tau_high]
        low = [i for i in det_idx if cfg.tau_low <= detections[i].score < cfg.tau_high]

        self.last_matches = []
        matched_tracks: set[int] = set()
        matched_dets: set[int] = set()

        # stage 1: high-score detections vs every live track
        self._associate(detections, high, list(range(len(self.tracks))),
                        cfg.iou_gate_1, 1, matched_tracks, matched_dets)
        # stage 2: low-score detections vs the tracks stage 1 left behind
        leftover = [ti for ti in range(len(self.tracks)) if ti not in matched_tracks]
        self._associate(detections, low, leftover,
                        cfg.iou_gate_2, 2, matched_tracks, matched_dets)

        # lifecycle for unmatched tracks
        survivors: list[Track] = []
        for ti, t in enumerate(self.tracks):
            if ti in matched_tracks:
                survivors.append(t)
                continue
            t.frames_since_update += 1
            t.hit_streak = 0
            if t.status is TrackStatus.TENTATIVE:
                continue  # an unconfirmed track dies on its first miss
            t.status = TrackStatus.LOST
            if t.frames_since_update <= cfg.max_age:
                survivors.append(t)
        self.tracks = survivors

        # spawn from unmatched stage-1 detections, in input order
        for i in high:
            if i in matched_dets:
                continue
            d = detections[i]
            self.tracks.append(
                Track(
                    track_id=self.next_id,
                    state=kalman.initiate(d.box, cfg.kalman_params),
                    status=TrackStatus.TENTATIVE,
                    score=d.score,
                )
            )
            self.next_id += 1

        # confirmation happens after spawning so brand-new tracks stay tentative
        for t in self.tracks:
            if t.status is TrackStatus.TENTATIVE and t.hit_streak >= cfg.min_hits:
                t.status = TrackStatus.CONFIRMED

        out = []
        grace = self.frame_idx <= cfg.min_hits
        for t in self.tracks:
            if t.frames_since_update != 0:
                continue
            if t.status is TrackStatus.CONFIRMED or grace:
                out.append(ResultRow(self.frame_idx, t.track_id, t.state.box(), t.score))
        out.sort(key=lambda r: r.track_id)
        return out

    def _associate(self, detections, det_indices, track_indices, iou_gate, stage,
                   matched_tracks, matched_dets):
        if not det_indices or not track_indices:
            return
        t_boxes = [self.tracks[ti].predicted_box() for ti in track_indices]
        d_boxes = [detections[di].box for di in det_indices]
        ious = iou_matrix(t_boxes, d_boxes)
        result = solve(CostMatrix(1.0 - ious, gate=1.0 - iou_gate))
        for r, c in result.matches:
            ti, di = track_indices[r], det_indices[c]
            t, d = self.tracks[ti], detections[di]
            t.state = kalman.update(t.state, d.box, self.cfg.kalman_params)
            t.score = d.score
            t.hits += 1
            t.hit_streak += 1
            t.frames_since_update = 0
            if t.status is TrackStatus.LOST:
                t.status = TrackStatus.CONFIRMED
            matched_tracks.add(ti)
            matched_dets.add(di)
            self.last_matches.append((t.track_id, di, float(ious[r, c]), stage))


def run_sequence(
    frames: Iterable[Sequence[Detection]],
    cfg: TrackerConfig | None = None,
    start_frame: int = 1,
) -> TrackingResult:
    """Track a whole sequence. frames[k] holds the detections of frame
    start_frame + k; every detection must carry that frame index."""
    if start_frame < 1:
        raise ValueError("start_frame must be >= 1")
    tracker = Tracker(cfg)
    tracker.frame_idx = start_frame - 1
    rows: list[ResultRow] = []
    n = start_frame - 1
    for dets in frames:
        rows.extend(tracker.step(dets))
        n += 1
    return TrackingResult(rows=rows, n_frames=n)


def group_by_frame(detections: Sequence[Detection], n_frames: int) -> list[list[Detection]]:
    """Bucket a flat detection list into per-frame lists for run_sequence."""
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    buckets: list[list[Detection]] = [[] for _ in range(n_frames)]
    for d in detections:
        if d.frame > n_frames:
            raise ValueError(f"detection frame {d.frame} beyond n_frames={n_frames}")
        buckets[d.frame - 1].append(d)
    return buckets
