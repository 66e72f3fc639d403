"""Tracking quality scores and attack-impact metrics.

score() runs the classic frame-by-frame evaluation: correspondences from the
previous frame are kept while they still overlap enough, leftovers are
matched by a minimum-cost assignment at IoU >= 0.5, and FP/FN/identity
switches accumulate into MOTA. IDF1 comes from a global trajectory-level
assignment. On top of those sit the three attack metrics:

TASR   tracking attack success rate: (MOTA decline + IDF1 decline) over
       twice the fraction of attacked ground-truth boxes.
IOR    identity obfuscation rate: identity switches relative to the ceiling
       N/T set by the longest consecutively attacked stretch.
STASR  specific-target attack success rate: FP and switch increases over the
       ceiling P_t + P_n.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .assignment import CostMatrix, solve
from .attack import ATTACKED_IOU, AttackLedger
from .geometry import iou, iou_matrix
from .io import MotRecord

MATCH_IOU = 0.5  # gt/hypothesis correspondence threshold


@dataclass(frozen=True)
class FrameMatching:
    frame: int
    pairs: list[tuple[int, int]]  # (gt id, hyp id)
    missed_gt: list[int]
    false_hyp: list[int]


@dataclass
class MotScores:
    mota: float
    idf1: float
    fp: int
    fn: int
    idsw: int
    n_gt: int
    n_hyp: int
    switches: list[tuple[int, int, int, int]] = field(default_factory=list)  # frame, gt, old, new
    matching: list[FrameMatching] = field(default_factory=list)


def _by_frame(records: Sequence[MotRecord]) -> dict[int, list[MotRecord]]:
    out: dict[int, list[MotRecord]] = {}
    for r in records:
        out.setdefault(r.frame, []).append(r)
    for f in out:
        out[f] = sorted(out[f], key=lambda r: r.track_id)
    return out


def score(gt: Sequence[MotRecord], hyp: Sequence[MotRecord]) -> MotScores:
    """Evaluate a result stream against ground truth."""
    if not gt:
        raise ValueError("ground truth must not be empty")
    gt_frames = _by_frame(gt)
    hyp_frames = _by_frame(hyp)
    frames = sorted(set(gt_frames) | set(hyp_frames))

    fp = fn = idsw = 0
    prev_pairs: dict[int, int] = {}
    last_known: dict[int, int] = {}
    switches: list[tuple[int, int, int, int]] = []
    matching: list[FrameMatching] = []

    for f in frames:
        gts = gt_frames.get(f, [])
        hyps = hyp_frames.get(f, [])
        g_ids = [r.track_id for r in gts]
        h_ids = [r.track_id for r in hyps]
        ious = iou_matrix([r.bbox for r in gts], [r.bbox for r in hyps])

        pairs: dict[int, int] = {}
        used_g: set[int] = set()
        used_h: set[int] = set()
        # persistence: keep last frame's pairing while it still holds up
        for gid, hid in prev_pairs.items():
            if gid in g_ids and hid in h_ids:
                gi, hi = g_ids.index(gid), h_ids.index(hid)
                if ious[gi, hi] >= MATCH_IOU:
                    pairs[gid] = hid
                    used_g.add(gi)
                    used_h.add(hi)
        free_g = [i for i in range(len(gts)) if i not in used_g]
        free_h = [i for i in range(len(hyps)) if i not in used_h]
        if free_g and free_h:
            sub = 1.0 - ious[np.ix_(free_g, free_h)]
            res = solve(CostMatrix(sub, gate=1.0 - MATCH_IOU))
            for r, c in res.matches:
                pairs[g_ids[free_g[r]]] = h_ids[free_h[c]]
                used_g.add(free_g[r])
                used_h.add(free_h[c])

        for gid, hid in pairs.items():
            old = last_known.get(gid)
            if old is not None and old != hid:
                idsw += 1
                switches.append((f, gid, old, hid))
            last_known[gid] = hid

        f_fn = len(gts) - len(pairs)
        f_fp = len(hyps) - len(pairs)
        fn += f_fn
        fp += f_fp
        matching.append(
            FrameMatching(
                frame=f,
                pairs=sorted(pairs.items()),
                missed_gt=sorted(gid for i, gid in enumerate(g_ids) if i not in used_g),
                false_hyp=sorted(hid for i, hid in enumerate(h_ids) if i not in used_h),
            )
        )
        prev_pairs = pairs

    n_gt = len(gt)
    n_hyp = len(hyp)
    mota = 100.0 * (1.0 - (fp + fn + idsw) / n_gt)
    idf1 = _idf1(gt_frames, hyp_frames, n_gt, n_hyp)
    return MotScores(mota=mota, idf1=idf1, fp=fp, fn=fn, idsw=idsw,
                     n_gt=n_gt, n_hyp=n_hyp, switches=switches, matching=matching)


def _idf1(gt_frames, hyp_frames, n_gt: int, n_hyp: int) -> float:
    """Identity F1: global one-to-one trajectory matching maximising the
    number of frames where the paired boxes overlap at the match threshold."""
    g_ids = sorted({r.track_id for rows in gt_frames.values() for r in rows})
    h_ids = sorted({r.track_id for rows in hyp_frames.values() for r in rows})
    if not g_ids or not h_ids:
        return 0.0
    overlap = np.zeros((len(g_ids), len(h_ids)))
    g_pos = {g: i for i, g in enumerate(g_ids)}
    h_pos = {h: i for i, h in enumerate(h_ids)}
    for f in set(gt_frames) & set(hyp_frames):
        for rg in gt_frames[f]:
            for rh in hyp_frames[f]:
                if iou(rg.bbox, rh.bbox) >= MATCH_IOU:
                    overlap[g_pos[rg.track_id], h_pos[rh.track_id]] += 1.0
    peak = overlap.max()
    res = solve(CostMatrix(peak - overlap))
    idtp = sum(overlap[r, c] for r, c in res.matches)
    return 100.0 * 2.0 * idtp / (n_gt + n_hyp)


# ---------------------------------------------------------------------------
# attack metrics


def tasr(mota_decline: float, idf1_decline: float, r_bbox: float) -> float:
    """(MOTA decline + IDF1 decline) / (2 * attacked-box ratio)."""
    if r_bbox <= 0.0:
        raise ValueError("tasr undefined: no ground-truth box was attacked (r_bbox = 0)")
    if r_bbox > 1.0:
        raise ValueError(f"r_bbox is a ratio in (0, 1], got {r_bbox}")
    return (mota_decline + idf1_decline) / (2.0 * r_bbox)


def ior(d_s: float, n_frames: int, t: int) -> float:
    """100 * D_s / P_t with P_t = N / T.

    T is the longest consecutively attacked stretch; P_t caps how many
    switches such a stretch could cause."""
    if t < 1:
        raise ValueError("ior undefined: no attacked frames (t = 0)")
    if n_frames < t:
        raise ValueError(f"t = {t} cannot exceed n_frames = {n_frames}")
    p_t = n_frames / t
    return 100.0 * d_s / p_t


def stasr(fp_increase: float, idsw_increase: float, p_t: float, p_n: float) -> float:
    """100 * (FP increase + switch increase) / (P_t + P_n)."""
    a_max = p_t + p_n
    if a_max <= 0.0:
        raise ValueError("stasr undefined: attack ceiling P_t + P_n is zero")
    return 100.0 * (fp_increase + idsw_increase) / a_max


# ---------------------------------------------------------------------------
# run-level report


@dataclass(frozen=True)
class MetricsReport:
    n_frames: int
    mota_clean: float
    mota_attacked: float
    idf1_clean: float
    idf1_attacked: float
    fp_clean: int
    fp_attacked: int
    fn_clean: int
    fn_attacked: int
    idsw_clean: int
    idsw_attacked: int
    r_bbox: float
    p_n: int
    t_run: int
    p_t: float
    a_max: float
    d_s: int
    tasr: float
    ior: float
    stasr: float

    CSV_FIELDS = (
        "n_frames,mota_clean,mota_attacked,idf1_clean,idf1_attacked,"
        "fp_clean,fp_attacked,fn_clean,fn_attacked,idsw_clean,idsw_attacked,"
        "r_bbox,p_n,t_run,p_t,a_max,d_s,tasr,ior,stasr"
    )

    def to_csv_row(self) -> str:
        vals = [
            str(self.n_frames),
            "%.6f" % self.mota_clean,
            "%.6f" % self.mota_attacked,
            "%.6f" % self.idf1_clean,
            "%.6f" % self.idf1_attacked,
            str(self.fp_clean),
            str(self.fp_attacked),
            str(self.fn_clean),
            str(self.fn_attacked),
            str(self.idsw_clean),
            str(self.idsw_attacked),
            "%.6f" % self.r_bbox,
            str(self.p_n),
            str(self.t_run),
            "%.6f" % self.p_t,
            "%.6f" % self.a_max,
            str(self.d_s),
            "%.6f" % self.tasr,
            "%.6f" % self.ior,
            "%.6f" % self.stasr,
        ]
        return ",".join(vals)

    def to_csv(self) -> str:
        return self.CSV_FIELDS + "\n" + self.to_csv_row() + "\n"


def victim_switches(scores: MotScores, victim_ids: Sequence[int]) -> int:
    vids = set(victim_ids)
    return sum(1 for _, gid, _, _ in scores.switches if gid in vids)


def victim_false_positives(
    scores: MotScores,
    gt: Sequence[MotRecord],
    hyp: Sequence[MotRecord],
    victim_ids: Sequence[int],
) -> int:
    """False positives that overlap a victim's ground-truth box (IoU above
    the attacked threshold) in their frame."""
    vids = set(victim_ids)
    gt_frames = _by_frame([r for r in gt if r.track_id in vids])
    hyp_lookup = {(r.frame, r.track_id): r.bbox for r in hyp}
    count = 0
    for fm in scores.matching:
        victims = gt_frames.get(fm.frame, [])
        if not victims:
            continue
        for hid in fm.false_hyp:
            box = hyp_lookup.get((fm.frame, hid))
            if box is None:
                continue
            if any(iou(box, v.bbox) > ATTACKED_IOU for v in victims):
                count += 1
    return count


def build_report(
    gt: Sequence[MotRecord],
    clean_hyp: Sequence[MotRecord],
    attacked_hyp: Sequence[MotRecord],
    ledger: AttackLedger,
    victim_ids: Sequence[int] = (),
    restrict_stasr_to_victims: bool = True,
    restrict_ior_to_victims: bool = False,
) -> MetricsReport:
    """Score the clean and attacked runs and derive the attack metrics.

    When nothing was attacked (empty ledger) the attack metrics are reported
    as zero rather than undefined."""
    s_clean = score(gt, clean_hyp)
    s_att = score(gt, attacked_hyp)
    mota_decline = s_clean.mota - s_att.mota
    idf1_decline = s_clean.idf1 - s_att.idf1

    r_bbox = ledger.r_bbox
    t_run = ledger.longest_run()
    n_frames = ledger.n_frames
    p_n = ledger.p_n
    p_t = (n_frames / t_run) if t_run > 0 else 0.0
    a_max = p_t + p_n

    tasr_val = tasr(mota_decline, idf1_decline, r_bbox) if r_bbox > 0 else 0.0

    if restrict_ior_to_victims and victim_ids:
        d_s = victim_switches(s_att, victim_ids)
    else:
        d_s = s_att.idsw
    ior_val = ior(d_s, n_frames, t_run) if t_run > 0 else 0.0

    if restrict_stasr_to_victims and victim_ids:
        fp_inc = victim_false_positives(s_att, gt, attacked_hyp, victim_ids) - victim_false_positives(
            s_clean, gt, clean_hyp, victim_ids
        )
        sw_inc = victim_switches(s_att, victim_ids) - victim_switches(s_clean, victim_ids)
    else:
        fp_inc = s_att.fp - s_clean.fp
        sw_inc = s_att.idsw - s_clean.idsw
    stasr_val = stasr(fp_inc, sw_inc, p_t, p_n) if a_max > 0 else 0.0

    return MetricsReport(
        n_frames=n_frames,
        mota_clean=s_clean.mota,
        mota_attacked=s_att.mota,
        idf1_clean=s_clean.idf1,
        idf1_attacked=s_att.idf1,
        fp_clean=s_clean.fp,
        fp_attacked=s_att.fp,
        fn_clean=s_clean.fn,
        fn_attacked=s_att.fn,
        idsw_clean=s_clean.idsw,
        idsw_attacked=s_att.idsw,
        r_bbox=r_bbox,
        p_n=p_n,
        t_run=t_run,
        p_t=p_t,
        a_max=a_max,
        d_s=d_s,
        tasr=tasr_val,
        ior=ior_val,
        stasr=stasr_val,
    )
