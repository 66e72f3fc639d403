"""Scoring: CLEAR-style accumulation, IDF1, and the attack metrics."""

from itertools import permutations

import numpy as np
import pytest

from motpatch.attack import AttackLedger
from motpatch.geometry import BBox
from motpatch.io import MotRecord
from motpatch.metrics import (
    MetricsReport,
    build_report,
    ior,
    score,
    stasr,
    tasr,
    victim_false_positives,
    victim_switches,
)

A = BBox(0, 0, 10, 10)
A_NEAR = BBox(2.5, 0, 10, 10)  # IoU vs A: 7.5/12.5 = 0.6
A_FAR = BBox(5, 0, 10, 10)  # IoU vs A: 5/15 = 1/3, below the match threshold
B = BBox(50, 0, 10, 10)
C = BBox(100, 0, 10, 10)


def rec(frame: int, tid: int, box: BBox) -> MotRecord:
    return MotRecord.from_box(frame, tid, box)


def track(tid: int, box: BBox, frames) -> list[MotRecord]:
    return [rec(f, tid, box) for f in frames]


def test_attack_metric_formulas_exact():
    assert tasr(20.0, 10.0, 0.5) == 30.0
    assert ior(5, 100, 20) == 100.0
    assert stasr(8, 2, 5.0, 15.0) == 50.0


def test_tasr_doubles_when_attack_ratio_halves():
    assert tasr(20.0, 10.0, 0.25) == 2.0 * tasr(20.0, 10.0, 0.5)
    assert tasr(12.0, 4.0, 0.125) == 2.0 * tasr(12.0, 4.0, 0.25)


def test_attack_metric_error_branches():
    with pytest.raises(ValueError, match="r_bbox = 0"):
        tasr(10.0, 10.0, 0.0)
    with pytest.raises(ValueError, match="ratio"):
        tasr(10.0, 10.0, 1.5)
    with pytest.raises(ValueError, match="t = 0"):
        ior(3, 100, 0)
    with pytest.raises(ValueError, match="cannot exceed"):
        ior(3, 10, 20)
    with pytest.raises(ValueError, match="ceiling"):
        stasr(1, 1, 0.0, 0.0)


def test_perfect_tracking_scores_100():
    gt = track(1, A, range(1, 11)) + track(2, B, range(1, 11))
    s = score(gt, gt)
    assert (s.mota, s.idf1) == (100.0, 100.0)
    assert (s.fp, s.fn, s.idsw) == (0, 0, 0)


def test_mota_accumulates_fp_fn_idsw():
    gt = track(1, A, range(1, 11))
    hyp = track(1, A, range(1, 6)) + track(2, A, range(6, 11))
    s = score(gt, hyp)
    assert (s.fp, s.fn, s.idsw) == (0, 0, 1)
    assert s.mota == 100.0 * (1.0 - 1 / 10)
    assert s.switches == [(6, 1, 1, 2)]
    # one id covers half the trajectory, so IDF1 lands at 50
    assert s.idf1 == 50.0


def test_missed_and_false_boxes_count():
    gt = track(1, A, range(1, 11))
    hyp = track(1, A, range(1, 9)) + track(9, C, [3])
    s = score(gt, hyp)
    assert (s.fp, s.fn, s.idsw) == (1, 2, 0)
    assert s.mota == 100.0 * (1.0 - 3 / 10)


def test_empty_hypothesis_is_all_misses():
    gt = track(1, A, range(1, 6))
    s = score(gt, [])
    assert (s.fp, s.fn, s.idsw) == (0, 5, 0)
    assert s.mota == 0.0 and s.idf1 == 0.0
    with pytest.raises(ValueError):
        score([], gt)


def test_persistence_keeps_yesterdays_pairing():
    # Frame 2 offers a better-overlapping impostor; the standing pair stays
    # while it clears the threshold, so no switch is charged.
    gt = track(1, A, [1, 2])
    hyp = [rec(1, 1, A), rec(2, 1, A_NEAR), rec(2, 2, A)]
    s = score(gt, hyp)
    assert (s.fp, s.fn, s.idsw) == (1, 0, 0)
    frame2 = next(m for m in s.matching if m.frame == 2)
    assert frame2.pairs == [(1, 1)]
    assert frame2.false_hyp == [2]


def test_persistence_breaks_below_threshold():
    gt = track(1, A, [1, 2])
    hyp = [rec(1, 1, A), rec(2, 1, A_FAR), rec(2, 2, A)]
    s = score(gt, hyp)
    frame2 = next(m for m in s.matching if m.frame == 2)
    assert frame2.pairs == [(1, 2)]
    assert s.idsw == 1


def test_hypothesis_relabeling_changes_nothing():
    gt = track(1, A, range(1, 7)) + track(2, B, range(1, 7))
    hyp = track(1, A, range(1, 4)) + track(5, A, range(4, 7)) + track(2, B, range(1, 7))
    relabeled = [rec(r.frame, {1: 11, 5: 55, 2: 22}[r.track_id], r.bbox) for r in hyp]
    s1, s2 = score(gt, hyp), score(gt, relabeled)
    assert (s1.mota, s1.idf1, s1.fp, s1.fn, s1.idsw) == (s2.mota, s2.idf1, s2.fp, s2.fn, s2.idsw)


def idf1_oracle(gt, hyp):
    """Exhaustive search over one-to-one trajectory mappings."""
    g_ids = sorted({r.track_id for r in gt})
    h_ids = sorted({r.track_id for r in hyp})
    if not g_ids or not h_ids:
        return 0.0
    from motpatch.geometry import iou

    counts = {}
    by_frame = {}
    for r in hyp:
        by_frame.setdefault(r.frame, []).append(r)
    for rg in gt:
        for rh in by_frame.get(rg.frame, []):
            if iou(rg.bbox, rh.bbox) >= 0.5:
                key = (rg.track_id, rh.track_id)
                counts[key] = counts.get(key, 0) + 1
    if len(g_ids) <= len(h_ids):
        best = max(
            sum(counts.get((g, p), 0) for g, p in zip(g_ids, perm))
            for perm in permutations(h_ids, len(g_ids))
        )
    else:
        best = max(
            sum(counts.get((p, h), 0) for p, h in zip(perm, h_ids))
            for perm in permutations(g_ids, len(h_ids))
        )
    return 100.0 * 2.0 * best / (len(gt) + len(hyp))


def test_idf1_matches_exhaustive_oracle_on_random_cases():
    rng = np.random.default_rng(17)
    palette = [A, A_NEAR, B, C]
    for _ in range(60):
        gt, hyp = [], []
        for f in range(1, 7):
            for tid in (1, 2, 3):
                if rng.random() < 0.7:
                    gt.append(rec(f, tid, palette[rng.integers(4)]))
            for tid in (11, 12, 13):
                if rng.random() < 0.7:
                    hyp.append(rec(f, tid, palette[rng.integers(4)]))
        if not gt:
            gt = [rec(1, 1, A)]
        assert score(gt, hyp).idf1 == idf1_oracle(gt, hyp)


def test_build_report_derives_metrics_from_scores():
    gt = track(1, A, range(1, 21)) + track(2, B, range(1, 21))
    clean = [rec(r.frame, r.track_id + 10, r.bbox) for r in gt]
    attacked = (
        track(11, A, range(1, 11)) + track(31, A, range(11, 21))
        + track(12, B, range(1, 21)) + track(40, C, range(5, 9))
    )
    ledger = AttackLedger(n_frames=20, total_gt=len(gt),
                          marks={(f, 1) for f in range(5, 15)})
    rep = build_report(gt, clean, attacked, ledger)
    assert rep.n_frames == 20
    assert rep.r_bbox == 10 / 40
    assert rep.t_run == 10 and rep.p_t == 2.0 and rep.p_n == 10 and rep.a_max == 12.0
    assert rep.tasr == tasr(rep.mota_clean - rep.mota_attacked,
                            rep.idf1_clean - rep.idf1_attacked, rep.r_bbox)
    assert rep.ior == ior(rep.d_s, 20, 10)
    assert rep.stasr == stasr(rep.fp_attacked - rep.fp_clean,
                              rep.idsw_attacked - rep.idsw_clean, 2.0, 10)
    assert rep.d_s == rep.idsw_attacked == 1
    assert rep.fp_attacked - rep.fp_clean == 4


def test_build_report_zero_fallbacks_on_empty_ledger():
    gt = track(1, A, range(1, 6))
    ledger = AttackLedger(n_frames=5, total_gt=5)
    rep = build_report(gt, gt, gt, ledger)
    assert (rep.tasr, rep.ior, rep.stasr) == (0.0, 0.0, 0.0)
    assert (rep.r_bbox, rep.p_n, rep.t_run, rep.p_t, rep.a_max) == (0.0, 0, 0, 0.0, 0.0)
    assert rep.mota_clean == rep.mota_attacked == 100.0


def test_victim_switch_and_fp_restriction():
    gt = track(1, A, range(1, 7)) + track(2, B, range(1, 7))
    attacked = (
        track(11, A, range(1, 4)) + track(33, A, range(4, 7))  # switch on victim 1
        + track(12, B, range(1, 4)) + track(44, B, range(4, 7))  # switch on bystander 2
        + [rec(2, 70, A_FAR)]  # false box overlapping victim 1 only
    )
    s = score(gt, attacked)
    assert s.idsw == 2
    assert victim_switches(s, [1]) == 1
    assert victim_switches(s, [1, 2]) == 2
    assert victim_false_positives(s, gt, attacked, [1]) == 1
    assert victim_false_positives(s, gt, attacked, [2]) == 0

    clean = [rec(r.frame, r.track_id + 10, r.bbox) for r in gt]
    ledger = AttackLedger(n_frames=6, total_gt=len(gt), marks={(f, 1) for f in range(1, 7)})
    focused = build_report(gt, clean, attacked, ledger, victim_ids=(1,),
                           restrict_stasr_to_victims=True, restrict_ior_to_victims=True)
    broad = build_report(gt, clean, attacked, ledger, victim_ids=(1,),
                         restrict_stasr_to_victims=False, restrict_ior_to_victims=False)
    assert focused.d_s == 1 and broad.d_s == 2
    assert focused.stasr == stasr(1, 1, focused.p_t, focused.p_n)
    assert broad.stasr == stasr(1, 2, broad.p_t, broad.p_n)


def test_report_csv_shape():
    gt = track(1, A, range(1, 6))
    rep = build_report(gt, gt, gt, AttackLedger(n_frames=5, total_gt=5))
    text = rep.to_csv()
    header, row, tail = text.split("\n")
    assert header == MetricsReport.CSV_FIELDS
    assert tail == ""
    fields = row.split(",")
    assert len(fields) == len(header.split(",")) == 20
    assert float(fields[1]) == 100.0  # mota_clean
