"""Constant-velocity filter behavior on noiseless synthetic tracks."""

import numpy as np
import pytest

from motpatch.geometry import BBox, iou, to_xyah
from motpatch.kalman import KalmanParams, initiate, predict, update


def cv_box(t: int) -> BBox:
    """Box translating at (3, 2) px/frame with fixed size."""
    return BBox(100 + 3.0 * t, 80 + 2.0 * t, 40, 80)


def test_initiate_matches_measurement_with_zero_velocity():
    box = BBox(10, 20, 30, 60)
    st = initiate(box)
    assert np.allclose(st.mean[:4], to_xyah(box))
    assert np.all(st.mean[4:] == 0.0)
    b = st.box()
    assert b.x == pytest.approx(box.x)
    assert b.y == pytest.approx(box.y)
    assert b.w == pytest.approx(box.w)
    assert b.h == pytest.approx(box.h)


def test_predict_advances_mean_by_velocity():
    st = initiate(BBox(0, 0, 10, 20))
    st.mean[4] = 5.0
    st.mean[5] = -2.0
    before = st.mean.copy()
    st = predict(st)
    assert st.mean[0] == before[0] + 5.0
    assert st.mean[1] == before[1] - 2.0
    assert st.mean[2] == before[2]
    assert st.mean[3] == before[3]


def test_tracks_constant_velocity_with_high_iou():
    # After a 10-frame warm-up, every one-step-ahead prediction must
    # overlap the true box with IoU >= 0.95 on a noiseless track.
    st = initiate(cv_box(0))
    worst = 1.0
    for t in range(1, 100):
        st = predict(st)
        overlap = iou(st.box(), cv_box(t))
        if t >= 10:
            worst = min(worst, overlap)
        st = update(st, cv_box(t))
    assert worst >= 0.95


def test_velocity_estimate_converges():
    st = initiate(cv_box(0))
    for t in range(1, 60):
        st = predict(st)
        st = update(st, cv_box(t))
    assert st.mean[4] == pytest.approx(3.0, abs=1e-2)
    assert st.mean[5] == pytest.approx(2.0, abs=1e-2)
    assert st.mean[7] == pytest.approx(0.0, abs=1e-6)


def test_static_track_is_a_fixed_point():
    # Zero innovation: the mean must never move off an exact measurement.
    box = BBox(50, 60, 30, 90)
    st = initiate(box)
    for _ in range(100):
        st = predict(st)
        st = update(st, box)
    assert np.max(np.abs(st.mean[:4] - to_xyah(box))) == 0.0
    assert np.max(np.abs(st.mean[4:])) == 0.0


def test_repeated_updates_contract_onto_measurement():
    truth = BBox(50, 60, 30, 90)
    st = initiate(BBox(62, 75, 26, 80))
    errs = []
    for _ in range(100):
        st = predict(st)
        st = update(st, truth)
        errs.append(np.max(np.abs(st.mean[:4] - to_xyah(truth))))
    assert errs[99] < 1e-5
    assert errs[99] < errs[19] < errs[4]


def test_covariance_stays_symmetric_psd():
    st = initiate(cv_box(0))
    for t in range(1, 50):
        st = predict(st)
        assert np.allclose(st.cov, st.cov.T)
        assert np.linalg.eigvalsh(st.cov).min() > -1e-9
        st = update(st, cv_box(t))
        assert np.allclose(st.cov, st.cov.T)
        assert np.linalg.eigvalsh(st.cov).min() > -1e-9


def test_predict_grows_and_update_shrinks_uncertainty():
    box = BBox(50, 60, 30, 90)
    st = initiate(box)
    st2 = predict(st)
    assert np.trace(st2.cov) > np.trace(st.cov)
    st3 = update(st2, box)
    assert np.trace(st3.cov) < np.trace(st2.cov)


def test_params_scale_process_noise():
    box = BBox(50, 60, 30, 90)
    loose = predict(initiate(box), KalmanParams(pos_weight=1 / 5, vel_weight=1 / 40))
    tight = predict(initiate(box), KalmanParams(pos_weight=1 / 5, vel_weight=1 / 40))
    assert np.array_equal(loose.cov, tight.cov)
    default = predict(initiate(box))
    assert np.trace(loose.cov) > np.trace(default.cov)
