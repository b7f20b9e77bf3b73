import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grasp.errors import InvalidInput, ShapeError
from grasp.image import ImageTensor
from grasp.metrics import (DSR_THRESHOLD, ImageRecord, MetricsReport, STANDARD_BATTERY, Transform,
                           defense_success, dsr, evaluate, evaluate_robustness, l1_output_distance,
                           l2_output_distance, lf_metric, psnr, robustness_transform, rotate)
from grasp.models import IdentityModel


def const(v, shape=(4, 4, 3), rng=(0.0, 1.0)):
    return ImageTensor(np.full(shape, v), rng)


def test_l2_examples():
    assert l2_output_distance(const(0.2), const(0.2)) == 0
    assert l2_output_distance(const(0.0), const(0.3)) == pytest.approx(0.09)
    # a (-1, 1) output range is rescaled to unit width
    assert l2_output_distance(const(0.0, rng=(-1, 1)), const(0.6, rng=(-1, 1))) == pytest.approx(0.09)
    assert l1_output_distance(const(0.0), const(0.3)) == pytest.approx(0.3)
    with pytest.raises(ShapeError):
        l2_output_distance(const(0), const(0, (2, 2, 3)))


def test_threshold_is_strict():
    assert DSR_THRESHOLD == 0.05
    assert defense_success(0.06) and not defense_success(0.04) and not defense_success(0.05)


def test_dsr_examples():
    same = [(const(0.5), const(0.5))] * 3
    assert dsr(same) == 0
    assert dsr([(const(0.0), const(0.3))] * 3) == 1.0
    recs = [ImageRecord(i, "", d, 0, 30, 1, 0, defense_success(d)) for i, d in enumerate([0.06, 0.04, 0.10, 0.05])]
    assert MetricsReport(recs).dsr == 0.5
    with pytest.raises(InvalidInput):
        dsr([])


def test_psnr_examples():
    x = const(0.5)
    assert psnr(x, ImageTensor(x.data + 0.1)) == pytest.approx(20.0)
    assert psnr(x, const(0.55)) == pytest.approx(10 * math.log10(1 / 0.0025), abs=1e-9)
    assert psnr(x, const(0.55)) == pytest.approx(26.0206, abs=1e-4)
    assert math.isinf(psnr(x, x))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.001, 0.4), st.floats(0.001, 0.4))
def test_psnr_symmetric_and_monotone(d1, d2):
    x = const(0.5)
    assert psnr(x, const(0.5 + d1)) == pytest.approx(psnr(const(0.5 + d1), x), rel=1e-12)
    if d1 < d2 * (1 - 1e-9):
        assert psnr(x, const(0.5 + d1)) > psnr(x, const(0.5 + d2))


def test_lf_metric_examples():
    assert lf_metric([(const(0.3), const(0.3))]) == 0
    pair = (const(0.0, (2, 2, 1)), const(1 / 255, (2, 2, 1)))
    assert lf_metric([pair]) == pytest.approx(4.0)
    assert lf_metric([pair, pair]) == pytest.approx(4.0)
    assert lf_metric([(pair[1], pair[0])]) == lf_metric([pair])
    with pytest.raises(ShapeError):
        lf_metric([(const(0, (3, 2, 1)), const(0, (3, 2, 1)))])


def test_blur_transforms(rng):
    x = ImageTensor(rng.uniform(size=(9, 9, 3)))
    assert robustness_transform(x, "gaussian_blur:1") is x
    impulse = np.zeros((7, 7, 1))
    impulse[3, 3] = 1
    out = robustness_transform(ImageTensor(impulse), "average_blur:3").data[:, :, 0]
    assert np.allclose(out[2:5, 2:5], 1 / 9)
    assert out.sum() == pytest.approx(1.0)
    with pytest.raises(InvalidInput):
        robustness_transform(x, "gaussian_blur:4")
    with pytest.raises(InvalidInput):
        Transform.parse("sharpen:2")


def test_rotation(rng):
    x = ImageTensor(rng.uniform(size=(8, 8, 3)))
    twice = rotate(rotate(x, 180), 180)
    assert np.array_equal(twice.data, x.data)
    assert np.array_equal(rotate(x, 90).data, np.rot90(x.data))
    # bilinear path agrees in direction with the exact path
    approx = rotate(x, 89.999)
    assert np.allclose(approx.data[2:6, 2:6], np.rot90(x.data)[2:6, 2:6], atol=1e-3)
    r45 = rotate(ImageTensor(np.ones((8, 8, 1))), 45).data
    assert r45[0, 0, 0] == 0 and r45[4, 4, 0] == pytest.approx(1.0)


def test_standard_battery_matches_protocol():
    labels = [t.label for t in STANDARD_BATTERY]
    assert labels == ["gaussian_blur:1", "gaussian_blur:3", "gaussian_blur:5", "gaussian_blur:7",
                      "average_blur:1", "average_blur:3", "average_blur:5", "average_blur:7",
                      "rotate:45", "rotate:90", "rotate:135", "rotate:180"]


def test_evaluate_and_identity_transforms(rng):
    m = IdentityModel()
    pairs = [(ImageTensor(rng.uniform(0.1, 0.9, size=(12, 12, 3))),) * 2 for _ in range(3)]
    pairs = [(x, ImageTensor(np.clip(x.data + 0.3, 0, 1))) for x, _ in pairs]
    base = evaluate(m, pairs)
    rob = evaluate_robustness(m, pairs, ["gaussian_blur:1", "average_blur:1", "rotate:0"])
    for rep in rob.values():
        assert [r.l2_out for r in rep.records] == [r.l2_out for r in base.records]
        assert rep.dsr == base.dsr
    agg = base.summary_json()
    assert agg["n_images"] == 3 and 0 <= agg["dsr"] <= 1


def test_rotate_180_on_identity_model_keeps_dsr():
    # a point-symmetric image is unchanged by a half turn
    x = ImageTensor(np.full((8, 8, 3), 0.5))
    xa = ImageTensor(np.full((8, 8, 3), 0.8))
    m = IdentityModel()
    assert evaluate_robustness(m, [(x, xa)], ["rotate:180"])["rotate:180"].dsr == evaluate(m, [(x, xa)]).dsr


def test_report_psnr_inf_flag():
    x = const(0.5)
    rep = evaluate(IdentityModel(), [(x, x)])
    assert rep.records[0].to_json()["psnr_in"] == "inf"
    assert rep.summary_json()["psnr_in"] == "inf"
