import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import vec
from grasp.errors import InvalidInput, ShapeError
from grasp.image import ImageTensor, NormKind, clip_to_ball, dot, elementwise, norm

finite = st.floats(-10, 10, allow_nan=False)


def test_norm_examples():
    assert norm(vec(3, -1), NormKind.L1_SUM) == 4
    assert norm(ImageTensor(np.ones((2, 2, 1))), NormKind.L2_MEAN) == 1
    for kind in NormKind:
        assert norm(ImageTensor(np.zeros((4, 4, 3))), kind) == 0
    assert norm(vec(3, -5, 1), NormKind.LINF) == 5


def test_norm_of_empty_tensor():
    with pytest.raises(InvalidInput):
        norm(ImageTensor(np.zeros((0, 4, 1))), NormKind.L1_SUM)


@pytest.mark.parametrize("cand, expected", [(0.58, 0.55), (0.52, 0.52), (0.40, 0.45)])
def test_clip_to_ball_examples(cand, expected):
    out = clip_to_ball(vec(cand), vec(0.5), 0.05)
    assert out.data.item() == pytest.approx(expected, abs=1e-15)


def test_clip_respects_pixel_range():
    out = clip_to_ball(vec(1.2, -0.3), vec(0.98, 0.01), 0.05)
    assert out.data.ravel().tolist() == [1.0, 0.0]


def test_clip_shape_mismatch():
    with pytest.raises(ShapeError):
        clip_to_ball(vec(1, 2), vec(1, 2, 3), 0.1)


def test_elementwise_examples():
    assert elementwise(vec(1, 2), vec(3, 4), "dot") == 11
    x = vec(0.3, 0.7)
    assert not (x - x).data.any()
    assert (vec(1, -1) * 0.5).data.ravel().tolist() == [0.5, -0.5]
    with pytest.raises(ShapeError):
        elementwise(vec(1, 2), vec(1), "add")


def test_tensor_is_read_only():
    x = ImageTensor(np.zeros((2, 2, 1)))
    with pytest.raises(ValueError):
        x.data[0, 0, 0] = 1.0


def test_clip_linf_bound_on_10k_triples():
    rng = np.random.default_rng(7)
    anchor = ImageTensor(rng.uniform(size=(100, 100, 1)))
    cand = ImageTensor(rng.uniform(-0.5, 1.5, size=(100, 100, 1)))
    eps = rng.uniform(0, 0.2)
    out = clip_to_ball(cand, anchor, eps)
    assert norm(out - anchor, NormKind.LINF) <= eps + 1e-12


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (3, 4, 1), elements=st.floats(-1, 2)),
       arrays(np.float64, (3, 4, 1), elements=st.floats(0, 1)),
       st.floats(0, 0.5))
def test_clip_idempotent(c, a, eps):
    cand, anchor = ImageTensor(c), ImageTensor(a)
    once = clip_to_ball(cand, anchor, eps)
    twice = clip_to_ball(once, anchor, eps)
    assert np.array_equal(once.data, twice.data)
    assert np.all(np.abs(once.data - a) <= eps + 1e-12)


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, (2, 3, 3), elements=finite), arrays(np.float64, (2, 3, 3), elements=finite),
       st.floats(-5, 5, allow_nan=False))
def test_dot_symmetric_and_l1_homogeneous(a, b, k):
    ta, tb = ImageTensor(a), ImageTensor(b)
    assert dot(ta, tb) == dot(tb, ta)
    n = norm(ta, NormKind.L1_SUM)
    assert norm(ta * k, NormKind.L1_SUM) == pytest.approx(abs(k) * n, rel=1e-12, abs=1e-300)
