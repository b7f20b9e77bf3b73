import json
from pathlib import Path

import numpy as np
import pytest
from scipy.signal import correlate

from conftest import rel_err
from grasp.errors import ConfigError, ModelError, ShapeError
from grasp.image import ImageTensor
from grasp.losses import finite_diff_grad
from grasp.models import AffineModel, ConvSurrogate, IdentityModel, build_model
from grasp.models.base import ManipulationModel
from grasp.models.prng import XorShift64Star, splitmix64

GOLDEN = Path(__file__).parent / "golden" / "conv_seed42_8x8.json"


def test_splitmix64_reference_vector():
    state, outs = 0, []
    for _ in range(3):
        state, o = splitmix64(state)
        outs.append(o)
    assert outs == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_xorshift_reproducible_and_in_range():
    a, b = XorShift64Star(42), XorShift64Star(42)
    xs = a.uniforms(1000, -0.5, 0.5)
    assert xs == b.uniforms(1000, -0.5, 0.5)
    assert min(xs) >= -0.5 and max(xs) < 0.5
    assert xs != XorShift64Star(43).uniforms(1000, -0.5, 0.5)


def test_identity_and_neutral_affine(random_image):
    x = random_image()
    assert np.array_equal(IdentityModel().forward(x).data, x.data)
    assert np.array_equal(AffineModel().forward(x).data, x.data)
    c = random_image()
    assert np.array_equal(IdentityModel().vjp(x, c).data, c.data)
    assert np.array_equal(AffineModel(gain=(2, 2, 2)).vjp(x, c).data, 2 * c.data)


def test_affine_declares_output_range():
    assert AffineModel(gain=(2, 1, 1), bias=(0, 0, -1)).output_range == (-1.0, 2.0)


def test_conv_golden_output():
    golden = json.loads(GOLDEN.read_text())
    m = ConvSurrogate(golden["seed"], hidden=golden["hidden"])
    y = m.forward(ImageTensor(np.full(golden["shape"], golden["input"])))
    assert [float(v).hex() for v in y.data.ravel()] == golden["output"]


def test_conv_matches_scipy_reference(random_image):
    m = ConvSurrogate(7, hidden=5)
    x = random_image(6, 10)

    def layer(a, w, b):
        return np.stack([sum(correlate(a[:, :, i], w[o, i], mode="same") for i in range(w.shape[1])) + b[o]
                         for o in range(w.shape[0])], axis=2)

    ref = np.tanh(layer(np.tanh(layer(2 * x.data - 1, m.w1, m.b1)), m.w2, m.b2))
    assert np.allclose(m.forward(x).data, ref, rtol=0, atol=1e-12)


def test_conv_same_seed_bit_identical(random_image):
    x = random_image()
    a, b = ConvSurrogate(42), ConvSurrogate(42)
    assert np.array_equal(a.w1, b.w1) and np.array_equal(a.w2, b.w2)
    assert a.forward(x).data.tobytes() == b.forward(x).data.tobytes()
    assert np.all(np.abs(a.w1) <= 0.5)


def test_conv_output_in_declared_range(random_image):
    m = ConvSurrogate(42)
    y = m.forward(random_image(16, 16))
    assert m.output_range == (-1.0, 1.0)
    assert np.all(np.abs(y.data) < 1)


def test_conv_vjp_matches_finite_difference_jacobian(rng):
    m = ConvSurrogate(42)
    x = ImageTensor(rng.uniform(size=(8, 8, 3)))
    c = ImageTensor(rng.normal(size=(8, 8, 3)))
    # column-by-column Jacobian transpose applied to c
    fd = finite_diff_grad(lambda t: float(np.sum(m.forward(t).data * c.data)), x, 1e-6)
    assert rel_err(m.vjp(x, c), fd) <= 1e-4


@pytest.mark.parametrize("model", [IdentityModel(), AffineModel(gain=(2, -1, 0.5)), ConvSurrogate(5)],
                         ids=["identity", "affine", "conv"])
def test_vjp_jvp_duality(model, rng):
    x = ImageTensor(rng.uniform(0.2, 0.8, size=(8, 8, 3)))
    c = ImageTensor(rng.normal(size=(8, 8, 3)))
    v = rng.normal(size=(8, 8, 3))
    h = 1e-6
    jv = (model.forward(x.with_data(x.data + h * v)).data
          - model.forward(x.with_data(x.data - h * v)).data) / (2 * h)
    lhs = float(np.sum(model.vjp(x, c).data * v))
    rhs = float(np.sum(c.data * jv))
    assert lhs == pytest.approx(rhs, rel=1e-5)


def test_dimension_checks(random_image):
    m = ConvSurrogate(1, hidden=4, input_dims=(8, 8, 3))
    with pytest.raises(ShapeError):
        m.forward(random_image(8, 10))
    with pytest.raises(ShapeError):
        m.vjp(random_image(), random_image(4, 4))


def test_model_failure_wrapped(random_image):
    class Broken(ManipulationModel):
        def _forward(self, x):
            raise RuntimeError("boom")

        def _vjp(self, x, c):
            return c

    with pytest.raises(ModelError, match="boom"):
        Broken().forward(random_image())


def test_build_model():
    assert isinstance(build_model("conv", seed=3), ConvSurrogate)
    assert build_model("conv", seed=3).seed == 3
    with pytest.raises(ConfigError):
        build_model("stargan")
