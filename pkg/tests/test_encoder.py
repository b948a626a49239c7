"""Tests for the numpy encoders and optimizers."""

import numpy as np
import pytest

from dscl.encoder import Adam, Encoder, EncoderKind, EncoderSpec, OptimizerConfig, OptimizerKind, Sgd
from dscl.errors import ConfigError, DimensionMismatch
from dscl.gradcheck import relative_error
from dscl.losses import LossConfig, Variant
from dscl.trainer import loss_and_gradients


@pytest.fixture
def inputs():
    gen = np.random.default_rng(0)
    return gen.standard_normal((8, 3)), np.array([0, 0, 0, 0, 1, 1, 1, 1])


def _numeric_param_grads(encoder, x, labels, cfg, step=1e-6):
    grads = {}
    for name, value in encoder.params.items():
        grad = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            original = value[idx]
            value[idx] = original + step
            plus = loss_and_gradients(encoder, x, labels, cfg)[0].value
            value[idx] = original - step
            minus = loss_and_gradients(encoder, x, labels, cfg)[0].value
            value[idx] = original
            grad[idx] = (plus - minus) / (2 * step)
        grads[name] = grad
    return grads


def test_outputs_are_unit_norm(inputs):
    encoder = Encoder(EncoderSpec(3, 3, init_seed=1, hidden_dim=4))
    z, _ = encoder.forward(inputs[0])
    assert np.allclose(np.linalg.norm(z, axis=1), 1.0)
    assert encoder.embed(inputs[0], 0.5).temperature == 0.5


@pytest.mark.parametrize("kind,hidden", [(EncoderKind.MLP2, 4), (EncoderKind.LINEAR, None)])
@pytest.mark.parametrize("variant", [Variant.SUPCON_IN, Variant.DSCL_FULL])
def test_parameter_gradients_match_finite_differences(inputs, kind, hidden, variant):
    x, labels = inputs
    encoder = Encoder(EncoderSpec(3, 3, init_seed=2, kind=kind, hidden_dim=hidden))
    cfg = LossConfig(variant=variant, temperature=0.5, tau_plus=0.5)
    _, analytic = loss_and_gradients(encoder, x, labels, cfg)
    numeric = _numeric_param_grads(encoder, x, labels, cfg)
    for name in encoder.params:
        assert relative_error(analytic[name], numeric[name]) < 1e-4, name


def test_initialization_is_seeded():
    a = Encoder(EncoderSpec(3, 4, init_seed=5, hidden_dim=6))
    b = Encoder(EncoderSpec(3, 4, init_seed=5, hidden_dim=6))
    c = Encoder(EncoderSpec(3, 4, init_seed=6, hidden_dim=6))
    assert np.array_equal(a.params["W1"], b.params["W1"])
    assert not np.array_equal(a.params["W1"], c.params["W1"])
    assert a.spec.with_seed_offset(1) == c.spec


def test_copy_is_independent():
    encoder = Encoder(EncoderSpec(3, 3, init_seed=0, kind="linear"))
    clone = encoder.copy()
    clone.params["W"] += 1.0
    assert not np.array_equal(encoder.params["W"], clone.params["W"])
    assert set(encoder.to_dict()) == {"W", "b"}


def test_forward_rejects_wrong_width():
    encoder = Encoder(EncoderSpec(3, 3, init_seed=0, hidden_dim=4))
    with pytest.raises(DimensionMismatch):
        encoder.forward(np.zeros((2, 5)))


@pytest.mark.parametrize(
    "kwargs",
    [{"input_dim": 0, "output_dim": 3}, {"input_dim": 3, "output_dim": 1},
     {"input_dim": 3, "output_dim": 3, "kind": "mlp2", "hidden_dim": None}],
)
def test_encoder_spec_validation(kwargs):
    with pytest.raises(ConfigError):
        EncoderSpec(init_seed=0, **kwargs)


def test_sgd_step():
    params = {"w": np.array([1.0, 2.0])}
    Sgd(0.5).step(params, {"w": np.array([2.0, -2.0])})
    assert params["w"].tolist() == [0.0, 3.0]


def test_adam_first_step_moves_by_lr():
    params = {"w": np.array([1.0, -1.0])}
    Adam(0.1).step(params, {"w": np.array([3.0, -0.5])})
    assert params["w"] == pytest.approx([0.9, -0.9], abs=1e-6)


def test_optimizer_config():
    assert isinstance(OptimizerConfig(kind=OptimizerKind.SGD, lr=0.1).build(), Sgd)
    assert isinstance(OptimizerConfig().build(), Adam)
    assert OptimizerConfig(lr=0.0).lr == 0.0
    with pytest.raises(ConfigError):
        OptimizerConfig(lr=-1.0)
    with pytest.raises(ConfigError):
        OptimizerConfig(momentum=1.0)
