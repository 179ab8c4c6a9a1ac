"""Per-layer forward oracles and backprop vs finite differences."""

import numpy as np
import pytest

from envseal.bdnn.layers import Affine, Conv, Dropout, Pool, Relu, Sigmoid, Softmax
from envseal.bdnn.model import (
    BucketizerConfig,
    NetworkModel,
    bucketize,
    build_default_model,
    derive_key_bdnn,
    forward,
)
from envseal.core import Bitmap, ValidationError

from conftest import gray_bitmap

H = 1e-4
TOL = 1e-4


def fd_layer_check(layer, x, rng, *, train=False, mask_seed=7):
    """Central finite differences on a random scalar projection of the output.

    Checks the input gradient and every parameter gradient. Dropout layers
    are evaluated under a pinned rng so each call sees one fixed mask.
    """
    def run(inp):
        return layer.forward(inp, train=train, rng=np.random.default_rng(mask_seed))

    proj = rng.standard_normal(run(x).shape)

    def scalar_at(inp):
        return float((run(inp) * proj).sum())

    run(x)
    dx = layer.backward(proj.copy())
    param_grads = {name: g.copy() for name, g in layer.grads.items()}

    def rel(analytic, numeric):
        scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-6)
        return float(np.abs(analytic - numeric).max() / scale)

    worst = 0.0
    numeric_dx = np.zeros_like(x)
    flat_x, flat_n = x.reshape(-1), numeric_dx.reshape(-1)
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + H
        up = scalar_at(x)
        flat_x[i] = orig - H
        down = scalar_at(x)
        flat_x[i] = orig
        flat_n[i] = (up - down) / (2 * H)
    worst = max(worst, rel(dx, numeric_dx))

    for name, param in layer.params.items():
        flat = param.reshape(-1)
        numeric = np.zeros(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + H
            hi = float(flat[i])
            up = scalar_at(x)
            flat[i] = orig - H
            lo = float(flat[i])
            down = scalar_at(x)
            flat[i] = orig
            numeric[i] = (up - down) / (hi - lo)
        worst = max(worst, rel(param_grads[name].reshape(-1), numeric))
    return worst


class TestForwardOracles:
    def test_relu_clamps_and_masks(self, rng):
        layer = Relu()
        x = rng.standard_normal((4, 5))
        out = layer.forward(x)
        assert out.min() >= 0
        assert np.array_equal(out, np.maximum(x, 0))

    def test_pool_never_exceeds_window_max(self, rng):
        x = rng.standard_normal((2, 3, 6, 6))
        out = Pool().forward(x)
        assert out.max() <= x.max()

    def test_softmax_rows_sum_to_one(self, rng):
        probs = Softmax().forward(rng.standard_normal((8, 2)) * 30)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-6)
        assert probs.min() >= 0

    def test_affine_known_values(self):
        layer = Affine(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([10.0, 20.0]))
        out = layer.forward(np.array([[1.0, 1.0]]))
        assert np.array_equal(out, [[14.0, 26.0]])

    def test_conv_identity_kernel(self):
        # 1x1 identity kernel: convolution is a passthrough
        layer = Conv(np.ones((1, 1, 1, 1)), np.zeros(1), stride=1, pad=0)
        x = np.arange(16.0).reshape(1, 1, 4, 4)
        assert np.array_equal(layer.forward(x), x)

    def test_conv_hand_computed_sum_kernel(self):
        # all-ones 3x3 kernel, no pad: each output is the window sum
        layer = Conv(np.ones((1, 1, 3, 3)), np.zeros(1), stride=1, pad=0)
        x = np.arange(16.0).reshape(1, 1, 4, 4)
        out = layer.forward(x)
        assert out[0, 0, 0, 0] == x[0, 0, :3, :3].sum()
        assert out[0, 0, 1, 1] == x[0, 0, 1:4, 1:4].sum()

    def test_dropout_eval_is_identity(self, rng):
        x = rng.standard_normal((3, 7))
        assert np.array_equal(Dropout(0.5).forward(x, train=False), x)

    def test_dropout_train_preserves_expectation(self):
        x = np.ones((200, 50))
        out = Dropout(0.4).forward(x, train=True, rng=np.random.default_rng(0))
        assert out.mean() == pytest.approx(1.0, abs=0.05)

    def test_dropout_train_needs_rng(self):
        with pytest.raises(ValidationError):
            Dropout(0.4).forward(np.ones((2, 2)), train=True)


class TestLayerGradients:
    def test_conv_gradients(self, rng):
        layer = Conv(rng.standard_normal((2, 3, 3, 3)) * 0.5, rng.standard_normal(2))
        assert fd_layer_check(layer, rng.standard_normal((2, 3, 6, 6)), rng) <= TOL

    def test_conv_stride2_gradients(self, rng):
        layer = Conv(rng.standard_normal((2, 2, 3, 3)) * 0.5, rng.standard_normal(2),
                     stride=2, pad=1)
        assert fd_layer_check(layer, rng.standard_normal((2, 2, 8, 8)), rng) <= TOL

    def test_relu_gradients(self, rng):
        # keep inputs away from the kink at 0
        x = rng.standard_normal((3, 10))
        x[np.abs(x) < 0.05] += 0.2
        assert fd_layer_check(Relu(), x, rng) <= TOL

    def test_pool_gradients(self, rng):
        assert fd_layer_check(Pool(), rng.standard_normal((2, 2, 6, 6)), rng) <= TOL

    def test_affine_gradients(self, rng):
        layer = Affine(rng.standard_normal((12, 5)) * 0.5, rng.standard_normal(5))
        assert fd_layer_check(layer, rng.standard_normal((4, 12)), rng) <= TOL

    def test_sigmoid_gradients(self, rng):
        assert fd_layer_check(Sigmoid(), rng.standard_normal((4, 9)) * 2, rng) <= TOL

    def test_softmax_general_jacobian(self, rng):
        assert fd_layer_check(Softmax(), rng.standard_normal((5, 4)), rng) <= TOL

    def test_dropout_train_mode_gradients(self, rng):
        layer = Dropout(0.3)
        assert fd_layer_check(layer, rng.standard_normal((4, 6)), rng, train=True) <= TOL


class TestModelForward:
    def test_zero_network_outputs(self):
        layers = [
            Conv(np.zeros((2, 1, 3, 3)), np.zeros(2)), Relu(), Pool(),
            Affine(np.zeros((2 * 4 * 4, 128)), np.zeros(128)), Sigmoid(),
            Dropout(0.0),
            Affine(np.zeros((128, 2)), np.zeros(2)), Softmax(),
        ]
        model = NetworkModel(layers, key_layer_index=3, input_hw=(8, 8))
        image = Bitmap(8, 8, 1, bytes(range(64)))
        acts, probs = forward(model, image)
        assert np.all(acts == 0.5)
        assert np.array_equal(probs, [0.5, 0.5])
        # 0.5 >= 0.5: the inclusive threshold makes the zero network all-ones
        assert derive_key_bdnn(model, image).to_hex() == "f" * 32

    def test_inference_deterministic(self, rng):
        model = build_default_model(seed=1)
        img = gray_bitmap(rng.integers(0, 256, (32, 32)).astype(np.uint8))
        a1, p1 = forward(model, img)
        a2, p2 = forward(model, img)
        assert np.array_equal(a1, a2) and np.array_equal(p1, p2)

    def test_shape_mismatch_rejected(self, rng):
        model = build_default_model(seed=1)
        with pytest.raises(ValidationError, match="expects 32x32"):
            forward(model, gray_bitmap(rng.integers(0, 256, (16, 16)).astype(np.uint8)))

    def test_probs_sum_to_one(self, rng):
        model = build_default_model(seed=2)
        img = gray_bitmap(rng.integers(0, 256, (32, 32)).astype(np.uint8))
        _, probs = forward(model, img)
        assert abs(float(probs.sum()) - 1.0) <= 1e-6

    def test_key_layer_validation(self, rng):
        layers = [Affine(np.zeros((4, 2)), np.zeros(2)), Softmax()]
        with pytest.raises(ValidationError, match="128"):
            NetworkModel(layers, key_layer_index=0)


class TestBucketize:
    def test_published_activation_examples(self):
        acts = np.array([0.995, 0.998, 0.0006, 0.0001] + [0.0] * 124)
        key = bucketize(acts, BucketizerConfig())
        assert key.to_hex()[0] == "c"  # bits 1,1,0,0 lead
        assert key.to_hex()[1:] == "0" * 31

    def test_threshold_is_inclusive(self):
        key = bucketize(np.full(128, 0.5), BucketizerConfig(0.5))
        assert key.to_hex() == "f" * 32

    def test_wrong_arity_rejected(self):
        with pytest.raises(ValidationError, match="128"):
            bucketize(np.zeros(64), BucketizerConfig())

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError, match=r"\[0, 1\]"):
            bucketize(np.full(128, 1.5), BucketizerConfig())

    def test_matches_elementwise_comparison_oracle(self, rng):
        acts = rng.random(128)
        key = bucketize(acts, BucketizerConfig(0.5))
        oracle = "".join("1" if a >= 0.5 else "0" for a in acts)
        assert key.to_hex() == format(int(oracle, 2), "032x")
