"""Tape mechanics and finite-difference checks for every primitive."""

import numpy as np
import pytest

from conftest import grad_check
from simpleir.errors import ContractError, NumericError
from simpleir.numerics import (DiffGraph, Tensor, add, backward,
                               channel_slice, complex_l1, concat_channels,
                               conv2d, crop, fft2, finite_diff,
                               fully_connected, gelu, global_avg_pool,
                               l1_sum, layer_norm, mul, pixel_shuffle,
                               pixel_unshuffle, reflect_pad, relu, scale,
                               sigmoid, sub)
from simpleir.numerics.tensor import record


def rand(*shape, seed=0, lo=-1.0, hi=1.0):
    return Tensor(np.random.default_rng(seed).uniform(lo, hi, shape))


def to_scalar(t: Tensor) -> Tensor:
    return l1_sum(mul(t, t), Tensor.zeros(*t.shape))


# ---------------------------------------------------------------------------
# tape mechanics


def test_sum_of_squares_gradient():
    x = Tensor(np.array([3.0]).reshape(1, 1, 1, 1))
    with DiffGraph() as g:
        loss = mul(x, x)
    grads = backward(g, loss)
    assert grads[x].ravel()[0] == 6.0


def test_gradients_keyed_by_identity_not_value():
    a = Tensor(np.full((1, 1, 1, 1), 2.0))
    b = Tensor(np.full((1, 1, 1, 1), 2.0))
    with DiffGraph() as g:
        loss = mul(a, b)
    grads = backward(g, loss)
    assert grads[a] is not grads[b]
    assert grads[a].ravel()[0] == 2.0 and grads[b].ravel()[0] == 2.0


def test_reused_operand_accumulates():
    x = Tensor(np.full((1, 1, 1, 1), 3.0))
    with DiffGraph() as g:
        loss = add(mul(x, x), x)  # d/dx (x^2 + x) = 2x + 1
    assert backward(g, loss)[x].ravel()[0] == 7.0


def test_replay_matches_is_bit_exact():
    x = rand(1, 4, 8, 8, seed=1)
    w = rand(4, 4, 3, 3, seed=2)
    with DiffGraph() as g:
        to_scalar(gelu(conv2d(x, w, padding="same")))
    assert len(g) > 0
    assert g.replay_matches()


def test_backward_requires_scalar_loss():
    x = rand(1, 1, 2, 2, seed=0)
    with DiffGraph() as g:
        y = add(x, x)
    with pytest.raises(ContractError):
        backward(g, y)


def test_non_finite_gradient_names_the_node():
    x = Tensor.scalar(1.0)
    with DiffGraph() as g:
        out = add(x, x)
        bad = Tensor.scalar(1.0)
        record("exploding", bad, (out,),
               lambda gy: (np.full((1, 1, 1, 1), np.nan),),
               lambda: bad.data)
    with pytest.raises(NumericError, match="exploding"):
        backward(g, bad)


def test_untouched_tensor_absent_from_gradient_map():
    x = rand(1, 1, 2, 2, seed=0)
    bystander = rand(1, 1, 2, 2, seed=1)
    with DiffGraph() as g:
        loss = to_scalar(x)
    grads = backward(g, loss)
    assert bystander not in grads


def test_finite_diff_matches_analytic_on_quadratic():
    x = Tensor(np.array([1.0, -2.0, 0.5]).reshape(1, 1, 1, 3))
    got = finite_diff(lambda: float((x.data ** 2).sum()), x)
    assert np.allclose(got[x], 2.0 * x.data, atol=1e-8)


# ---------------------------------------------------------------------------
# per-primitive finite-difference checks (< 1e-6 relative)

TOL = 1e-6


def test_grad_add_sub_scale():
    a, b = rand(1, 2, 3, 3, seed=1), rand(1, 2, 3, 3, seed=2)
    assert grad_check(lambda: to_scalar(add(a, b)), [a, b]) < TOL
    assert grad_check(lambda: to_scalar(sub(a, b)), [a, b]) < TOL
    assert grad_check(lambda: to_scalar(scale(a, -1.7)), [a]) < TOL


def test_grad_mul_with_broadcast():
    x = rand(1, 3, 2, 2, seed=3)
    w = rand(1, 3, 1, 1, seed=4)
    assert grad_check(lambda: to_scalar(mul(x, w)), [x, w]) < TOL


def test_grad_concat_and_slice():
    a, b = rand(1, 2, 2, 2, seed=5), rand(1, 3, 2, 2, seed=6)
    assert grad_check(lambda: to_scalar(concat_channels([a, b])), [a, b]) < TOL
    assert grad_check(lambda: to_scalar(channel_slice(b, 1, 3)), [b]) < TOL


def test_grad_reflect_pad_and_crop():
    x = rand(1, 2, 4, 5, seed=7)
    assert grad_check(lambda: to_scalar(reflect_pad(x, (1, 2, 2, 1))), [x]) < TOL
    assert grad_check(lambda: to_scalar(crop(x, 1, 1, 2, 3)), [x]) < TOL


def test_grad_conv2d_dense():
    x, w = rand(1, 2, 4, 4, seed=8), rand(3, 2, 3, 3, seed=9)
    b = rand(1, 3, 1, 1, seed=10)
    assert grad_check(lambda: to_scalar(conv2d(x, w, b, padding="same")),
                      [x, w, b]) < TOL


def test_grad_conv2d_valid_stride():
    x, w = rand(1, 2, 7, 7, seed=11), rand(2, 2, 3, 3, seed=12)
    assert grad_check(lambda: to_scalar(conv2d(x, w, stride=2, padding="valid")),
                      [x, w]) < TOL


def test_grad_conv2d_depthwise_and_band():
    x = rand(1, 4, 5, 5, seed=13)
    dw = rand(4, 1, 3, 3, seed=14)
    band = rand(4, 1, 1, 5, seed=15)
    assert grad_check(lambda: to_scalar(conv2d(x, dw, padding="same", groups=4)),
                      [x, dw]) < TOL
    assert grad_check(lambda: to_scalar(conv2d(x, band, padding="same", groups=4)),
                      [x, band]) < TOL


def test_grad_layer_norm():
    x = rand(2, 6, 2, 2, seed=16)
    gamma = rand(1, 6, 1, 1, seed=17, lo=0.5, hi=1.5)
    beta = rand(1, 6, 1, 1, seed=18)
    assert grad_check(lambda: to_scalar(layer_norm(x, gamma, beta)),
                      [x, gamma, beta]) < TOL


def test_grad_activations():
    # keep relu inputs away from its kink
    x = Tensor(np.linspace(-2.0, 2.0, 16).reshape(1, 1, 4, 4) + 0.05)
    for fn in (relu, gelu, sigmoid):
        assert grad_check(lambda: to_scalar(fn(x)), [x]) < TOL


def test_grad_pool_and_fc():
    x = rand(2, 3, 4, 4, seed=19)
    assert grad_check(lambda: to_scalar(global_avg_pool(x)), [x]) < TOL
    d = rand(2, 3, 1, 1, seed=20)
    w = rand(5, 3, 1, 1, seed=21)
    b = rand(1, 5, 1, 1, seed=22)
    assert grad_check(lambda: to_scalar(fully_connected(d, w, b)),
                      [d, w, b]) < TOL


def test_grad_pixel_shuffle_pair():
    x = rand(1, 8, 3, 3, seed=23)
    y = rand(1, 2, 4, 6, seed=24)
    assert grad_check(lambda: to_scalar(pixel_shuffle(x, 2)), [x]) < TOL
    assert grad_check(lambda: to_scalar(pixel_unshuffle(y, 2)), [y]) < TOL


def test_grad_l1_sum_off_ties():
    a = Tensor(np.array([1.0, -2.0, 3.0]).reshape(1, 1, 1, 3))
    b = Tensor(np.array([0.2, 0.4, -0.6]).reshape(1, 1, 1, 3))
    assert grad_check(lambda: l1_sum(a, b), [a, b]) < TOL


def test_grad_through_fft_term():
    # frequency path composition: transform both sides, then complex L1
    x = rand(1, 2, 4, 4, seed=25)
    ref = rand(1, 2, 4, 4, seed=26)
    assert grad_check(lambda: complex_l1(fft2(x), fft2(ref)), [x]) < 1e-5


def test_grad_conv_vs_finite_diff_spec_case():
    x, w = rand(1, 2, 4, 4, seed=27), rand(2, 2, 3, 3, seed=28)
    assert grad_check(lambda: to_scalar(conv2d(x, w, padding="same")),
                      [x, w], h=1e-5) < TOL


def test_grad_composed_ln_gelu_fc():
    d = rand(2, 4, 1, 1, seed=29)
    gamma = Tensor(np.ones((1, 4, 1, 1)))
    beta = Tensor.zeros(1, 4, 1, 1)
    w = rand(3, 4, 1, 1, seed=30)

    def build():
        return to_scalar(fully_connected(gelu(layer_norm(d, gamma, beta)), w))

    assert grad_check(build, [d, gamma, beta, w]) < 1e-5
