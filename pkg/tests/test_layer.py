import numpy as np
import pytest
from hypothesis import given

from cfcnn import layer as lyr
from cfcnn import operators as ops
from cfcnn import verify
from cfcnn.layer import LayerParams, LayerSpec
from cfcnn.linalg import DimensionError, GeometryError, inner
from cfcnn.network import final_layer, make_layer
from cfcnn.operators import ConvGeometry, Nonlinearity
from strategies import layers

H = 1e-5


def fd_close(analytic, numeric, rtol=1e-6, atol=1e-8):
    a, n = np.ravel(analytic), np.ravel(numeric)
    rel = verify.relative_errors(a, n)
    ok = (rel <= rtol) | ((np.abs(a) < 1e-6) & (np.abs(a - n) <= atol))
    assert ok.all(), f"max rel {rel.max():.2e}"


def test_spec_validation():
    with pytest.raises(GeometryError):
        make_layer(5, 5, 1, 2, 2, 1, pool=3)
    with pytest.raises(DimensionError):
        make_layer(4, 4, 2, 2, 2, 3, mixing=np.ones((3, 3)))
    with pytest.raises(GeometryError):
        make_layer(4, 4, 1, 3, 4, 2, final=True)
    ls = make_layer(6, 6, 2, 3, 3, 4, pool=2)
    assert ls.conv_shape == (4, 4, 4) and ls.out_shape == (4, 2, 2) and ls.filter_shape == (4, 3, 3)
    np.testing.assert_array_equal(ls.mixing, np.ones((4, 2)))


def test_params_check():
    ls = make_layer(3, 3, 1, 2, 2, 1)
    with pytest.raises(DimensionError):
        LayerParams(np.zeros((1, 3, 3)), np.zeros((1, 2, 2))).check(ls)


def test_zero_params_zero_output(rng):
    ls = make_layer(4, 4, 2, 2, 2, 3)
    out, _ = lyr.layer_forward(ls, LayerParams(np.zeros(ls.filter_shape), np.zeros(ls.conv_shape)),
                               rng.standard_normal(ls.in_shape))
    np.testing.assert_array_equal(out, 0)


def test_pointwise_layer_is_tanh(rng):
    ls = make_layer(3, 4, 1, 1, 1, 1)
    x = rng.standard_normal(ls.in_shape)
    out, _ = lyr.layer_forward(ls, LayerParams(np.ones((1, 1, 1)), np.zeros((1, 3, 4))), x)
    np.testing.assert_allclose(out, np.tanh(x), rtol=1e-15)


def test_final_layer_formula(rng):
    ls = final_layer(3, 2, 2, 4, nl="sigmoid")
    lp = verify.random_layer_params(rng, ls)
    x = rng.standard_normal(ls.in_shape)
    out, _ = lyr.layer_forward(ls, lp, x)
    for a in range(4):
        z = sum(np.sum(lp.w[a] * x[i]) for i in range(2)) + lp.b[a, 0, 0]
        assert np.isclose(out[a, 0, 0], 1 / (1 + np.exp(-z)), rtol=1e-13)


def _forward_out(ls, lp, x):
    return lyr.layer_forward(ls, lp, x)[0]


@given(layers())
def test_df_matches_fd(case):
    ls, lp, rng = case
    x, v = rng.standard_normal(ls.in_shape), rng.standard_normal(ls.in_shape)
    _, cache = lyr.layer_forward(ls, lp, x)
    numeric = verify.fd_directional(lambda z: _forward_out(ls, lp, z), x, v, H)
    fd_close(lyr.layer_df_apply(ls, cache, lp, v), numeric)
    np.testing.assert_array_equal(lyr.layer_df_apply(ls, cache, lp, 0 * v), 0)
    np.testing.assert_array_equal(lyr.layer_df_adjoint(ls, cache, lp, np.zeros(ls.out_shape)), 0)


@given(layers())
def test_parameter_adjoints_match_fd(case):
    ls, lp, rng = case
    x = rng.standard_normal(ls.in_shape)
    e = rng.standard_normal(ls.out_shape)
    _, cache = lyr.layer_forward(ls, lp, x)

    def pairing_w(w):
        return inner(e, _forward_out(ls, LayerParams(w, lp.b), x))

    def pairing_b(b):
        return inner(e, _forward_out(ls, LayerParams(lp.w, b), x))

    for analytic, fn, base in ((lyr.layer_grad_w_adjoint(ls, cache, e), pairing_w, lp.w),
                               (lyr.layer_grad_b_adjoint(ls, cache, e), pairing_b, lp.b)):
        numeric = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            d = np.zeros_like(base)
            d[idx] = H
            numeric[idx] = (fn(base + d) - fn(base - d)) / (2 * H)
        fd_close(analytic, numeric)


def test_identity_hook_reductions(rng):
    g = ConvGeometry(6, 5, 3, 2, stride=1)
    ls = LayerSpec(g, 2, 3, 2, Nonlinearity("identity"), rng.standard_normal((3, 2)))
    lp = verify.random_layer_params(rng, ls)
    _, cache = lyr.layer_forward(ls, lp, rng.standard_normal(ls.in_shape))
    v, e = rng.standard_normal(ls.in_shape), rng.standard_normal(ls.out_shape)
    expect = ops.pool_avg(ops.convolve(ls.bank(lp.w), v, g), 2)
    np.testing.assert_allclose(lyr.layer_df_apply(ls, cache, lp, v), expect, rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(lyr.layer_grad_b_adjoint(ls, cache, e), ops.pool_avg_adjoint(e, 2), rtol=1e-15)


@given(layers())
def test_second_derivative_pieces(case):
    ls, lp, rng = case
    x = rng.standard_normal(ls.in_shape)
    _, cache = lyr.layer_forward(ls, lp, x)
    v, u = rng.standard_normal(ls.in_shape), rng.standard_normal(ls.filter_shape)
    zero = np.zeros(ls.in_shape)
    e = rng.standard_normal(ls.out_shape)
    np.testing.assert_array_equal(lyr.layer_d2_mixed_w_adjoint(ls, cache, lp, zero, e), 0)
    np.testing.assert_array_equal(lyr.layer_d2_mixed_b_adjoint(ls, cache, lp, zero, e), 0)
    np.testing.assert_array_equal(lyr.layer_d2_xx_adjoint(ls, cache, lp, zero, e), 0)

    # (V |> D grad_W f) . U is the derivative of grad_W f . U along V
    def grad_w_at(z):
        _, c = lyr.layer_forward(ls, lp, z)
        return lyr.layer_grad_w_apply(ls, c, u)
    numeric = verify.fd_directional(grad_w_at, x, v, H)
    fd_close(lyr.layer_d2_mixed_w_apply(ls, cache, lp, v, u), numeric, rtol=1e-5, atol=1e-7)

    # (V |> D^2 f) . Vt is the derivative of Df . Vt along V
    vt = rng.standard_normal(ls.in_shape)

    def df_at(z):
        _, c = lyr.layer_forward(ls, lp, z)
        return lyr.layer_df_apply(ls, c, lp, vt)
    numeric = verify.fd_directional(df_at, x, v, H)
    fd_close(lyr.layer_d2_xx_apply(ls, cache, lp, v, vt), numeric, rtol=1e-5, atol=1e-7)


def test_relu_mixed_adjoint_reduction(rng):
    ls = verify.random_layer_spec(rng, 5, nl="relu")
    lp = verify.random_layer_params(rng, ls)
    _, cache = lyr.layer_forward(ls, lp, rng.standard_normal(ls.in_shape))
    v, e = rng.standard_normal(ls.in_shape), rng.standard_normal(ls.out_shape)
    expect = ops.convolve_adjoint_wrt_w(
        v, ops.apply_S1(ls.nl, cache.z) * ops.pool_avg_adjoint(e, ls.pool_r), ls.geometry, ls.mixing)
    np.testing.assert_allclose(lyr.layer_d2_mixed_w_adjoint(ls, cache, lp, v, e), expect, rtol=1e-14, atol=1e-15)


@given(layers())
def test_mixed_partials_both_orders(case):
    ls, lp, rng = case
    _, cache = lyr.layer_forward(ls, lp, rng.standard_normal(ls.in_shape))
    e = rng.standard_normal(ls.in_shape)
    u, ub = rng.standard_normal(ls.filter_shape), rng.standard_normal(ls.conv_shape)
    np.testing.assert_allclose(lyr.layer_d2_mixed_w_apply(ls, cache, lp, e, u),
                               lyr.layer_grad_w_df_apply(ls, cache, lp, u, e), rtol=0, atol=1e-10)
    np.testing.assert_allclose(lyr.layer_d2_mixed_b_apply(ls, cache, lp, e, ub),
                               lyr.layer_grad_b_df_apply(ls, cache, lp, ub, e), rtol=0, atol=1e-10)


def test_shape_errors(rng):
    ls = make_layer(4, 4, 1, 2, 2, 1)
    lp = verify.random_layer_params(rng, ls)
    with pytest.raises(DimensionError):
        lyr.layer_forward(ls, lp, np.zeros((1, 4, 5)))
    _, cache = lyr.layer_forward(ls, lp, np.zeros(ls.in_shape))
    with pytest.raises(DimensionError):
        lyr.layer_df_adjoint(ls, cache, lp, np.zeros((1, 2, 2)))
