import numpy as np
import pytest
from hypothesis import given

from cfcnn import operators as ops
from cfcnn import verify
from cfcnn.layer import LayerParams
from cfcnn.network import NetworkState
from cfcnn.operators import Nonlinearity
from criteria import toy_network
from strategies import seeds, stack_shapes


def test_materialize_examples():
    np.testing.assert_array_equal(verify.materialize(lambda x: x, (2, 2, 1), (2, 2, 1)).entries, np.eye(4))
    np.testing.assert_array_equal(verify.materialize(lambda y: ops.pool_avg(y, 2), (1, 2, 2), (1, 1, 1)).entries,
                                  [[0.25, 0.25, 0.25, 0.25]])
    np.testing.assert_array_equal(verify.materialize(lambda u: ops.mix([2, 3], u), (2, 1, 1), (1, 1, 1)).entries,
                                  [[2, 3]])


@given(stack_shapes(), seeds)
def test_materialize_consistent(shape, seed):
    rng = np.random.default_rng(seed)
    nl = Nonlinearity("tanh")
    z = rng.standard_normal(shape)
    op = lambda v: ops.dS_apply(nl, z, v)
    x = rng.standard_normal(shape)
    dense = verify.materialize(op, shape, shape)
    np.testing.assert_allclose(dense @ x, op(x).ravel(), rtol=0, atol=1e-12)


def test_check_adjoint_pair_controls(rng):
    pool = lambda y: ops.pool_avg(y, 2)
    ok = verify.check_adjoint_pair(pool, lambda z: ops.pool_avg_adjoint(z, 2), (2, 4, 4), (2, 2, 2))
    assert ok.passed and ok.line().startswith("CHECK pair ") and ok.line().endswith(" PASS")
    bad = verify.check_adjoint_pair(pool, lambda z: 2 * ops.pool_avg_adjoint(z, 2), (2, 4, 4), (2, 2, 2))
    assert not bad.passed and bad.line().endswith(" FAIL")
    z = rng.standard_normal((2, 3, 3))
    ds = lambda v: ops.dS_apply(Nonlinearity("sigmoid"), z, v)
    assert verify.check_adjoint_pair(ds, ds, z.shape, z.shape).passed
    assert str(verify.DEFAULT_SEED) in ok.render()


def test_adjoint_suite_small():
    reports = verify.adjoint_suite(max_dim=3, trials=10)
    assert [r.name for r in reports] == list(verify.FAMILY_NAMES)
    assert all(r.passed for r in reports)
    assert all(r.passed for r in verify.adjoint_suite(max_dim=1, trials=5))


def test_fd_gradient_quadratic():
    spec = toy_network()
    rng = np.random.default_rng(0)
    state = verify.random_state(rng, spec)

    def half_sq(s):
        return 0.5 * sum(float(np.sum(lp.w ** 2) + np.sum(lp.b ** 2)) for lp in s.params)
    g = verify.fd_gradient(half_sq, state)
    expect = np.concatenate([a.ravel() for lp in state.params for a in (lp.w, lp.b)])
    np.testing.assert_allclose(g.flat(), expect, rtol=1e-9, atol=1e-10)
    with pytest.raises(ValueError):
        verify.fd_gradient(half_sq, state, 0.0)


def test_fd_error_quadratic_in_h():
    state = NetworkState([LayerParams(np.array([[[0.7]]]), np.zeros((1, 1, 1)))])
    loss = lambda s: float(np.sin(s.params[0].w[0, 0, 0]))
    errs = [abs(verify.fd_gradient(loss, state, h).dW[0][0, 0, 0] - np.cos(0.7)) for h in (1e-2, 5e-3)]
    assert 3.5 < errs[0] / errs[1] < 4.5


def test_compare_gradients_small_values():
    from cfcnn.training import GradientSet
    a = GradientSet([np.array([1.0, 1e-9])], [np.array([0.0])])
    n = GradientSet([np.array([1.0 + 1e-8, 5e-9])], [np.array([1e-9])])
    assert verify.compare_gradients(a, n).passed
    n = GradientSet([np.array([1.01, 0.0])], [np.array([0.0])])
    rep = verify.compare_gradients(a, n)
    assert not rep.passed and rep.failures == 1
    assert rep.lines("J")[0].startswith("J layer 1: max rel err")


def test_dense_mlp_oracle_trivial_cases():
    b = np.array([0.3, -0.2])
    np.testing.assert_allclose(verify.dense_mlp_oracle([np.zeros((2, 3))], [b], np.tanh, np.ones(3)), np.tanh(b))
    x = np.array([0.1, -0.4])
    np.testing.assert_allclose(verify.dense_mlp_oracle([np.eye(2)], [b], np.tanh, x), np.tanh(x + b))
