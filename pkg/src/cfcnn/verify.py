"""Independent oracles: dense materialization, finite differences, a plain dense MLP.

The oracles here only share the array layout with the code they check.
Dense materialization feeds standard basis stacks through a linear map;
the MLP oracle is written with explicit Python loops over matrix entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import layer as lyr
from . import operators as ops
from .layer import LayerParams
from .linalg import DimensionError
from .network import NetworkSpec, NetworkState, final_layer, forward, make_layer, omega_adjoint_apply, omega_apply
from .training import GradientSet

DEFAULT_SEED = 20240601


# --- dense materialization -----------------------------------------------------


@dataclass(frozen=True)
class DenseOperator:
    entries: np.ndarray

    @property
    def out_dim(self):
        return self.entries.shape[0]

    @property
    def in_dim(self):
        return self.entries.shape[1]

    def __matmul__(self, x):
        return self.entries @ np.ravel(x)


def materialize(op, in_shape, out_shape):
    """Matrix of a linear map; column c is ``op`` of the c-th basis stack, flattened."""
    in_shape, out_shape = tuple(in_shape), tuple(out_shape)
    n_in = math.prod(in_shape)
    n_out = math.prod(out_shape)
    entries = np.empty((n_out, n_in))
    basis = np.zeros(n_in)
    for c in range(n_in):
        basis[c] = 1.0
        # copy before resetting the basis: ``op`` may return a view of its input
        col = np.array(op(basis.reshape(in_shape)), dtype=np.float64)
        basis[c] = 0.0
        if col.size != n_out:
            raise DimensionError(f"operator returned {col.shape}, expected {out_shape}")
        entries[:, c] = col.ravel()
    return DenseOperator(entries)


# --- adjoint checks --------------------------------------------------------------


@dataclass(frozen=True)
class AdjointReport:
    name: str
    dot_err: float
    dense_err: float
    tol: float
    dense_tol: float
    trials: int
    seed: int

    @property
    def max_err(self):
        return max(self.dot_err, self.dense_err)

    @property
    def passed(self):
        return self.dot_err <= self.tol and self.dense_err <= self.dense_tol

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"CHECK {self.name} {self.max_err:.3e} {self.tol:.1e} {status}"

    def render(self):
        return (
            f"{self.name}: {'passed' if self.passed else 'FAILED'}\n"
            f"  trials={self.trials} seed={self.seed}\n"
            f"  max |<y, Lx> - <L*y, x>| = {self.dot_err:.3e} (tol {self.tol:.1e})\n"
            f"  max |L*_dense - L_dense^T| = {self.dense_err:.3e} (tol {self.dense_tol:.1e})"
        )


def _dot_gap(fwd, adj, x, y):
    return abs(float(np.vdot(y, fwd(x))) - float(np.vdot(adj(y), x)))


def _dense_gap(fwd, adj, in_shape, out_shape):
    f = materialize(fwd, in_shape, out_shape).entries
    a = materialize(adj, out_shape, in_shape).entries
    return float(np.max(np.abs(a - f.T))) if f.size else 0.0


def check_adjoint_pair(fwd, adj, in_shape, out_shape, trials=100, tol=1e-10,
                       seed=DEFAULT_SEED, dense_tol=None, name="pair"):
    """Dot-product test on seeded random vectors plus a dense transpose check."""
    rng = np.random.default_rng(seed)
    dot_err = 0.0
    for _ in range(trials):
        x = rng.standard_normal(in_shape)
        y = rng.standard_normal(out_shape)
        dot_err = max(dot_err, _dot_gap(fwd, adj, x, y))
    dense_err = _dense_gap(fwd, adj, in_shape, out_shape)
    return AdjointReport(name, dot_err, dense_err, tol,
                         tol if dense_tol is None else dense_tol, trials, seed)


# --- random instances ------------------------------------------------------------


def random_layer_spec(rng, max_dim=6, nl="tanh", in_shape=None):
    """A random valid layer with every dimension at most ``max_dim``."""
    if in_shape is None:
        m1 = int(rng.integers(1, max_dim + 1))
        n = int(rng.integers(1, max_dim + 1))
        l = int(rng.integers(1, max_dim + 1))
    else:
        m1, n, l = in_shape
    p = int(rng.integers(1, n + 1))
    q = int(rng.integers(1, l + 1))
    stride = int(rng.integers(1, max_dim + 1))
    g = ops.ConvGeometry(n, l, p, q, stride)
    divisors = [r for r in range(1, min(g.out_rows, g.out_cols) + 1)
                if g.out_rows % r == 0 and g.out_cols % r == 0]
    r = int(rng.choice(divisors))
    m2 = int(rng.integers(1, max_dim + 1))
    mixing = rng.standard_normal((m2, m1))
    return lyr.LayerSpec(g, m1, m2, r, ops.Nonlinearity(nl), mixing)


def random_layer_params(rng, spec, scale=1.0):
    """Filters uniform with unit pre-activation variance for unit inputs, scaled by ``scale``."""
    fan_in = spec.geometry.p * spec.geometry.q * spec.in_depth
    bound = scale * math.sqrt(3.0 / fan_in)
    return LayerParams(
        w=rng.uniform(-bound, bound, size=spec.filter_shape),
        b=0.5 * scale * rng.standard_normal(spec.conv_shape),
    )


def random_network(rng, depth, max_dim=5, nl="tanh", classes=None):
    """A random chain of ``depth`` layers ending in a fully connected output layer."""
    if classes is None:
        classes = int(rng.integers(1, 4))
    shape = (int(rng.integers(1, 4)), int(rng.integers(2, max_dim + 1)), int(rng.integers(2, max_dim + 1)))
    layers = []
    for _ in range(depth - 1):
        m1, n, l = shape
        p = int(rng.integers(1, min(3, n) + 1))
        q = int(rng.integers(1, min(3, l) + 1))
        stride = int(rng.integers(1, 3))
        g = ops.ConvGeometry(n, l, p, q, stride)
        divisors = [r for r in (1, 2) if g.out_rows % r == 0 and g.out_cols % r == 0]
        r = int(rng.choice(divisors))
        m2 = int(rng.integers(1, 4))
        mixing = np.where(rng.random((m2, m1)) < 0.7, 1.0, 0.0)
        mixing[:, 0] = 1.0
        spec = lyr.LayerSpec(g, m1, m2, r, ops.Nonlinearity(nl), mixing)
        layers.append(spec)
        shape = spec.out_shape
    m1, n, l = shape
    layers.append(final_layer(n, l, m1, classes, nl=nl))
    return NetworkSpec(layers, classes)


def random_state(rng, spec, scale=1.0):
    return NetworkState(random_layer_params(rng, ls, scale) for ls in spec.layers)


# --- adjoint suite ---------------------------------------------------------------


def _operator_families():
    """(name, factory) pairs; a factory draws one random instance of a linear pair."""

    def crop_pair(rng, d):
        m = int(rng.integers(1, d + 1))
        n, l = int(rng.integers(1, d + 1)), int(rng.integers(1, d + 1))
        p, q = int(rng.integers(1, n + 1)), int(rng.integers(1, l + 1))
        j, k = int(rng.integers(1, n - p + 2)), int(rng.integers(1, l - q + 2))
        return (lambda x: ops.crop(x, j, k, p, q),
                lambda y: ops.embed(y, j, k, n, l),
                (m, n, l), (m, p, q))

    def mix_pair(rng, d):
        m, p, q = (int(rng.integers(1, d + 1)) for _ in range(3))
        v = rng.standard_normal(m)
        return (lambda u: ops.mix(v, u), lambda y: ops.mix_adjoint(v, y), (m, p, q), (1, p, q))

    def conv_w_pair(rng, d):
        ls = random_layer_spec(rng, d)
        x = rng.standard_normal(ls.in_shape)
        return (lambda u: ops.convolve(ls.bank(u), x, ls.geometry),
                lambda y: ops.convolve_adjoint_wrt_w(x, y, ls.geometry, ls.mixing),
                ls.filter_shape, ls.conv_shape)

    def conv_x_pair(rng, d):
        ls = random_layer_spec(rng, d)
        bank = ls.bank(rng.standard_normal(ls.filter_shape))
        return (lambda x: ops.convolve(bank, x, ls.geometry),
                lambda z: ops.convolve_adjoint_wrt_x(bank, z, ls.geometry),
                ls.in_shape, ls.conv_shape)

    def pool_pair(rng, d):
        m = int(rng.integers(1, d + 1))
        r = int(rng.integers(1, d + 1))
        n2 = int(rng.integers(1, d // r + 1))
        l2 = int(rng.integers(1, d // r + 1))
        return (lambda y: ops.pool_avg(y, r), lambda z: ops.pool_avg_adjoint(z, r),
                (m, n2 * r, l2 * r), (m, n2, l2))

    def ds_pair(rng, d):
        shape = tuple(int(rng.integers(1, d + 1)) for _ in range(3))
        nl = ops.Nonlinearity(str(rng.choice(["tanh", "sigmoid"])))
        z = rng.standard_normal(shape)
        f = lambda v: ops.dS_apply(nl, z, v)
        return f, f, shape, shape

    def d2s_pair(rng, d):
        shape = tuple(int(rng.integers(1, d + 1)) for _ in range(3))
        nl = ops.Nonlinearity(str(rng.choice(["tanh", "sigmoid"])))
        z, v = rng.standard_normal(shape), rng.standard_normal(shape)
        f = lambda w: ops.d2S_apply(nl, z, v, w)
        return f, f, shape, shape

    def _layer(rng, d):
        ls = random_layer_spec(rng, d, nl=str(rng.choice(["tanh", "sigmoid"])))
        lp = random_layer_params(rng, ls)
        _, cache = lyr.layer_forward(ls, lp, rng.standard_normal(ls.in_shape))
        return ls, lp, cache

    def df_pair(rng, d):
        ls, lp, cache = _layer(rng, d)
        return (lambda v: lyr.layer_df_apply(ls, cache, lp, v),
                lambda e: lyr.layer_df_adjoint(ls, cache, lp, e),
                ls.in_shape, ls.out_shape)

    def grad_w_pair(rng, d):
        ls, lp, cache = _layer(rng, d)
        return (lambda u: lyr.layer_grad_w_apply(ls, cache, u),
                lambda e: lyr.layer_grad_w_adjoint(ls, cache, e),
                ls.filter_shape, ls.out_shape)

    def grad_b_pair(rng, d):
        ls, lp, cache = _layer(rng, d)
        return (lambda u: lyr.layer_grad_b_apply(ls, cache, u),
                lambda e: lyr.layer_grad_b_adjoint(ls, cache, e),
                ls.conv_shape, ls.out_shape)

    def mixed_w_pair(rng, d):
        ls, lp, cache = _layer(rng, d)
        v = rng.standard_normal(ls.in_shape)
        return (lambda u: lyr.layer_d2_mixed_w_apply(ls, cache, lp, v, u),
                lambda e: lyr.layer_d2_mixed_w_adjoint(ls, cache, lp, v, e),
                ls.filter_shape, ls.out_shape)

    def mixed_b_pair(rng, d):
        ls, lp, cache = _layer(rng, d)
        v = rng.standard_normal(ls.in_shape)
        return (lambda u: lyr.layer_d2_mixed_b_apply(ls, cache, lp, v, u),
                lambda e: lyr.layer_d2_mixed_b_adjoint(ls, cache, lp, v, e),
                ls.conv_shape, ls.out_shape)

    def d2_xx_pair(rng, d):
        ls, lp, cache = _layer(rng, d)
        v = rng.standard_normal(ls.in_shape)
        return (lambda vt: lyr.layer_d2_xx_apply(ls, cache, lp, v, vt),
                lambda e: lyr.layer_d2_xx_adjoint(ls, cache, lp, v, e),
                ls.in_shape, ls.out_shape)

    return [
        ("crop/embed", crop_pair),
        ("mix", mix_pair),
        ("conv_wrt_w", conv_w_pair),
        ("conv_wrt_x", conv_x_pair),
        ("pool_avg", pool_pair),
        ("dS", ds_pair),
        ("d2S", d2s_pair),
        ("layer_Df", df_pair),
        ("layer_grad_W", grad_w_pair),
        ("layer_grad_B", grad_b_pair),
        ("layer_D_grad_W", mixed_w_pair),
        ("layer_D_grad_B", mixed_b_pair),
        ("layer_D2", d2_xx_pair),
    ]


FAMILY_NAMES = tuple(name for name, _ in _operator_families())


def adjoint_suite(max_dim=6, trials=100, tol=1e-10, dense_tol=1e-12,
                  seed=DEFAULT_SEED, dense_trials=None, names=None):
    """Check every operator/adjoint family on ``trials`` random instances each.

    Each instance has its own random shapes (every dimension at most
    ``max_dim``) and gets one dot-product test; the first ``dense_trials``
    instances (all of them by default) also get the dense transpose check.
    """
    if dense_trials is None:
        dense_trials = trials
    reports = []
    for i, (name, factory) in enumerate(_operator_families()):
        if names is not None and name not in names:
            continue
        rng = np.random.default_rng([seed, i])
        dot_err = dense_err = 0.0
        for trial in range(trials):
            fwd, adj, in_shape, out_shape = factory(rng, max_dim)
            x = rng.standard_normal(in_shape)
            y = rng.standard_normal(out_shape)
            dot_err = max(dot_err, _dot_gap(fwd, adj, x, y))
            if trial < dense_trials:
                dense_err = max(dense_err, _dense_gap(fwd, adj, in_shape, out_shape))
        reports.append(AdjointReport(name, dot_err, dense_err, tol, dense_tol, trials, seed))
    return reports


def check_omega_adjoint(spec, state, x, t, rng, trials=10):
    """Largest dot-product gap between D omega_t and its adjoint fold."""
    trace = forward(spec, state, x)
    shape = trace.caches[t - 1].x.shape if t <= spec.depth else (spec.class_count,)
    gap = 0.0
    for _ in range(trials):
        u = rng.standard_normal(shape)
        e = rng.standard_normal(spec.class_count)
        lhs = float(np.dot(e, omega_apply(spec, state, trace, t, u)))
        rhs = float(np.vdot(omega_adjoint_apply(spec, state, trace, t, e), u))
        gap = max(gap, abs(lhs - rhs))
    return gap


# --- finite differences ----------------------------------------------------------


def fd_gradient(lossfn, state, h=1e-5):
    """Central differences of ``lossfn(state)`` in every filter and bias coordinate."""
    if not h > 0:
        raise ValueError("step must be positive")
    dW, dB = [], []
    for t, lp in enumerate(state.params, 1):
        for which, arr, out in (("w", lp.w, dW), ("b", lp.b, dB)):
            grad = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                plus, minus = arr.copy(), arr.copy()
                plus[idx] += h
                minus[idx] -= h
                fp = lossfn(state.replace(t, _with(lp, which, plus)))
                fm = lossfn(state.replace(t, _with(lp, which, minus)))
                grad[idx] = (fp - fm) / (2 * h)
            out.append(grad)
    return GradientSet(dW, dB)


def _with(lp, which, arr):
    return LayerParams(w=arr, b=lp.b) if which == "w" else LayerParams(w=lp.w, b=arr)


def fd_directional(fn, x, v, h=1e-5):
    """Central difference of an array-valued map along ``v``."""
    return (np.asarray(fn(x + h * v)) - np.asarray(fn(x - h * v))) / (2 * h)


def relative_errors(analytic, numeric, floor=1e-8):
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


@dataclass(frozen=True)
class GradCheckReport:
    """Per-layer worst errors of an analytic gradient against finite differences.

    A coordinate passes when its relative error is within ``rtol``, or when
    the analytic value is below ``small`` and the absolute error is within
    ``atol``.  Coordinates accepted by the absolute rule are left out of the
    reported relative errors, so a check passes exactly when every reported
    value is within ``rtol``.
    """

    rel_w: tuple
    rel_b: tuple
    failures: int
    rtol: float
    atol: float

    @property
    def passed(self):
        return self.failures == 0

    @property
    def max_rel(self):
        return max(max(self.rel_w), max(self.rel_b))

    def lines(self, name="grad"):
        out = []
        for t, (rw, rb) in enumerate(zip(self.rel_w, self.rel_b), 1):
            out.append(f"{name} layer {t}: max rel err W {rw:.3e}  B {rb:.3e}")
        return out


def compare_gradients(analytic, numeric, rtol=1e-6, atol=1e-8, small=1e-6, floor=1e-8):
    rel_w, rel_b, failures = [], [], 0
    for pairs, sink in ((zip(analytic.dW, numeric.dW), rel_w), (zip(analytic.dB, numeric.dB), rel_b)):
        for a, n in pairs:
            rel = relative_errors(a, n, floor)
            ab = np.abs(a - n).ravel()
            ok = (rel <= rtol) | ((np.abs(a).ravel() < small) & (ab <= atol))
            failures += int(np.count_nonzero(~ok))
            near_zero = (np.abs(a).ravel() < small) & (ab <= atol)
            sink.append(float(np.where(near_zero, 0.0, rel).max()) if rel.size else 0.0)
    return GradCheckReport(tuple(rel_w), tuple(rel_b), failures, rtol, atol)


# --- dense MLP oracle ------------------------------------------------------------


def _per_layer(fn, count):
    return list(fn) if isinstance(fn, (list, tuple)) else [fn] * count


def dense_mlp_oracle(weights, biases, sigma, x):
    """Forward pass of a dense network, h <- sigma(W h + b) per layer.

    ``sigma`` is a scalar function or one per layer.  Written with explicit
    loops so that it shares no kernels with the operator code.
    """
    sigmas = _per_layer(sigma, len(weights))
    h = [float(v) for v in np.ravel(x)]
    for W, b, s in zip(weights, biases, sigmas):
        W = np.asarray(W, dtype=np.float64)
        if W.shape[1] != len(h) or len(b) != W.shape[0]:
            raise DimensionError(f"dense layer {W.shape} does not accept input of length {len(h)}")
        nxt = []
        for a in range(W.shape[0]):
            acc = 0.0
            for i in range(W.shape[1]):
                acc += W[a, i] * h[i]
            nxt.append(s(acc + float(b[a])))
        h = nxt
    return np.array(h)


def dense_mlp_backprop(weights, biases, sigma, dsigma, x, y):
    """Gradients of 1/2 ||MLP(x) - y||^2 in each weight matrix and bias vector, by loops."""
    sigmas = _per_layer(sigma, len(weights))
    dsigmas = _per_layer(dsigma, len(weights))
    hs = [[float(v) for v in np.ravel(x)]]
    pre = []
    for W, b, s in zip(weights, biases, sigmas):
        W = np.asarray(W, dtype=np.float64)
        z = []
        for a in range(W.shape[0]):
            acc = 0.0
            for i in range(W.shape[1]):
                acc += W[a, i] * hs[-1][i]
            z.append(acc + float(b[a]))
        pre.append(z)
        hs.append([s(v) for v in z])
    delta = [hs[-1][a] - float(y[a]) for a in range(len(hs[-1]))]
    gW = [None] * len(weights)
    gb = [None] * len(weights)
    for t in range(len(weights) - 1, -1, -1):
        W = np.asarray(weights[t], dtype=np.float64)
        dz = [delta[a] * dsigmas[t](pre[t][a]) for a in range(W.shape[0])]
        gb[t] = np.array(dz)
        g = np.zeros(W.shape)
        for a in range(W.shape[0]):
            for i in range(W.shape[1]):
                g[a, i] = dz[a] * hs[t][i]
        gW[t] = g
        delta = [sum(W[a, i] * dz[a] for a in range(W.shape[0])) for i in range(W.shape[1])]
    return gW, gb


def fc_dense_weights(spec, state):
    """Dense matrices and biases equivalent to a network of fully connected layers.

    Each layer must cover its whole input with one window (no stride, no
    pooling).  Entry ``(a, flat(i, r, s))`` is ``A_a[i] * W_a[r, s]``.
    """
    weights, biases = [], []
    for t, (ls, lp) in enumerate(zip(spec.layers, state.params), 1):
        g = ls.geometry
        if (g.p, g.q) != (g.in_rows, g.in_cols) or g.stride != 1 or ls.pool_r != 1:
            raise DimensionError(f"layer {t} is not fully connected")
        m1, n, l = ls.in_shape
        W = np.zeros((ls.out_depth, m1 * n * l))
        for a in range(ls.out_depth):
            for i in range(m1):
                for r in range(n):
                    for s in range(l):
                        W[a, i * n * l + r * l + s] = ls.mixing[a, i] * lp.w[a, r, s]
        weights.append(W)
        biases.append(lp.b.reshape(-1).copy())
    return weights, biases


def fc_filter_gradients(spec, dense_gW, dense_gb):
    """Pull dense-matrix gradients back to filter/bias gradients of the FC network."""
    dW, dB = [], []
    for ls, gW, gb in zip(spec.layers, dense_gW, dense_gb):
        m1, n, l = ls.in_shape
        out = np.zeros(ls.filter_shape)
        for a in range(ls.out_depth):
            for i in range(m1):
                for r in range(n):
                    for s in range(l):
                        out[a, r, s] += ls.mixing[a, i] * gW[a, i * n * l + r * l + s]
        dW.append(out)
        dB.append(np.asarray(gb).reshape(ls.conv_shape))
    return GradientSet(dW, dB)


def fc_network(sizes, nl="tanh", in_shape=None):
    """A chain of fully connected layers with hidden widths ``sizes[1:-1]``.

    ``sizes[0]`` is the input length laid out as ``in_shape`` (default
    ``sizes[0] x 1 x 1``); hidden states live in depth as ``1 x 1 x width``,
    and the last entry is the class count.
    """
    if in_shape is None:
        in_shape = (1, sizes[0], 1)
    m, n, l = in_shape
    layers = []
    for t, width in enumerate(sizes[1:]):
        last = t == len(sizes) - 2
        if last:
            layers.append(final_layer(n, l, m, width, nl=nl))
        else:
            layers.append(make_layer(n, l, m, n, l, width, nl=nl))
        m, n, l = width, 1, 1
    return NetworkSpec(layers, sizes[-1])
