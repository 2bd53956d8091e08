"""Losses and gradient descent for the network.

J is the quadratic data loss, R the tangent penalty
``sum 1/2 ||DF(X) . V - beta||^2`` over a sample's tangent targets, and the
training objective is ``J + lam * R``.  Gradients are obtained by
backpropagating three error signals: the data residual ``e_y``, the tangent
residual ``e_v`` and the second-order term ``e_w`` that carries the
curvature of the tail of the network.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import layer as lyr
from .layer import LayerParams
from .linalg import DimensionError
from .network import ConfigError, NetworkState, forward


@dataclass(frozen=True)
class TangentTarget:
    v: np.ndarray
    beta: np.ndarray


@dataclass(frozen=True)
class Sample:
    x: np.ndarray
    y: np.ndarray
    tangents: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "y", np.asarray(self.y, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "tangents", tuple(self.tangents))
        for tg in self.tangents:
            if tg.v.shape != self.x.shape:
                raise DimensionError("tangent direction must be shaped like the input")
            if np.size(tg.beta) != self.y.size:
                raise DimensionError("tangent target must have one entry per class")


@dataclass(frozen=True)
class TrainConfig:
    eta: float = 0.01
    lam: float = 0.0
    batch_size: int = 1
    iterations: int = 1
    seed: int = 0
    init_scale: float = 0.5

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigError(f"learning rate must be positive, got {self.eta}")
        if self.lam < 0:
            raise ConfigError(f"lambda must be nonnegative, got {self.lam}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if self.iterations < 0:
            raise ConfigError("iterations must be nonnegative")
        if self.init_scale < 0:
            raise ConfigError("init_scale must be nonnegative")


@dataclass(frozen=True)
class GradientSet:
    dW: tuple
    dB: tuple

    def __post_init__(self):
        object.__setattr__(self, "dW", tuple(self.dW))
        object.__setattr__(self, "dB", tuple(self.dB))

    @classmethod
    def zeros(cls, spec):
        return cls(
            [np.zeros(ls.filter_shape) for ls in spec.layers],
            [np.zeros(ls.conv_shape) for ls in spec.layers],
        )

    def __add__(self, other):
        return GradientSet(
            [a + b for a, b in zip(self.dW, other.dW)],
            [a + b for a, b in zip(self.dB, other.dB)],
        )

    def scaled(self, c):
        return GradientSet([c * a for a in self.dW], [c * a for a in self.dB])

    def flat(self):
        return np.concatenate([a.ravel() for pair in zip(self.dW, self.dB) for a in pair])


def check_second_order(spec, lam):
    """Reject a tangent penalty on a network with a non-smooth activation."""
    if lam > 0:
        for t, ls in enumerate(spec.layers, 1):
            if not ls.nl.smooth:
                raise ConfigError(
                    f"layer {t} uses {ls.nl.kind}; the tangent penalty (lambda > 0) "
                    "needs a twice-differentiable nonlinearity"
                )


# --- losses --------------------------------------------------------------------


def propagate_tangent(spec, state, trace, v):
    """Tangents V^1..V^{L+1} along a primal trace."""
    vs = [v]
    for ls, cache, lp in zip(spec.layers, trace.caches, state.params):
        vs.append(lyr.layer_df_apply(ls, cache, lp, vs[-1]))
    return vs


def loss_J(spec, state, sample):
    r = forward(spec, state, sample.x).output - sample.y
    return 0.5 * float(np.dot(r, r))


def loss_R(spec, state, sample):
    if not sample.tangents:
        return 0.0
    trace = forward(spec, state, sample.x)
    total = 0.0
    for tg in sample.tangents:
        r = propagate_tangent(spec, state, trace, tg.v)[-1].reshape(-1) - np.reshape(tg.beta, -1)
        total += 0.5 * float(np.dot(r, r))
    return total


def loss_total(spec, state, sample, lam):
    """J + lam * R for one sample."""
    j = loss_J(spec, state, sample)
    return j + lam * loss_R(spec, state, sample) if lam else j


# --- backward passes ---------------------------------------------------------


def _tangent_param_grads(ls, cache, lp, v_t, e_w, e_v):
    """(grad_W R, grad_B R) contributions of one layer.

    The ``e_w`` channel enters through grad^* f_t and the ``e_v`` channel
    through the adjoint of (V^t |> D grad f_t).
    """
    dW = lyr.layer_grad_w_adjoint(ls, cache, e_w) + lyr.layer_d2_mixed_w_adjoint(ls, cache, lp, v_t, e_v)
    dB = lyr.layer_grad_b_adjoint(ls, cache, e_w) + lyr.layer_d2_mixed_b_adjoint(ls, cache, lp, v_t, e_v)
    return dW, dB


def _data_backward(spec, state, trace, y):
    """Yield ``(t, grad_W J, grad_B J)`` for t = L..1."""
    layers, caches, params = spec.layers, trace.caches, state.params
    e_y = (trace.output - y).reshape(spec.class_count, 1, 1)
    for t in range(spec.depth, 0, -1):
        ls, cache = layers[t - 1], caches[t - 1]
        if t < spec.depth:
            e_y = lyr.layer_df_adjoint(layers[t], caches[t], params[t], e_y)
        yield t, lyr.layer_grad_w_adjoint(ls, cache, e_y), lyr.layer_grad_b_adjoint(ls, cache, e_y)


def _tangent_backward(spec, state, trace, target):
    """Yield ``(t, grad_W R, grad_B R)`` for one tangent target, t = L..1."""
    layers, caches, params = spec.layers, trace.caches, state.params
    L = spec.depth
    vs = propagate_tangent(spec, state, trace, target.v)
    e_w = np.zeros(layers[-1].out_shape)
    e_v = vs[L] - np.reshape(target.beta, layers[-1].out_shape)
    for t in range(L, 0, -1):
        if t < L:
            nxt = (layers[t], caches[t], params[t])
            # the e_w update consumes the old e_v
            e_w = lyr.layer_df_adjoint(*nxt, e_w) + lyr.layer_d2_xx_adjoint(*nxt, vs[t], e_v)
            e_v = lyr.layer_df_adjoint(*nxt, e_v)
        rW, rB = _tangent_param_grads(layers[t - 1], caches[t - 1], params[t - 1], vs[t - 1], e_w, e_v)
        yield t, rW, rB


def _backward(spec, state, sample, lam):
    """Yield ``(t, dW, dB)`` for t = L..1, the per-layer gradient of J + lam R.

    Every quantity is computed from ``state`` (the pre-update weights), so a
    caller may apply layer t's update as soon as it is yielded.
    """
    trace = forward(spec, state, sample.x)
    tangent_runs = []
    if lam != 0:
        tangent_runs = [_tangent_backward(spec, state, trace, tg) for tg in sample.tangents]
    for t, dW, dB in _data_backward(spec, state, trace, sample.y):
        if tangent_runs:
            rW = np.zeros_like(dW)
            rB = np.zeros_like(dB)
            for run in tangent_runs:
                _, gw, gb = next(run)
                rW = rW + gw
                rB = rB + gb
            dW = dW + lam * rW
            dB = dB + lam * rB
        yield t, dW, dB


def _collect(spec, steps):
    dW = [None] * spec.depth
    dB = [None] * spec.depth
    for t, gw, gb in steps:
        dW[t - 1], dB[t - 1] = gw, gb
    return GradientSet(dW, dB)


def grads_first_order(spec, state, sample):
    """Gradient of J in every W^t and B^t."""
    return _collect(spec, _backward(spec, state, sample, 0.0))


def grads_higher_order(spec, state, sample):
    """Gradient of R in every W^t and B^t (zero when the sample has no tangents)."""
    total = GradientSet.zeros(spec)
    if not sample.tangents:
        return total
    trace = forward(spec, state, sample.x)
    for tg in sample.tangents:
        total = total + _collect(spec, _tangent_backward(spec, state, trace, tg))
    return total


def grads_total(spec, state, sample, lam=0.0):
    """Gradient of J + lam * R."""
    return _collect(spec, _backward(spec, state, sample, lam))


# --- descent -----------------------------------------------------------------


def _apply(lp, eta, dW, dB):
    return LayerParams(w=lp.w - eta * dW, b=lp.b - eta * dB)


def descent_iteration(spec, state, sample, eta, lam=0.0):
    """One in-place descent iteration on a single sample.

    Layers are updated from last to first while the backward errors keep
    using the stored pre-update weights.
    """
    check_second_order(spec, lam)
    new = list(state.params)
    for t, dW, dB in _backward(spec, state, sample, lam):
        new[t - 1] = _apply(state.params[t - 1], eta, dW, dB)
    return NetworkState(new)


def batch_gradient(spec, state, batch, lam=0.0):
    """Sum of per-sample gradients of J + lam * R, in batch order."""
    if not batch:
        raise ValueError("empty batch")
    total = None
    for sample in batch:
        g = grads_total(spec, state, sample, lam)
        total = g if total is None else total + g
    return total


def descent_step(spec, state, batch, eta, lam=0.0):
    """One batch update: theta <- theta - eta * sum over the batch of grad(J + lam R)."""
    check_second_order(spec, lam)
    g = batch_gradient(spec, state, batch, lam)
    return NetworkState(_apply(lp, eta, dW, dB) for lp, dW, dB in zip(state.params, g.dW, g.dB))


def init_params(spec, seed, init_scale):
    """Filters i.i.d. uniform on [-init_scale, init_scale]; biases zero."""
    rng = np.random.default_rng(seed)
    params = []
    for ls in spec.layers:
        w = rng.uniform(-init_scale, init_scale, size=ls.filter_shape) if init_scale else np.zeros(ls.filter_shape)
        params.append(LayerParams(w=w, b=np.zeros(ls.conv_shape)))
    return NetworkState(params)


def dataset_losses(spec, state, samples, lam):
    """Summed (J, R, J + lam R) over a dataset."""
    j = sum(loss_J(spec, state, s) for s in samples)
    r = sum(loss_R(spec, state, s) for s in samples)
    return j, r, j + lam * r


@dataclass
class TrainResult:
    state: NetworkState
    curve: list = field(default_factory=list)  # (iteration, J, R, J + lam R)


def train(spec, samples, cfg, state=None, mode="batch"):
    """Run ``cfg.iterations`` descent iterations.

    Batches are consecutive runs of ``cfg.batch_size`` samples through a
    fixed seeded permutation of the data, wrapping around.  In ``"single"``
    mode every sample of the batch gets its own in-place iteration; in
    ``"batch"`` mode the batch gradient is summed and applied once.  The
    curve records dataset-summed losses after each iteration.
    """
    if mode not in ("single", "batch"):
        raise ValueError(f"unknown mode {mode!r}")
    if not samples:
        raise ValueError("no training samples")
    check_second_order(spec, cfg.lam)
    if state is None:
        state = init_params(spec, cfg.seed, cfg.init_scale)
    order = np.random.default_rng(cfg.seed).permutation(len(samples))
    result = TrainResult(state=state)
    pos = 0
    for it in range(1, cfg.iterations + 1):
        batch = [samples[order[(pos + i) % len(order)]] for i in range(cfg.batch_size)]
        pos = (pos + cfg.batch_size) % len(order)
        if mode == "batch":
            state = descent_step(spec, state, batch, cfg.eta, cfg.lam)
        else:
            for sample in batch:
                state = descent_iteration(spec, state, sample, cfg.eta, cfg.lam)
        result.curve.append((it, *dataset_losses(spec, state, samples, cfg.lam)))
    result.state = state
    return result
