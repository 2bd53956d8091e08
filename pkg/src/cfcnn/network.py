"""Layer composition F = f_L o ... o f_1 with forward, tangent and adjoint passes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import layer as lyr
from .layer import LayerSpec
from .linalg import DimensionError, describe
from .operators import ConvGeometry, Nonlinearity


class ConfigError(ValueError):
    """A network or training configuration is invalid."""


def make_layer(in_rows, in_cols, in_depth, p, q, out_depth, stride=1, pool=1,
               nl="tanh", mixing=None, final=False):
    """Convenience constructor for a :class:`LayerSpec`."""
    if not isinstance(nl, Nonlinearity):
        nl = Nonlinearity(nl)
    return LayerSpec(
        geometry=ConvGeometry(in_rows, in_cols, p, q, stride),
        in_depth=in_depth,
        out_depth=out_depth,
        pool_r=pool,
        nl=nl,
        mixing=mixing,
        is_final=final,
    )


def final_layer(in_rows, in_cols, in_depth, classes, nl="tanh", mixing=None):
    """Fully connected output layer over the whole input, with full mixing by default."""
    return make_layer(in_rows, in_cols, in_depth, in_rows, in_cols, classes,
                      nl=nl, mixing=mixing, final=True)


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    class_count: int

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ConfigError("network needs at least one layer")
        for t in range(len(layers) - 1):
            out, nxt = layers[t].out_shape, layers[t + 1].in_shape
            if out != nxt:
                raise ConfigError(
                    f"layer {t + 1} output {describe(out)} does not match "
                    f"layer {t + 2} input {describe(nxt)}"
                )
            if layers[t].is_final:
                raise ConfigError(f"layer {t + 1} is marked final but is not last")
        last = layers[-1]
        if not last.is_final:
            raise ConfigError(f"last layer {len(layers)} must be the fully connected final layer")
        if last.out_shape != (self.class_count, 1, 1):
            raise ConfigError(
                f"final layer {len(layers)} produces {describe(last.out_shape)}, "
                f"expected 1x1x{self.class_count}"
            )

    @property
    def depth(self):
        return len(self.layers)

    @property
    def in_shape(self):
        return self.layers[0].in_shape

    @property
    def nonlinearities(self):
        return [spec.nl for spec in self.layers]


@dataclass(frozen=True)
class NetworkState:
    params: tuple

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))

    def check(self, spec):
        if len(self.params) != spec.depth:
            raise DimensionError(f"{len(self.params)} parameter sets for {spec.depth} layers")
        for ls, lp in zip(spec.layers, self.params):
            lp.check(ls)

    def replace(self, t, params):
        """Copy with the parameters of 1-based layer ``t`` replaced."""
        ps = list(self.params)
        ps[t - 1] = params
        return NetworkState(ps)


@dataclass(frozen=True)
class ForwardTrace:
    caches: tuple
    output: np.ndarray
    tangent_out: Optional[np.ndarray] = None
    tangents: Optional[tuple] = None  # V^1 .. V^{L+1}


def _check_input(spec, x, what="input"):
    if x.shape != spec.in_shape:
        raise DimensionError(
            f"{what} {describe(x.shape)} does not match network input {describe(spec.in_shape)}"
        )


def forward(spec, state, x):
    """Primal pass; ``output`` is the length-N vector X^{L+1}."""
    _check_input(spec, x)
    caches = []
    for ls, lp in zip(spec.layers, state.params):
        x, cache = lyr.layer_forward(ls, lp, x)
        caches.append(cache)
    return ForwardTrace(caches=tuple(caches), output=x.reshape(-1))


def forward_tangent(spec, state, x, v):
    """Primal pass plus V^{t+1} = Df_t(X^t) . V^t, starting from V^1 = v."""
    _check_input(spec, x)
    _check_input(spec, v, "tangent")
    caches = []
    tangents = [v]
    for ls, lp in zip(spec.layers, state.params):
        x, v, cache = lyr.layer_forward_tangent(ls, lp, x, v)
        caches.append(cache)
        tangents.append(v)
    return ForwardTrace(
        caches=tuple(caches),
        output=x.reshape(-1),
        tangent_out=v.reshape(-1),
        tangents=tuple(tangents),
    )


def _as_output_stack(spec, e):
    e = np.asarray(e, dtype=np.float64)
    if e.size != spec.class_count:
        raise DimensionError(f"output cotangent has {e.size} entries, network has {spec.class_count} classes")
    return e.reshape(spec.class_count, 1, 1)


def omega_adjoint_apply(spec, state, trace, t, e):
    """D^* omega_t(X^t) . e for 1-based ``t`` in ``1..L+1``.

    Folds layer adjoints from the last layer down to ``t``.  At ``t = L + 1``
    the tail map is the identity and ``e`` comes back unchanged.
    """
    L = spec.depth
    if not 1 <= t <= L + 1:
        raise IndexError(f"layer index {t} outside 1..{L + 1}")
    if t == L + 1:
        return np.array(e, dtype=np.float64)
    cur = _as_output_stack(spec, e)
    for s in range(L, t - 1, -1):
        cur = lyr.layer_df_adjoint(spec.layers[s - 1], trace.caches[s - 1], state.params[s - 1], cur)
    return cur


def omega_apply(spec, state, trace, t, u):
    """D omega_t(X^t) . u, the forward counterpart of :func:`omega_adjoint_apply`."""
    L = spec.depth
    if not 1 <= t <= L + 1:
        raise IndexError(f"layer index {t} outside 1..{L + 1}")
    cur = u
    for s in range(t, L + 1):
        cur = lyr.layer_df_apply(spec.layers[s - 1], trace.caches[s - 1], state.params[s - 1], cur)
    return np.asarray(cur).reshape(-1) if t <= L else np.array(u, dtype=np.float64)


def state_input(trace, t):
    """X^t from a trace (1-based)."""
    return trace.caches[t - 1].x
