"""One convolutional layer f(X; W, B) = pool(S(conv(W, X) + B)) and its derivatives.

Forward actions (``*_apply``) and adjoint actions (``*_adjoint``) are
provided for the state derivative Df, the parameter derivatives grad_W f
and grad_B f, and the second derivatives contracted with a tangent
direction V: (V |> D grad_W f), (V |> D grad_B f) and (V |> D^2 f).
Everything is evaluated at the point recorded in a :class:`LayerCache`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import operators as ops
from .linalg import DimensionError, GeometryError, describe, hadamard
from .operators import ConvGeometry, FilterBank, Nonlinearity


@dataclass(frozen=True)
class LayerSpec:
    geometry: ConvGeometry
    in_depth: int
    out_depth: int
    pool_r: int = 1
    nl: Nonlinearity = field(default_factory=Nonlinearity)
    mixing: Optional[np.ndarray] = None
    is_final: bool = False

    def __post_init__(self):
        g = self.geometry
        if self.in_depth < 1 or self.out_depth < 1:
            raise GeometryError("layer depths must be positive")
        if self.pool_r < 1 or g.out_rows % self.pool_r or g.out_cols % self.pool_r:
            raise GeometryError(
                f"pooling factor {self.pool_r} does not divide convolution output "
                f"{g.out_rows}x{g.out_cols}"
            )
        if self.mixing is None:
            mixing = ops.full_mixing(self.out_depth, self.in_depth)
        else:
            mixing = np.array(self.mixing, dtype=np.float64)
        if mixing.shape != (self.out_depth, self.in_depth):
            raise DimensionError(
                f"mixing must be {self.out_depth} vectors of length {self.in_depth}, "
                f"got shape {mixing.shape}"
            )
        object.__setattr__(self, "mixing", mixing)
        if self.is_final:
            if (g.p, g.q) != (g.in_rows, g.in_cols) or g.stride != 1 or self.pool_r != 1:
                raise GeometryError(
                    "final layer must be fully connected: p x q equal to the input, "
                    "stride 1, pooling 1"
                )

    @property
    def in_shape(self):
        return (self.in_depth, self.geometry.in_rows, self.geometry.in_cols)

    @property
    def conv_shape(self):
        """Shape of the pre-activation Z, which is also the bias shape."""
        return (self.out_depth, self.geometry.out_rows, self.geometry.out_cols)

    @property
    def out_shape(self):
        g = self.geometry
        return (self.out_depth, g.out_rows // self.pool_r, g.out_cols // self.pool_r)

    @property
    def filter_shape(self):
        return (self.out_depth, self.geometry.p, self.geometry.q)

    def bank(self, filters):
        return FilterBank(filters, self.mixing)


@dataclass(frozen=True)
class LayerParams:
    w: np.ndarray
    b: np.ndarray

    def check(self, spec):
        if self.w.shape != spec.filter_shape:
            raise DimensionError(
                f"filters {describe(self.w.shape)}, layer expects {describe(spec.filter_shape)}"
            )
        if self.b.shape != spec.conv_shape:
            raise DimensionError(
                f"bias {describe(self.b.shape)}, layer expects {describe(spec.conv_shape)}"
            )


@dataclass(frozen=True)
class LayerCache:
    x: np.ndarray
    z: np.ndarray
    out: np.ndarray
    v_in: Optional[np.ndarray] = None
    v_tangent_z: Optional[np.ndarray] = None


def _check_state(spec, x, what="input"):
    if x.shape != spec.in_shape:
        raise DimensionError(
            f"{what} {describe(x.shape)} does not match layer input {describe(spec.in_shape)}"
        )


def _check_out(spec, e):
    if e.shape != spec.out_shape:
        raise DimensionError(
            f"cotangent {describe(e.shape)} does not match layer output {describe(spec.out_shape)}"
        )


def layer_forward(spec, params, x):
    _check_state(spec, x)
    z = ops.convolve(spec.bank(params.w), x, spec.geometry) + params.b
    out = ops.pool_avg(ops.apply_S(spec.nl, z), spec.pool_r)
    return out, LayerCache(x=x, z=z, out=out)


def layer_forward_tangent(spec, params, x, v):
    """Forward pass that also pushes the tangent ``v`` through Df."""
    _check_state(spec, v, "tangent")
    out, cache = layer_forward(spec, params, x)
    cv = ops.convolve(spec.bank(params.w), v, spec.geometry)
    v_out = ops.pool_avg(ops.dS_apply(spec.nl, cache.z, cv), spec.pool_r)
    cache = LayerCache(x=cache.x, z=cache.z, out=out, v_in=v, v_tangent_z=cv)
    return out, v_out, cache


# --- first derivatives -----------------------------------------------------


def layer_df_apply(spec, cache, params, v):
    """Df . v = pool(S'(Z) (.) C(W, v))."""
    _check_state(spec, v, "direction")
    cv = ops.convolve(spec.bank(params.w), v, spec.geometry)
    return ops.pool_avg(ops.dS_apply(spec.nl, cache.z, cv), spec.pool_r)


def _backprop_to_z(spec, cache, e):
    """S'(Z) (.) pool^*(e): the cotangent at the pre-activation."""
    _check_out(spec, e)
    return ops.dS_apply(spec.nl, cache.z, ops.pool_avg_adjoint(e, spec.pool_r))


def layer_df_adjoint(spec, cache, params, e):
    """D^*f . e = (W |> C)^* (S'(Z) (.) pool^*(e))."""
    ez = _backprop_to_z(spec, cache, e)
    return ops.convolve_adjoint_wrt_x(spec.bank(params.w), ez, spec.geometry)


def layer_grad_w_apply(spec, cache, u):
    """grad_W f . U = pool(S'(Z) (.) C(U, X))."""
    cu = ops.convolve(spec.bank(u), cache.x, spec.geometry)
    return ops.pool_avg(ops.dS_apply(spec.nl, cache.z, cu), spec.pool_r)


def layer_grad_w_adjoint(spec, cache, e):
    ez = _backprop_to_z(spec, cache, e)
    return ops.convolve_adjoint_wrt_w(cache.x, ez, spec.geometry, spec.mixing)


def layer_grad_b_apply(spec, cache, u):
    return ops.pool_avg(ops.dS_apply(spec.nl, cache.z, u), spec.pool_r)


def layer_grad_b_adjoint(spec, cache, e):
    return _backprop_to_z(spec, cache, e)


# --- second derivatives ----------------------------------------------------


def _conv_w(spec, params, v):
    return ops.convolve(spec.bank(params.w), v, spec.geometry)


def layer_d2_mixed_w_apply(spec, cache, params, v, u):
    """(V |> D grad_W f) . U

    = pool(S''(Z) (.) C(W, V) (.) C(U, X)) + pool(S'(Z) (.) C(U, V)).
    """
    g = spec.geometry
    bank_u = spec.bank(u)
    curv = ops.d2S_apply(spec.nl, cache.z, _conv_w(spec, params, v), ops.convolve(bank_u, cache.x, g))
    lin = ops.dS_apply(spec.nl, cache.z, ops.convolve(bank_u, v, g))
    return ops.pool_avg(curv, spec.pool_r) + ops.pool_avg(lin, spec.pool_r)


def layer_d2_mixed_w_adjoint(spec, cache, params, v, e):
    """(V |> D grad_W f)^* . e

    = (C <| X)^* (S''(Z) (.) C(W, V) (.) pool^* e) + (C <| V)^* (S'(Z) (.) pool^* e).
    """
    _check_state(spec, v, "direction")
    _check_out(spec, e)
    g = spec.geometry
    pe = ops.pool_avg_adjoint(e, spec.pool_r)
    curv = ops.d2S_apply(spec.nl, cache.z, _conv_w(spec, params, v), pe)
    lin = ops.dS_apply(spec.nl, cache.z, pe)
    return (
        ops.convolve_adjoint_wrt_w(cache.x, curv, g, spec.mixing)
        + ops.convolve_adjoint_wrt_w(v, lin, g, spec.mixing)
    )


def layer_d2_mixed_b_apply(spec, cache, params, v, u):
    """(V |> D grad_B f) . U = pool(S''(Z) (.) C(W, V) (.) U)."""
    return ops.pool_avg(ops.d2S_apply(spec.nl, cache.z, _conv_w(spec, params, v), u), spec.pool_r)


def layer_d2_mixed_b_adjoint(spec, cache, params, v, e):
    _check_state(spec, v, "direction")
    _check_out(spec, e)
    pe = ops.pool_avg_adjoint(e, spec.pool_r)
    return ops.d2S_apply(spec.nl, cache.z, _conv_w(spec, params, v), pe)


def layer_d2_xx_apply(spec, cache, params, v, vt):
    """(V |> D^2 f) . Vt = pool(S''(Z) (.) C(W, V) (.) C(W, Vt))."""
    return ops.pool_avg(
        ops.d2S_apply(spec.nl, cache.z, _conv_w(spec, params, v), _conv_w(spec, params, vt)),
        spec.pool_r,
    )


def layer_d2_xx_adjoint(spec, cache, params, v, e):
    _check_state(spec, v, "direction")
    _check_out(spec, e)
    pe = ops.pool_avg_adjoint(e, spec.pool_r)
    ez = ops.d2S_apply(spec.nl, cache.z, _conv_w(spec, params, v), pe)
    return ops.convolve_adjoint_wrt_x(spec.bank(params.w), ez, spec.geometry)


def layer_grad_w_df_apply(spec, cache, params, u, e):
    """grad_W Df . (U, e): derivative of ``Df . e`` in the filters along ``U``.

    Evaluated in the opposite order from :func:`layer_d2_mixed_w_apply`;
    the two agree by symmetry of mixed partials.
    """
    g = spec.geometry
    bank_u = spec.bank(u)
    s2 = ops.apply_S2(spec.nl, cache.z)
    s1 = ops.apply_S1(spec.nl, cache.z)
    dz = ops.convolve(bank_u, cache.x, g)
    term = hadamard(hadamard(dz, s2), _conv_w(spec, params, e))
    term = term + hadamard(s1, ops.convolve(bank_u, e, g))
    return ops.pool_avg(term, spec.pool_r)


def layer_grad_b_df_apply(spec, cache, params, u, e):
    s2 = ops.apply_S2(spec.nl, cache.z)
    return ops.pool_avg(hadamard(hadamard(u, s2), _conv_w(spec, params, e)), spec.pool_r)
