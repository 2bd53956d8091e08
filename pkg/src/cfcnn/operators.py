"""Structural operators of a convolutional layer and their adjoints.

Cropping, embedding, mixing, convolution, average pooling and the
elementwise nonlinearity, each paired with its adjoint.  Window positions
``(j, k)`` are 1-based, matching the index arithmetic of the formulas.
Convolution is the window inner product (cross-correlation); no kernel
flipping and no padding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .linalg import (
    DimensionError,
    GeometryError,
    RangeError,
    check_same_shape,
    describe,
)


@dataclass(frozen=True)
class ConvGeometry:
    """Valid-coverage geometry of a strided convolution.

    ``out_rows``/``out_cols`` are the largest counts such that the last
    window ``1 + (out - 1) * stride + p - 1`` still lies inside the input.
    """

    in_rows: int
    in_cols: int
    p: int
    q: int
    stride: int = 1
    out_rows: int = field(init=False)
    out_cols: int = field(init=False)

    def __post_init__(self):
        for name in ("in_rows", "in_cols", "p", "q", "stride"):
            if int(getattr(self, name)) < 1:
                raise GeometryError(f"{name} must be a positive integer")
        if self.p > self.in_rows or self.q > self.in_cols:
            raise GeometryError(
                f"filter {self.p}x{self.q} does not fit input "
                f"{self.in_rows}x{self.in_cols}"
            )
        object.__setattr__(self, "out_rows", (self.in_rows - self.p) // self.stride + 1)
        object.__setattr__(self, "out_cols", (self.in_cols - self.q) // self.stride + 1)

    def corner(self, j, k):
        """1-based top-left input corner of output position ``(j, k)``."""
        return 1 + (j - 1) * self.stride, 1 + (k - 1) * self.stride


@dataclass(frozen=True)
class FilterBank:
    """Filters ``W_a`` (shape ``(m2, p, q)``) with mixing vectors ``A_a`` (shape ``(m2, m1)``)."""

    filters: np.ndarray
    mixing: np.ndarray

    def __post_init__(self):
        filters = np.asarray(self.filters, dtype=np.float64)
        mixing = np.asarray(self.mixing, dtype=np.float64)
        if filters.ndim != 3 or mixing.ndim != 2:
            raise DimensionError("filters must be (m2, p, q) and mixing (m2, m1)")
        if mixing.shape[0] != filters.shape[0]:
            raise DimensionError(
                f"{mixing.shape[0]} mixing vectors for {filters.shape[0]} filters"
            )
        object.__setattr__(self, "filters", filters)
        object.__setattr__(self, "mixing", mixing)

    @property
    def out_depth(self):
        return self.filters.shape[0]

    @property
    def in_depth(self):
        return self.mixing.shape[1]

    @property
    def p(self):
        return self.filters.shape[1]

    @property
    def q(self):
        return self.filters.shape[2]


def full_mixing(out_depth, in_depth):
    """All-ones mixing vectors: every output channel sees every input channel."""
    return np.ones((out_depth, in_depth))


# --- elementwise nonlinearity ------------------------------------------------


def _tanh(x):
    return np.tanh(x)


def _tanh_d1(x):
    t = np.tanh(x)
    return 1.0 - t * t


def _tanh_d2(x):
    t = np.tanh(x)
    return -2.0 * t * (1.0 - t * t)


def _sigmoid_d1(x):
    s = expit(x)
    return s * (1.0 - s)


def _sigmoid_d2(x):
    s = expit(x)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


def _relu(x):
    return np.maximum(x, 0.0)


def _relu_d1(x):
    # convention: derivative 0 at the kink
    return (x > 0).astype(np.float64)


def _zero_like(x):
    return np.zeros_like(x, dtype=np.float64)


def _identity(x):
    return np.array(x, dtype=np.float64)


def _one_like(x):
    return np.ones_like(x, dtype=np.float64)


_KINDS = {
    "tanh": (_tanh, _tanh_d1, _tanh_d2),
    "sigmoid": (expit, _sigmoid_d1, _sigmoid_d2),
    "relu": (_relu, _relu_d1, _zero_like),
    # test hook only; not accepted by the config parser
    "identity": (_identity, _one_like, _zero_like),
}

CONFIG_NONLINEARITIES = ("tanh", "sigmoid", "relu")


@dataclass(frozen=True)
class Nonlinearity:
    """Scalar activation with its first and second derivatives."""

    kind: str = "tanh"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown nonlinearity {self.kind!r}")

    @property
    def smooth(self):
        return self.kind != "relu"

    def sigma(self, x):
        return _KINDS[self.kind][0](x)

    def d1(self, x):
        return _KINDS[self.kind][1](x)

    def d2(self, x):
        return _KINDS[self.kind][2](x)


def apply_S(nl, z):
    return nl.sigma(z)


def apply_S1(nl, z):
    return nl.d1(z)


def apply_S2(nl, z):
    return nl.d2(z)


def dS_apply(nl, z, v):
    """DS(z) . v = S'(z) (.) v.  Self-adjoint in ``v``."""
    check_same_shape(z, v)
    return nl.d1(z) * v


def d2S_apply(nl, z, v, w):
    """D^2 S(z) . (v, w) = S''(z) (.) v (.) w."""
    check_same_shape(z, v)
    check_same_shape(z, w)
    # v * w first so the result is exactly symmetric in (v, w)
    return nl.d2(z) * (v * w)


# --- cropping, embedding, mixing --------------------------------------------


def _check_window(j, k, p, q, n, l):
    if j < 1 or k < 1 or j + p - 1 > n or k + q - 1 > l:
        raise RangeError(
            f"window (j={j}, k={k}, p={p}, q={q}) out of bounds for input {n}x{l}"
        )


def crop(x, j, k, p, q):
    """Extract the ``p x q`` window with 1-based top-left corner ``(j, k)`` from every slice."""
    _, n, l = x.shape
    _check_window(j, k, p, q, n, l)
    return x[:, j - 1 : j - 1 + p, k - 1 : k - 1 + q].copy()


def embed(y, j, k, n, l):
    """Place ``y`` into an ``n x l`` zero stack at 1-based corner ``(j, k)``.

    This is the adjoint of :func:`crop` at the same corner.
    """
    m, p, q = y.shape
    _check_window(j, k, p, q, n, l)
    out = np.zeros((m, n, l))
    out[:, j - 1 : j - 1 + p, k - 1 : k - 1 + q] = y
    return out


def mix(v, u):
    """Weighted sum of the slices of ``u``; returns a single-slice stack."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != u.shape[0]:
        raise DimensionError(
            f"mixing vector of length {v.size} against stack of depth {u.shape[0]}"
        )
    return np.tensordot(v, u, axes=1)[np.newaxis]


def mix_adjoint(v, y):
    """Adjoint of :func:`mix`: slice ``i`` of the result is ``v_i * y``."""
    v = np.asarray(v, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 3:
        if y.shape[0] != 1:
            raise DimensionError(f"mix_adjoint expects one slice, got {y.shape[0]}")
        y = y[0]
    return v[:, np.newaxis, np.newaxis] * y


# --- convolution ---------------------------------------------------------------


def _check_geometry(g, x, mixing):
    m1, n, l = x.shape
    if (n, l) != (g.in_rows, g.in_cols):
        raise DimensionError(
            f"input {describe(x.shape)} does not match geometry {g.in_rows}x{g.in_cols}"
        )
    if mixing.shape[1] != m1:
        raise DimensionError(
            f"mixing vectors have length {mixing.shape[1]}, input depth is {m1}"
        )


def _windows(x, mixing, g):
    """All mixed windows: array ``(m2, out_rows, out_cols, p, q)``.

    Mixing commutes with cropping, so the input is mixed once per output
    channel and windows are views into the mixed maps.
    """
    mixed = np.tensordot(mixing, x, axes=1)
    view = sliding_window_view(mixed, (g.p, g.q), axis=(1, 2))
    s = g.stride
    return view[:, ::s, ::s][:, : g.out_rows, : g.out_cols]


def convolve(w, x, g):
    """C(W, X): entry ``(a, j, k)`` is ``<W_a, mix(A_a, crop(X, corner(j, k)))>``."""
    _check_geometry(g, x, w.mixing)
    if (w.p, w.q) != (g.p, g.q):
        raise DimensionError(f"filters are {w.p}x{w.q}, geometry expects {g.p}x{g.q}")
    win = _windows(x, w.mixing, g)
    return np.einsum("ajkrs,ars->ajk", win, w.filters)


def convolve_adjoint_wrt_w(x, y, g, mixing):
    """(C <| X)^* . Y, an element of the filter space ``(m2, p, q)``."""
    mixing = np.asarray(mixing, dtype=np.float64)
    _check_geometry(g, x, mixing)
    if y.shape != (mixing.shape[0], g.out_rows, g.out_cols):
        raise DimensionError(
            f"cotangent {describe(y.shape)} does not match output "
            f"{g.out_rows}x{g.out_cols}x{mixing.shape[0]}"
        )
    win = _windows(x, mixing, g)
    return np.einsum("ajk,ajkrs->ars", y, win)


def convolve_adjoint_wrt_x(w, z, g):
    """(W |> C)^* . Z, an element of the input space ``(m1, in_rows, in_cols)``.

    Accumulates ``Z_a[j, k] * W_a`` into each window (channel outer, then
    positions row-major) and spreads the result over input channels with
    the mixing vectors.
    """
    m2 = w.out_depth
    if z.shape != (m2, g.out_rows, g.out_cols):
        raise DimensionError(
            f"cotangent {describe(z.shape)} does not match output "
            f"{g.out_rows}x{g.out_cols}x{m2}"
        )
    acc = np.zeros((m2, g.in_rows, g.in_cols))
    for a in range(m2):
        wa = w.filters[a]
        for j in range(1, g.out_rows + 1):
            for k in range(1, g.out_cols + 1):
                r0, c0 = g.corner(j, k)
                acc[a, r0 - 1 : r0 - 1 + g.p, c0 - 1 : c0 - 1 + g.q] += z[a, j - 1, k - 1] * wa
    return np.tensordot(w.mixing.T, acc, axes=1)


# --- average pooling ---------------------------------------------------------


def _check_pool(y, r):
    _, n, l = y.shape
    if r < 1 or n % r or l % r:
        raise GeometryError(f"pooling factor {r} does not divide {n}x{l}")


def pool_avg(y, r):
    """Mean over disjoint ``r x r`` blocks of every slice."""
    _check_pool(y, r)
    m, n, l = y.shape
    return y.reshape(m, n // r, r, l // r, r).sum(axis=(2, 4)) / (r * r)


def pool_avg_adjoint(z, r):
    """Broadcast ``z[j, k] / r^2`` over the corresponding ``r x r`` block."""
    if r < 1:
        raise GeometryError(f"pooling factor must be positive, got {r}")
    return np.repeat(np.repeat(z, r, axis=1), r, axis=2) / (r * r)
