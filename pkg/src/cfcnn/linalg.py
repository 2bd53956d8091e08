"""Feature stacks and the inner-product-space arithmetic on them.

A feature stack is an element of R^{n x l} (x) R^m, stored as a float64
array of shape ``(m, n, l)``: slice index outermost, then row-major inside
each slice.  Flattening in C order therefore gives the canonical
slice-major layout used everywhere in the package (dense materialization,
data files).  All bases are the standard orthonormal ones, so a stack is
fully determined by its scalars.
"""

from __future__ import annotations

import numpy as np


class DimensionError(ValueError):
    """Operands have incompatible shapes."""


class RangeError(IndexError):
    """A window or index falls outside its container."""


class GeometryError(ValueError):
    """Convolution or pooling geometry is inconsistent."""


def feature_stack(data, rows=None, cols=None, depth=None):
    """Build a feature stack from nested sequences or a flat array.

    With ``rows``/``cols``/``depth`` given, ``data`` is read in slice-major
    order and must hold exactly ``rows * cols * depth`` scalars.  Without
    them, a 2-D input becomes a single-slice stack and a 3-D input is taken
    as ``(depth, rows, cols)`` already.
    """
    arr = np.array(data, dtype=np.float64)
    if rows is not None:
        expected = rows * cols * depth
        if arr.size != expected:
            raise DimensionError(
                f"expected {expected} scalars for a {rows}x{cols}x{depth} "
                f"stack, got {arr.size}"
            )
        return arr.reshape(depth, rows, cols)
    if arr.ndim == 2:
        return arr[np.newaxis]
    if arr.ndim != 3:
        raise DimensionError(f"cannot interpret array of shape {arr.shape} as a stack")
    return arr


def zeros(rows, cols, depth):
    return np.zeros((depth, rows, cols))


def ones(rows, cols, depth):
    return np.ones((depth, rows, cols))


def dims(a):
    """Return ``(rows, cols, depth)`` of a stack."""
    m, n, l = a.shape
    return n, l, m


def describe(shape):
    """Render a ``(depth, rows, cols)`` array shape as ``rows x cols x depth``."""
    if len(shape) == 3:
        m, n, l = shape
        return f"{n}x{l}x{m}"
    return "x".join(str(s) for s in shape)


def check_same_shape(a, b, what="operands"):
    if a.shape != b.shape:
        raise DimensionError(
            f"{what} differ in shape: {describe(a.shape)} vs {describe(b.shape)}"
        )


def inner(a, b):
    """Inner product <a, b>: sum of elementwise products."""
    check_same_shape(a, b)
    return float(np.dot(a.ravel(), b.ravel()))


def hadamard(a, b):
    """Slice-wise elementwise product a (.) b."""
    check_same_shape(a, b)
    return a * b


def axpy(alpha, x, y):
    """Return ``alpha * x + y``."""
    check_same_shape(x, y)
    return alpha * x + y


def frobenius_norm_sq(a):
    """Squared norm induced by :func:`inner`."""
    flat = np.asarray(a, dtype=np.float64).ravel()
    return float(np.dot(flat, flat))
