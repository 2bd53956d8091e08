"""Seeded defects for negative-control tests.

Each entry is a context manager that patches one kernel with a plausible
bug.  Library code calls kernels through their modules, so patching the
module attribute is enough.
"""

import contextlib
from unittest import mock

import numpy as np

from cfcnn import layer as lyr
from cfcnn import operators as ops
from cfcnn import training


def _pool_adjoint_unscaled(z, r):
    return np.repeat(np.repeat(z, r, axis=1), r, axis=2)


def _crop_shifted(x, j, k, p, q):
    # column index off by one; padding keeps every window in range
    xp = np.pad(x, ((0, 0), (0, 0), (0, 1)))
    return xp[:, j - 1 : j - 1 + p, k : k + q].copy()


_orig_tangent_grads = training._tangent_param_grads


def _tangent_grads_swapped(ls, cache, lp, v_t, e_w, e_v):
    return _orig_tangent_grads(ls, cache, lp, v_t, e_v, e_w)


def _mixed_w_adjoint_no_curvature(spec, cache, params, v, e):
    pe = ops.pool_avg_adjoint(e, spec.pool_r)
    lin = ops.dS_apply(spec.nl, cache.z, pe)
    return ops.convolve_adjoint_wrt_w(v, lin, spec.geometry, spec.mixing)


def _conv_adjoint_x_unit_stride(w, z, g):
    m2 = w.out_depth
    acc = np.zeros((m2, g.in_rows, g.in_cols))
    for a in range(m2):
        for j in range(g.out_rows):
            for k in range(g.out_cols):
                # windows placed as if the stride were 1
                acc[a, j : j + g.p, k : k + g.q] += z[a, j, k] * w.filters[a]
    return np.tensordot(w.mixing.T, acc, axes=1)


MUTANTS = {
    "pool_adjoint_missing_scale": (ops, "pool_avg_adjoint", _pool_adjoint_unscaled),
    "crop_off_by_one": (ops, "crop", _crop_shifted),
    "tangent_errors_swapped": (training, "_tangent_param_grads", _tangent_grads_swapped),
    "mixed_w_missing_curvature": (lyr, "layer_d2_mixed_w_adjoint", _mixed_w_adjoint_no_curvature),
    "conv_adjoint_stride_ignored": (ops, "convolve_adjoint_wrt_x", _conv_adjoint_x_unit_stride),
}


@contextlib.contextmanager
def mutant(name):
    module, attr, repl = MUTANTS[name]
    with mock.patch.object(module, attr, repl):
        yield
