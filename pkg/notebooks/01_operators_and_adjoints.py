# ---
# jupyter:
#   jupytext:
#     formats: ipynb,py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
#       format_version: '1.3'
#   kernelspec:
#     display_name: Python 3
#     language: python
#     name: python3
# ---

# %% [markdown]
# # Operators and their adjoints
#
# Every building block of a layer is a linear map between feature stacks
# (arrays shaped `(depth, rows, cols)`). Backpropagation only needs each
# map's adjoint, so the first thing to check is that every adjoint really
# is one: `<y, L x> == <L* y, x>` for random `x, y`, and the dense matrix
# of `L*` is the transpose of the dense matrix of `L`.

# %%
import numpy as np

from cfcnn import operators as ops
from cfcnn import verify
from cfcnn.linalg import inner
from cfcnn.operators import ConvGeometry, FilterBank

rng = np.random.default_rng(0)

# %% [markdown]
# ## Cropping, mixing, convolution
#
# Window indices are 1-based. A convolution crops each window, mixes the
# input slices with a per-channel vector, and takes the inner product with
# the filter.

# %%
grid = np.arange(1.0, 10.0).reshape(1, 3, 3)
print(ops.crop(grid, 2, 2, 2, 2)[0])

g = ConvGeometry(in_rows=7, in_cols=6, p=3, q=2, stride=2)
bank = FilterBank(rng.standard_normal((2, 3, 2)), rng.standard_normal((2, 3)))
x = rng.standard_normal((3, 7, 6))
z = ops.convolve(bank, x, g)
print("conv output", z.shape)

y = rng.standard_normal(z.shape)
print("adjoint wrt x gap", inner(y, z) - inner(ops.convolve_adjoint_wrt_x(bank, y, g), x))
print("adjoint wrt W gap", inner(y, z) - inner(ops.convolve_adjoint_wrt_w(x, y, g, bank.mixing), bank.filters))

# %% [markdown]
# ## Pooling as a matrix
#
# Materializing a map on basis stacks gives its matrix; average pooling of
# a 2x2 block is a row of quarters.

# %%
print(verify.materialize(lambda t: ops.pool_avg(t, 2), (1, 2, 2), (1, 1, 1)).entries)

# %% [markdown]
# ## The full suite
#
# All thirteen operator families, 100 random instances each with every
# dimension at most 6.

# %%
for rep in verify.adjoint_suite(max_dim=6, trials=100):
    print(rep.line())
