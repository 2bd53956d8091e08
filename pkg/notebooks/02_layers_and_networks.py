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
# # Layers and networks
#
# A layer maps `X` to `pool(S(conv(W, X) + B))`. A network chains layers
# and ends in a fully connected layer whose output is `1 x 1 x N`, one
# entry per class. With every layer fully connected the network is an
# ordinary dense MLP, which gives an independent oracle.

# %%
import math

import numpy as np

from cfcnn import verify
from cfcnn.network import NetworkSpec, final_layer, forward, forward_tangent, make_layer
from cfcnn.training import init_params

rng = np.random.default_rng(1)

# %%
spec = NetworkSpec(
    [make_layer(8, 8, 1, 3, 3, 4, pool=2), make_layer(3, 3, 4, 2, 2, 3), final_layer(2, 2, 3, 2)],
    class_count=2,
)
for t, ls in enumerate(spec.layers, 1):
    print(t, ls.in_shape, "->", ls.out_shape)

state = init_params(spec, seed=0, init_scale=0.5)
x = rng.standard_normal(spec.in_shape)
print(forward(spec, state, x).output)

# %% [markdown]
# ## Tangent propagation
#
# Pushing a direction `V` through the layer derivatives gives `DF(X) . V`.
# It should agree with a central difference of the network output.

# %%
v = rng.standard_normal(spec.in_shape)
tangent = forward_tangent(spec, state, x, v).tangent_out
numeric = verify.fd_directional(lambda z: forward(spec, state, z).output, x, v)
print(tangent, numeric)

# %% [markdown]
# ## Fully connected special case

# %%
fc = verify.fc_network([6, 5, 3], "tanh", in_shape=(1, 2, 3))
fc_state = verify.random_state(rng, fc)
xi = rng.standard_normal(fc.in_shape)
W, b = verify.fc_dense_weights(fc, fc_state)
print(np.abs(forward(fc, fc_state, xi).output - verify.dense_mlp_oracle(W, b, math.tanh, xi)).max())
