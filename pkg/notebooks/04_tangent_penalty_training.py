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
# # Training with a tangent penalty
#
# A two-class toy set of noisy 6x6 images. The tangent targets ask the
# output to be insensitive to a small horizontal shift (`beta = 0` along the
# shift generator). We run full-batch descent with and without the penalty
# and compare the curves.

# %%
import numpy as np

from cfcnn import dataio
from cfcnn import training as tr
from cfcnn.network import NetworkSpec, final_layer, make_layer

samples = dataio.toy_blobs(40, 6, 6, seed=0)
shifted = [
    tr.Sample(s.x, s.y, [tr.TangentTarget(dataio.translation_tangent(s.x), np.zeros(2))])
    for s in samples
]
spec = NetworkSpec([make_layer(6, 6, 1, 3, 3, 2, pool=2), final_layer(2, 2, 2, 2)], 2)

# %%
plain = tr.train(spec, shifted, tr.TrainConfig(eta=0.01, lam=0.0, batch_size=40, iterations=50))
reg = tr.train(spec, shifted, tr.TrainConfig(eta=0.01, lam=0.1, batch_size=40, iterations=50))

for (it, j0, r0, _), (_, j1, r1, c1) in list(zip(plain.curve, reg.curve))[::10]:
    print(f"iter {it:3d}  lam=0: J {j0:.3f} R {r0:.3f}   lam=0.1: J {j1:.3f} R {r1:.3f} J+lam R {c1:.3f}")

# %% [markdown]
# Single-sample mode follows the printed per-sample update: layers are
# updated from last to first while the backward errors keep the old weights.

# %%
single = tr.train(spec, shifted, tr.TrainConfig(eta=0.01, lam=0.1, batch_size=4, iterations=10), mode="single")
print([round(c[3], 3) for c in single.curve])
