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
# # Gradient checks
#
# Two losses are trained: the data loss `J = 1/2 ||F(X) - y||^2` and the
# tangent penalty `R = 1/2 ||DF(X) . V - beta||^2`. Their gradients come from
# three backward error signals. Here both are compared with central finite
# differences (step `1e-5`) on a family of seeded random networks.

# %%
import numpy as np

from cfcnn import training as tr
from cfcnn import verify

# %%
rows = []
for i in range(10):
    rng = np.random.default_rng([1, i])
    spec = verify.random_network(rng, 1 + i % 3, 5, ("tanh", "sigmoid")[i % 2])
    state = verify.random_state(rng, spec)
    target = tr.TangentTarget(rng.standard_normal(spec.in_shape), rng.standard_normal(spec.class_count))
    sample = tr.Sample(rng.standard_normal(spec.in_shape), rng.standard_normal(spec.class_count), [target])

    j = verify.compare_gradients(
        tr.grads_first_order(spec, state, sample),
        verify.fd_gradient(lambda s: tr.loss_J(spec, s, sample), state), 1e-6, 1e-8)
    r = verify.compare_gradients(
        tr.grads_higher_order(spec, state, sample),
        verify.fd_gradient(lambda s: tr.loss_R(spec, s, sample), state), 1e-5, 1e-7)
    rows.append((i, spec.depth, j.max_rel, r.max_rel, j.passed and r.passed))

for row in rows:
    print("net %2d  L=%d  J %.1e  R %.1e  %s" % row)

# %% [markdown]
# Coordinates whose analytic value is below `1e-6` are judged by absolute
# error instead, since their finite-difference estimate is mostly roundoff.
