#!/usr/bin/env python3
"""The tape in one page: record a forward pass, replay it backwards.

Composes a tiny two-layer computation, reads gradients off the tape,
confirms one entry against a central finite difference, then lets Adam
drive the loss toward zero.
"""

import numpy as np

from dpgnn import autodiff as ad

rng = np.random.default_rng(0)
x_val = rng.standard_normal((5, 3))
w1 = ad.Param("w1", rng.standard_normal((3, 4)))
w2 = ad.Param("w2", rng.standard_normal((4, 2)))


def forward():
    tape = ad.Tape()
    x = tape.constant(x_val)
    h = ad.relu(ad.matmul(x, w1.bind(tape)))
    out = ad.matmul(h, w2.bind(tape))
    # scalar readout: 0.5 * ||out||^2
    loss = ad.scalar_combine([(ad.sum_all(ad.mul_elem(out, out)), 0.5)])
    return tape, loss


tape, loss = forward()
print("initial loss:", round(loss.values[0, 0], 6))
grads = ad.param_grads(tape, ad.backward(tape, loss))
print("gradient shapes:", {k: v.shape for k, v in grads.items()})

# finite-difference spot check of dLoss/dw1[0,0]
eps = 1e-6
orig = w1.value[0, 0]
w1.value[0, 0] = orig + eps
up = forward()[1].values[0, 0]
w1.value[0, 0] = orig - eps
down = forward()[1].values[0, 0]
w1.value[0, 0] = orig
print(f"analytic dL/dw1[0,0] = {grads['w1'][0, 0]:.8f}")
print(f"numeric  dL/dw1[0,0] = {(up - down) / (2 * eps):.8f}")

# Adam drives the quadratic loss toward zero
state = ad.AdamState()
for step in range(200):
    tape, loss = forward()
    grads = ad.param_grads(tape, ad.backward(tape, loss))
    ad.adam_step([w1, w2], grads, state, lr=0.05)
    if step % 50 == 0 or step == 199:
        print(f"step {step:3d}  loss = {loss.values[0, 0]:.6f}")
