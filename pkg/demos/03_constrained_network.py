"""
The constrained two-layer network
=================================

Forward pass, exact gradients, one Adam step and the projection that keeps
every weight row inside its L1 budget.
"""

import numpy as np

from spatialdnn.net import (
    AdamState, Batch, NetworkShape, adam_step, backward, init_params, lipschitz_bound, loss, predict,
    project_constraints,
)

rng = np.random.default_rng(0)
shape = NetworkShape(q=6, r=4)
params = init_params(shape, v1=2.0, v2=2.0, seed=0)
print("parameters:", shape.n_params, "feasible:", params.is_feasible())

# A smooth target on [-1, 1]^6
x = rng.uniform(-1, 1, (128, 6))
y = 0.6 * np.tanh(x[:, 0] - 0.5 * x[:, 1]) + 0.2 * x[:, 2]
batch = Batch(x, y)
print("initial loss:", round(loss(params, batch), 4))

# Train with full-batch Adam; the projection runs after every step
state = AdamState.fresh(shape.n_params, alpha=0.01)
for step in range(1, 1001):
    state, params = adam_step(state, params, backward(params, batch))
    params = project_constraints(params)
    if step % 250 == 0:
        print(f"step {step}: loss {loss(params, batch):.5f}")
print("still feasible:", params.is_feasible())

# The output never exceeds the output-layer budget, whatever the input
print("max |output| on wild inputs:", np.abs(predict(params, rng.normal(size=(1000, 6)) * 100)).max())

# Constant for the parameter-space Lipschitz bound
print("V* for r=4, p=1, Gamma=3, V1=V2=2:", lipschitz_bound(4, 1, 3, 2.0, 2.0))
