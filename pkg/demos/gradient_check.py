#!/usr/bin/env python3
"""Backpropagation against central differences on a tiny conv net."""
import numpy as np

from nmgrn import nn
from nmgrn.nn import Conv, Dense, MaxPool, ModelSpec

spec = ModelSpec("tiny", (Conv(3), MaxPool(), Conv(4), Dense(6), Dense(3)), 3, (2, 6, 6))
print("layer output shapes:", spec.shapes())

net = nn.build_network(spec, seed=0)
rng = np.random.default_rng(1)
x = rng.normal(size=(4,) + spec.input_shape)
y = rng.integers(0, 3, size=4)

for loss, fn in (("cross_entropy", nn.loss_cross_entropy), ("mse", nn.loss_mse)):
    analytic = nn.backward(net, x, y, loss)
    worst = 0.0
    h = 1e-5
    for p, g in zip(net.params, analytic):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        # a handful of coordinates per group keeps this quick
        for k in rng.choice(flat.size, size=min(5, flat.size), replace=False):
            old = flat[k]
            flat[k] = old + h
            up = fn(nn.forward(net, x), y)
            flat[k] = old - h
            down = fn(nn.forward(net, x), y)
            flat[k] = old
            num = (up - down) / (2 * h)
            worst = max(worst, abs(num - gflat[k]) / max(abs(num), abs(gflat[k]), 1e-6))
    print(f"{loss:>13}: max relative error {worst:.2e}")
