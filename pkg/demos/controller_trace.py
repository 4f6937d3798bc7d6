#!/usr/bin/env python3
"""A frozen controller reproduces plain SGD; an evolved-style one modulates per layer."""
import numpy as np

from nmgrn import harness, neuromod as nm, nn
from nmgrn.data import synth_dataset
from nmgrn.grneat import EvolutionConfig, random_genome
from nmgrn.optimizers import baseline_presets

data = synth_dataset("spirals", 256, 3, seed=0)
spec = harness.resolve_model("m1", "desk", 3, (2,))
print(spec.name, "weighted layers:", spec.weighted_layer_count)

# --- reduction: fixed hyperparameters through the neuromodulated step
hyper = baseline_presets("SGD", "m1")
a, b = nn.build_network(spec, 5), nn.build_network(spec, 5)
opt_a, opt_b = nm.init_optimizer_states(a, "sgd"), nm.init_optimizer_states(b, "sgd")
frozen = nm.FixedController(hyper, a)
for it in range(50):
    idx = np.arange(it * 5, it * 5 + 32) % len(data)
    nm.neuromod_train_step(a, data.inputs[idx], data.labels[idx], frozen, opt_a, telemetry=False)
    nm.baseline_train_step(b, data.inputs[idx], data.labels[idx], hyper, opt_b)
print("frozen controller == plain SGD:", all(np.array_equal(p, q) for p, q in zip(a.params, b.params)))

# --- a random controller genome: one GRN copy per parameter group
genome = random_genome(13, 4, EvolutionConfig(initial_regulators=4), np.random.default_rng(2))
net = nn.build_network(spec, 5)
bank = nm.ControllerBank(genome, net, "sgd")
opt = nm.init_optimizer_states(net, "sgd")
print("controller copies:", len(bank.states))
rows = []
for it in range(3):
    idx = np.arange(it * 32, it * 32 + 32)
    rows += nm.neuromod_train_step(net, data.inputs[idx], data.labels[idx], bank, opt, iteration=it)[1]
for r in rows[-len(bank.states):]:
    print(f"iter {r['iteration']} layer {r['layer_index']} {r['group']}: "
          f"eta={r['eta']:.4f} alpha={r['alpha']:.4f} |w|={r['in1']:.3f} |grad|={r['in3']:.3f}")
