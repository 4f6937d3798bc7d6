#!/usr/bin/env python3
"""Desk-scale evolution on Blobs, then a comparison against the baselines."""
import tempfile
from pathlib import Path

from nmgrn import harness

out = Path(tempfile.mkdtemp(prefix="nmgrn-demo-"))
run = harness.RunConfig(
    base="sgd", dataset="blobs", synth_classes=4, synth_noise=0.3,
    models=("m0", "m1"), epochs=3, population=12, generations=8, seed=1, out=str(out),
)

best, history, genome_path, history_path = harness.cmd_evolve(run)
print("gen model  best   mean   best-ever species")
for r in history:
    print(f"{r.generation:3d} {r.model_id:>5} {r.best_fitness:.3f}  {r.mean_fitness:.3f}  "
          f"{r.best_ever_fitness:.3f}     {r.species_count}")
print("genome written to", genome_path)

# Same initial weights for SGD, SGD* and Nm-SGD.
rows = harness.cmd_compare(harness.RunConfig(**{**run.__dict__, "epochs": 10}), str(genome_path))
final = {r["method"]: r for r in rows if r["epoch"] == 10}
for name, r in final.items():
    print(f"{name:>7}: train {r['train_accuracy']:.3f}  test {r['test_accuracy']:.3f}")
