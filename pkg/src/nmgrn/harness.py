"""Experiment orchestration: model catalog, training loops, evolve/compare/trace.

Model ids are always ``m0``, ``m1``, ``m2``; the run's scale and dataset
decide the concrete architecture (full-size tables, quarter-width desk
variants, or dense surrogates for vector datasets).
"""
from __future__ import annotations

import concurrent.futures
import configparser
import functools
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable

import numpy as np

from . import data as dio
from .grn import Genome
from .grneat import EvolutionConfig, GenerationContext, evolve
from .neuromod import (
    N_INPUTS,
    N_OUTPUTS,
    ControllerBank,
    baseline_train_step,
    init_optimizer_states,
    neuromod_train_step,
)
from .nn import Conv, Dense, MaxPool, ModelSpec, Network, accuracy, build_network
from .optimizers import baseline_presets

__all__ = [
    "MODEL_IDS",
    "RunConfig",
    "model_catalog",
    "resolve_model",
    "load_run_config",
    "load_datasets",
    "iterations_per_epoch",
    "train_epochs",
    "make_context_fn",
    "fitness_eval",
    "cmd_evolve",
    "cmd_compare",
    "cmd_trace",
]

log = logging.getLogger(__name__)

MODEL_IDS = ("m0", "m1", "m2")

# (kind, size) rows; "out" marks the final fc n_out layer
_PAPER_LAYOUT = {
    "m0": [("conv", 32), ("conv", 32), ("pool", 0), ("conv", 64), ("conv", 64), ("pool", 0),
           ("fc", 512), ("out", 0)],
    "m1": [("conv", 64), ("pool", 0), ("conv", 128), ("pool", 0), ("conv", 256), ("pool", 0),
           ("conv", 512), ("pool", 0), ("fc", 4096), ("fc", 4096), ("out", 0)],
    "m2": [("conv", 64), ("pool", 0), ("conv", 128), ("pool", 0), ("conv", 256), ("pool", 0),
           ("conv", 512), ("pool", 0), ("conv", 512), ("pool", 0), ("fc", 4096), ("fc", 4096),
           ("out", 0)],
}

# dense stand-ins with growing depth, for (n, d) datasets
_VECTOR_LAYOUT = {
    "m0": [16],
    "m1": [32, 16],
    "m2": [32, 32, 16],
}


def _image_spec(model_id: str, scale: str, n_out: int, input_shape) -> ModelSpec:
    layers = []
    for kind, size in _PAPER_LAYOUT[model_id]:
        if scale == "desk":
            size = max(8, size // 4)
        if kind == "conv":
            layers.append(Conv(size))
        elif kind == "pool":
            layers.append(MaxPool())
        elif kind == "fc":
            layers.append(Dense(size))
        else:
            layers.append(Dense(n_out))
    name = model_id if scale == "paper" else f"{model_id}s"
    return ModelSpec(name, tuple(layers), n_out, input_shape)


def model_catalog(scale: str = "paper", n_out: int = 10, input_shape=(3, 32, 32)) -> list[ModelSpec]:
    """Specs for m0, m1, m2.

    ``scale="paper"`` gives the full-size layer tables, ``"desk"`` divides
    channel and unit counts by 4 (at least 8). A 1-D ``input_shape`` yields
    the dense surrogates regardless of scale.
    """
    if scale not in ("paper", "desk"):
        raise ValueError(f"unknown scale {scale!r}")
    input_shape = tuple(input_shape)
    if len(input_shape) == 1:
        return [ModelSpec(f"v{k[1]}", tuple(Dense(u) for u in _VECTOR_LAYOUT[k]) + (Dense(n_out),),
                          n_out, input_shape) for k in MODEL_IDS]
    return [_image_spec(k, scale, n_out, input_shape) for k in MODEL_IDS]


def resolve_model(model_id: str, scale: str, n_out: int, input_shape) -> ModelSpec:
    if model_id not in MODEL_IDS:
        raise ValueError(f"unknown model {model_id!r}")
    return model_catalog(scale, n_out, input_shape)[MODEL_IDS.index(model_id)]


# --- run configuration ---------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    base: str = "sgd"
    models: tuple = MODEL_IDS
    model: str = "m0"
    scale: str = "desk"
    dataset: str = "blobs"
    data_dir: str = "data"
    subset: int = 2000
    test_subset: int = 500
    synth_n: int = 200
    synth_classes: int = 2
    synth_noise: float = 0.15
    epochs: int = 20
    batch_size: int = 128
    loss: str = "cross_entropy"
    out: str = "out"
    seed: int = 0
    population: int = 50
    generations: int = 50
    speciation_threshold: float = 0.45
    tournament_size: int = 3
    elite_count: int = 1
    p_crossover: float = 0.7
    p_add_protein: float = 0.1
    p_remove_protein: float = 0.05
    p_mutate_tag: float = 0.25
    p_mutate_dynamics: float = 0.05
    initial_regulators: int = 1
    tag_mutation_sigma: float = 0.1
    workers: int = 1

    def __post_init__(self):
        if isinstance(self.models, str):
            object.__setattr__(self, "models", tuple(m.strip() for m in self.models.split(",") if m.strip()))
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.base not in N_OUTPUTS:
            raise ValueError(f"unknown base {self.base!r}")
        for m in self.models + (self.model,):
            if m not in MODEL_IDS:
                raise ValueError(f"unknown model {m!r}")

    def evolution_config(self) -> EvolutionConfig:
        return EvolutionConfig(
            population_size=self.population, generations=self.generations,
            speciation_threshold=self.speciation_threshold, tournament_size=self.tournament_size,
            elite_count=self.elite_count, p_crossover=self.p_crossover,
            p_add_protein=self.p_add_protein, p_remove_protein=self.p_remove_protein,
            p_mutate_tag=self.p_mutate_tag, p_mutate_dynamics=self.p_mutate_dynamics,
            initial_regulators=self.initial_regulators, tag_mutation_sigma=self.tag_mutation_sigma,
            rng_seed=self.seed, n_inputs=N_INPUTS, n_outputs=N_OUTPUTS[self.base],
        )

    def to_text(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            if isinstance(v, tuple):
                v = ",".join(v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"


def _coerce(name: str, raw: str):
    default = next(f.default for f in fields(RunConfig) if f.name == name)
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def load_run_config(path: str | None = None, **overrides) -> RunConfig:
    """Read flat ``key = value`` text, then apply non-None overrides."""
    values = {}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
        parser.read_string("[run]\n" + Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(RunConfig)}
        for k, v in parser["run"].items():
            if k not in known:
                raise ValueError(f"unknown config key {k!r}")
            values[k] = _coerce(k, v)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def load_datasets(run: RunConfig, need_test: bool = True):
    """(train, test) for the run's dataset; ``test`` is None when not requested."""
    if run.dataset in ("cifar10", "cifar100"):
        train = dio.load_cifar(run.dataset, run.data_dir, "train", run.subset)
        test = dio.load_cifar(run.dataset, run.data_dir, "test", run.test_subset) if need_test else None
        return train, test
    if run.dataset in ("blobs", "spirals"):
        # test half is always generated so the training half does not depend on need_test
        full = dio.synth_dataset(run.dataset, run.synth_n * 2, run.synth_classes, run.seed,
                                 noise=run.synth_noise)
        train = dio.Dataset(full.inputs[:run.synth_n], full.labels[:run.synth_n], full.n_classes)
        test = None
        if need_test:
            test = dio.Dataset(full.inputs[run.synth_n:], full.labels[run.synth_n:], full.n_classes)
        return train, test
    raise ValueError(f"unknown dataset {run.dataset!r}")


def _spec_for(run: RunConfig, model_id: str, dataset: dio.Dataset) -> ModelSpec:
    return resolve_model(model_id, run.scale, dataset.n_classes, dataset.inputs.shape[1:])


# --- training ------------------------------------------------------------

def iterations_per_epoch(n_samples: int, batch_size: int) -> int:
    return math.ceil(n_samples / batch_size)


def train_epochs(network: Network, train: dio.Dataset, epochs: int, batch_size: int,
                 step: Callable, shuffle_seed: int,
                 on_epoch: Callable[[int, Network], None] | None = None) -> Network:
    """Minibatch loop; ``step(network, x, y, iteration)`` performs one update."""
    rng = np.random.default_rng(shuffle_seed)
    n = len(train)
    it = 0
    for epoch in range(epochs):
        order = rng.permutation(n)
        for s in range(0, n, batch_size):
            idx = order[s:s + batch_size]
            step(network, train.inputs[idx], train.labels[idx], it)
            it += 1
        if on_epoch is not None:
            on_epoch(epoch, network)
    return network


def _nm_step(controller, opt_states, loss, rows=None, run_id=""):
    def step(net, x, y, it):
        _, r = neuromod_train_step(net, x, y, controller, opt_states, iteration=it,
                                   run_id=run_id, loss_kind=loss, telemetry=rows is not None)
        if rows is not None:
            rows.extend(r)
    return step


def _baseline_step(hyper, opt_states, loss):
    def step(net, x, y, it):
        baseline_train_step(net, x, y, hyper, opt_states, loss_kind=loss)
    return step


def make_context_fn(run: RunConfig) -> Callable[[int], GenerationContext]:
    """Per generation: a uniformly drawn model and a fresh init seed.

    Both come from a stream keyed on (master seed, generation), so the
    context never depends on evaluation order.
    """
    def ctx(generation: int) -> GenerationContext:
        rng = np.random.default_rng([run.seed, generation])
        model_id = run.models[int(rng.integers(len(run.models)))]
        return GenerationContext(generation, int(rng.integers(2**31)), model_id)
    return ctx


def fitness_eval(genome: Genome, ctx: GenerationContext, run: RunConfig, train: dio.Dataset) -> float:
    """Final training accuracy after ``run.epochs`` epochs of Nm-(base).

    Only the training split is passed in; test data never reaches here.
    """
    if genome.n_inputs != N_INPUTS or genome.n_outputs != N_OUTPUTS[run.base]:
        raise ValueError(f"genome shape ({genome.n_inputs} in, {genome.n_outputs} out) "
                         f"does not fit Nm-{run.base}")
    spec = _spec_for(run, ctx.model_id, train)
    net = build_network(spec, ctx.init_seed)
    bank = ControllerBank(genome, net, run.base)
    opt = init_optimizer_states(net, run.base)
    train_epochs(net, train, run.epochs, run.batch_size, _nm_step(bank, opt, run.loss), ctx.init_seed)
    return accuracy(net, train.inputs, train.labels)


def cmd_evolve(run: RunConfig, train: dio.Dataset | None = None):
    """Evolve a controller; write ``best_genome.txt`` and ``history.csv`` under ``run.out``."""
    if train is None:
        train, _ = load_datasets(run, need_test=False)
    out = Path(run.out)
    out.mkdir(parents=True, exist_ok=True)
    fitness = functools.partial(fitness_eval, run=run, train=train)
    executor = None
    if run.workers > 1:
        executor = concurrent.futures.ProcessPoolExecutor(run.workers)
    try:
        best, history = evolve(fitness, run.evolution_config(), make_context_fn(run), executor)
    finally:
        if executor is not None:
            executor.shutdown()
    genome_path = out / "best_genome.txt"
    history_path = out / "history.csv"
    dio.save_genome(genome_path, best.genome, run.base)
    dio.write_history_csv(history_path, history)
    return best, history, genome_path, history_path


COMPARE_COLUMNS = ["method", "model", "epoch", "train_accuracy", "test_accuracy"]


def cmd_compare(run: RunConfig, genome: Genome | str, datasets=None,
                controller_factory: Callable[[Network], object] | None = None):
    """Train base default, starred preset and Nm-base from the same initial weights.

    Writes ``compare.csv`` and returns its rows. ``controller_factory``
    replaces the genome-driven controller (used for reduction checks).
    """
    if not isinstance(genome, Genome):
        genome = dio.load_genome(genome).genome
    train, test = datasets if datasets is not None else load_datasets(run)
    spec = _spec_for(run, run.model, train)
    label = "SGD" if run.base == "sgd" else "Adam"
    methods = [(label, baseline_presets(label, run.model)),
               (label + "*", baseline_presets(label + "*", run.model)),
               ("Nm-" + label, None)]
    rows = []
    for name, hyper in methods:
        net = build_network(spec, run.seed)
        opt = init_optimizer_states(net, run.base)
        if hyper is None:
            ctrl = controller_factory(net) if controller_factory else ControllerBank(genome, net, run.base)
            step = _nm_step(ctrl, opt, run.loss)
        else:
            step = _baseline_step(hyper, opt, run.loss)

        def record(epoch, n, name=name):
            rows.append({"method": name, "model": run.model, "epoch": epoch + 1,
                         "train_accuracy": accuracy(n, train.inputs, train.labels),
                         "test_accuracy": accuracy(n, test.inputs, test.labels)})
        train_epochs(net, train, run.epochs, run.batch_size, step, run.seed, on_epoch=record)
    out = Path(run.out)
    out.mkdir(parents=True, exist_ok=True)
    dio.write_rows_csv(out / "compare.csv", COMPARE_COLUMNS, rows)
    return rows


def cmd_trace(run: RunConfig, genome: Genome | str, train: dio.Dataset | None = None):
    """Single Nm-(base) training run; writes per-iteration telemetry to ``trace.csv``."""
    if not isinstance(genome, Genome):
        genome = dio.load_genome(genome).genome
    if train is None:
        train, _ = load_datasets(run, need_test=False)
    spec = _spec_for(run, run.model, train)
    net = build_network(spec, run.seed)
    bank = ControllerBank(genome, net, run.base)
    opt = init_optimizer_states(net, run.base)
    rows: list[dict] = []
    train_epochs(net, train, run.epochs, run.batch_size,
                 _nm_step(bank, opt, run.loss, rows, run_id=f"{spec.name}-{run.seed}"), run.seed)
    out = Path(run.out)
    out.mkdir(parents=True, exist_ok=True)
    dio.write_telemetry_csv(out / "trace.csv", rows, run.base)
    return rows
