"""Per-layer neuromodulation of SGD/Adam by copies of one GRN genome.

Each (weighted layer, weights|biases) group has its own controller state.
At every batch update the controllers read six statistics of their own
layer and of the following layer plus a constant 1.0, advance their
dynamics, and emit the optimizer hyperparameters for that group.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Protocol

import numpy as np

from . import grn
from .grn import Genome, GrnConfig, GrnState
from .nn import Group, Network, ParamGroup, loss_and_gradients
from .optimizers import AdamHyper, SgdHyper, adam_step, init_state, sgd_step

__all__ = [
    "GroupKey",
    "LayerFeatures",
    "N_INPUTS",
    "N_OUTPUTS",
    "OUTPUT_NAMES",
    "ControllerBank",
    "FixedController",
    "compute_layer_features",
    "compute_all_features",
    "assemble_inputs",
    "init_optimizer_states",
    "apply_updates",
    "neuromod_train_step",
    "baseline_train_step",
    "telemetry_columns",
]

N_INPUTS = 13
N_OUTPUTS = {"sgd": 4, "adam": 8}
OUTPUT_NAMES = {"sgd": ("eta", "alpha"), "adam": ("eta", "beta1", "beta2", "epsilon")}

EPSILON_FLOOR = 1e-12
# bias correction divides by 1 - beta**t
BETA_CEILING = 1.0 - 1e-12


class GroupKey(NamedTuple):
    layer_index: int
    group: Group


@dataclass(frozen=True)
class LayerFeatures:
    location: float
    mu_theta: float
    sigma_theta: float
    mu_grad: float
    sigma_grad: float
    rel_size: float

    def as_array(self) -> np.ndarray:
        return np.array([self.location, self.mu_theta, self.sigma_theta,
                         self.mu_grad, self.sigma_grad, self.rel_size])


def _unit(x: float) -> float:
    return float(min(1.0, max(0.0, x)))


def compute_layer_features(group: ParamGroup, grad: np.ndarray, network: Network) -> LayerFeatures:
    if grad.shape != group.values.shape:
        raise ValueError(f"gradient shape {grad.shape} != parameter shape {group.values.shape}")
    last = network.weighted_layer_count - 1
    location = group.layer_index / last if last > 0 else 0.0
    largest = max(g.size for g in network.param_groups)
    a_theta = np.abs(group.values)
    a_grad = np.abs(grad)
    return LayerFeatures(
        location=float(location),
        mu_theta=_unit(a_theta.mean()),
        sigma_theta=_unit(a_theta.std()),
        mu_grad=_unit(a_grad.mean()),
        sigma_grad=_unit(a_grad.std()),
        rel_size=group.size / largest,
    )


def compute_all_features(network: Network, grads) -> dict[GroupKey, LayerFeatures]:
    return {GroupKey(*g.key): compute_layer_features(g, gr, network)
            for g, gr in zip(network.param_groups, grads)}


def assemble_inputs(key: GroupKey, features: dict[GroupKey, LayerFeatures],
                    weighted_layer_count: int, last_layer: str = "replicate") -> np.ndarray:
    """13 controller inputs: own layer, following layer (same group kind), 1.0.

    The last weighted layer has no follower; ``last_layer`` selects whether
    its own features are repeated (``"replicate"``) or zeros are used.
    """
    try:
        own = features[key].as_array()
        if key.layer_index + 1 < weighted_layer_count:
            nxt = features[GroupKey(key.layer_index + 1, key.group)].as_array()
        elif last_layer == "replicate":
            nxt = own
        elif last_layer == "zero":
            nxt = np.zeros(6)
        else:
            raise ValueError(f"unknown last_layer mode {last_layer!r}")
    except KeyError as e:
        raise KeyError(f"missing features for {e.args[0]}") from None
    return np.concatenate([own, nxt, [1.0]])


def _decode(values: np.ndarray, base: str):
    if base == "sgd":
        return SgdHyper(eta=float(values[0]), alpha=float(values[1]), decay=0.0)
    eps = float(values[3]) if values[3] > 0.0 else EPSILON_FLOOR
    return AdamHyper(eta=float(values[0]),
                     beta1=min(float(values[1]), BETA_CEILING),
                     beta2=min(float(values[2]), BETA_CEILING),
                     epsilon=eps, decay=0.0)


class Controller(Protocol):
    base: str

    def modulate(self, features: dict[GroupKey, LayerFeatures]) -> dict[GroupKey, object]: ...


class ControllerBank:
    """One GRN state per group key, all driven by the same genome."""

    def __init__(self, genome: Genome, network: Network, base: str,
                 config: GrnConfig | None = None, last_layer: str = "replicate"):
        if base not in N_OUTPUTS:
            raise ValueError(f"unknown base optimizer {base!r}")
        if genome.n_inputs != N_INPUTS or genome.n_outputs != N_OUTPUTS[base]:
            raise ValueError(
                f"Nm-{base} needs {N_INPUTS} inputs and {N_OUTPUTS[base]} outputs, "
                f"genome has {genome.n_inputs} and {genome.n_outputs}")
        self.genome = genome
        self.base = base
        self.config = config or GrnConfig()
        self.last_layer = last_layer
        self.weighted_layer_count = network.weighted_layer_count
        self._compiled = grn.compile_grn(genome, self.config)
        fresh = grn.init_state(genome, self.config)
        self.states: dict[GroupKey, GrnState] = {
            GroupKey(*g.key): fresh.copy() for g in network.param_groups}

    @property
    def n_params(self) -> int:
        return len(OUTPUT_NAMES[self.base])

    def assemble_inputs(self, key: GroupKey, features) -> np.ndarray:
        return assemble_inputs(key, features, self.weighted_layer_count, self.last_layer)

    def query(self, key: GroupKey, inputs: np.ndarray) -> np.ndarray:
        """Feed one input vector to the controller of ``key``; return decoded values."""
        state = grn.set_inputs(self.genome, self.states[key], inputs)
        c = state.concentrations
        for _ in range(self.config.steps_per_query):
            c = self._compiled.step(c)
        self.states[key] = GrnState(c)
        raw = c[self._compiled.output_idx]
        return grn.paired_outputs(raw, self.n_params)

    def modulate(self, features: dict[GroupKey, LayerFeatures]) -> dict[GroupKey, object]:
        return {key: _decode(self.query(key, self.assemble_inputs(key, features)), self.base)
                for key in self.states}


class FixedController:
    """Stub controller that always returns the same hyperparameters."""

    def __init__(self, hyper, network: Network):
        self.hyper = hyper
        self.base = "sgd" if isinstance(hyper, SgdHyper) else "adam"
        self.keys = [GroupKey(*g.key) for g in network.param_groups]
        self.weighted_layer_count = network.weighted_layer_count
        self.last_layer = "replicate"

    def assemble_inputs(self, key, features):
        return assemble_inputs(key, features, self.weighted_layer_count, self.last_layer)

    def modulate(self, features):
        return {key: self.hyper for key in self.keys}


def init_optimizer_states(network: Network, base: str) -> dict[GroupKey, object]:
    return {GroupKey(*g.key): init_state(g.values, base) for g in network.param_groups}


def apply_updates(network: Network, grads, opt_states: dict, decisions: dict) -> None:
    for g, grad in zip(network.param_groups, grads):
        key = GroupKey(*g.key)
        hyper = decisions[key]
        step = sgd_step if isinstance(hyper, SgdHyper) else adam_step
        g.values, opt_states[key] = step(g.values, opt_states[key], grad, hyper)


def telemetry_columns(base: str) -> list[str]:
    return (["run_id", "iteration", "layer_index", "group"]
            + [f"in{i}" for i in range(N_INPUTS)] + list(OUTPUT_NAMES[base]))


def neuromod_train_step(network: Network, batch, targets, controller, opt_states: dict,
                        iteration: int = 0, run_id: str = "", loss_kind: str = "cross_entropy",
                        telemetry: bool = True):
    """One modulated batch update. Updates ``network`` in place.

    Returns ``(network, rows)`` with one telemetry dict per group key
    (empty when ``telemetry`` is false).
    """
    _, grads, _ = loss_and_gradients(network, batch, targets, loss_kind)
    features = compute_all_features(network, grads)
    decisions = controller.modulate(features)
    rows = []
    if telemetry:
        names = OUTPUT_NAMES[controller.base]
        for key, hyper in decisions.items():
            row = {"run_id": run_id, "iteration": iteration,
                   "layer_index": key.layer_index, "group": key.group.value}
            inputs = controller.assemble_inputs(key, features)
            row.update({f"in{i}": float(v) for i, v in enumerate(inputs)})
            row.update({n: getattr(hyper, n) for n in names})
            rows.append(row)
    apply_updates(network, grads, opt_states, decisions)
    return network, rows


def baseline_train_step(network: Network, batch, targets, hyper, opt_states: dict,
                        loss_kind: str = "cross_entropy") -> Network:
    """Plain optimizer update with one hyperparameter set for every group."""
    _, grads, _ = loss_and_gradients(network, batch, targets, loss_kind)
    step = sgd_step if isinstance(hyper, SgdHyper) else adam_step
    for g, grad in zip(network.param_groups, grads):
        key = GroupKey(*g.key)
        g.values, opt_states[key] = step(g.values, opt_states[key], grad, hyper)
    return network
