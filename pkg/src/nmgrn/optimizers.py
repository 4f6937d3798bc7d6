"""SGD with momentum and Adam, applied per parameter group.

Hyperparameters are passed to every step rather than stored in the
state, so a controller may change them between updates while velocity,
``m`` and ``v`` carry over untouched.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SgdHyper",
    "AdamHyper",
    "SgdState",
    "AdamState",
    "decayed_lr",
    "sgd_step",
    "adam_step",
    "init_state",
    "baseline_presets",
    "PRESET_METHODS",
]


@dataclass(frozen=True)
class SgdHyper:
    eta: float = 0.01
    alpha: float = 0.0
    decay: float = 0.0


@dataclass(frozen=True)
class AdamHyper:
    eta: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    decay: float = 0.0


@dataclass
class SgdState:
    velocity: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros_like(cls, params: np.ndarray) -> SgdState:
        return cls(np.zeros_like(params, dtype=np.float64))


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros_like(cls, params: np.ndarray) -> AdamState:
        return cls(np.zeros_like(params, dtype=np.float64), np.zeros_like(params, dtype=np.float64))


def init_state(params: np.ndarray, base: str):
    if base == "sgd":
        return SgdState.zeros_like(params)
    if base == "adam":
        return AdamState.zeros_like(params)
    raise ValueError(f"unknown base optimizer {base!r}")


def decayed_lr(eta: float, decay: float, t: int) -> float:
    """Time-based decay ``eta / (1 + decay * t)``, t counting past updates."""
    return eta / (1.0 + decay * t)


def _check(params, grads, *arrays):
    for a in (grads,) + arrays:
        if a.shape != params.shape:
            raise ValueError(f"shape mismatch: {a.shape} vs params {params.shape}")


def sgd_step(params: np.ndarray, state: SgdState, grads: np.ndarray,
             hyper: SgdHyper) -> tuple[np.ndarray, SgdState]:
    _check(params, grads, state.velocity)
    eta = decayed_lr(hyper.eta, hyper.decay, state.step_count)
    velocity = hyper.alpha * state.velocity - eta * grads
    return params + velocity, SgdState(velocity, state.step_count + 1)


def adam_step(params: np.ndarray, state: AdamState, grads: np.ndarray,
              hyper: AdamHyper) -> tuple[np.ndarray, AdamState]:
    _check(params, grads, state.m, state.v)
    eta = decayed_lr(hyper.eta, hyper.decay, state.step_count)
    t = state.step_count + 1
    b1, b2 = hyper.beta1, hyper.beta2
    m = b1 * state.m + (1.0 - b1) * grads
    v = b2 * state.v + (1.0 - b2) * grads * grads
    m_hat = m / (1.0 - b1 ** t)
    v_hat = v / (1.0 - b2 ** t)
    return params - eta * m_hat / (np.sqrt(v_hat) + hyper.epsilon), AdamState(m, v, t)


PRESET_METHODS = ("SGD", "SGD*", "Adam", "Adam*")

_PRESETS = {
    ("SGD*", "m0"): SgdHyper(eta=0.01, alpha=0.75, decay=0.0),
    ("SGD*", "m1"): SgdHyper(eta=0.1, alpha=0.0, decay=0.001),
    ("SGD*", "m2"): SgdHyper(eta=0.01, alpha=0.5, decay=0.0),
    ("Adam*", "m0"): AdamHyper(eta=0.001, beta1=0.9, beta2=0.999, epsilon=0.001, decay=0.0),
    ("Adam*", "m1"): AdamHyper(eta=0.1, beta1=0.99, beta2=0.9, epsilon=1.0, decay=0.001),
    ("Adam*", "m2"): AdamHyper(eta=0.1, beta1=0.99, beta2=0.999, epsilon=1.0, decay=0.001),
}


def baseline_presets(method: str, model: str):
    """Framework-default settings (``SGD``, ``Adam``) or grid-searched ones (starred)."""
    if model not in ("m0", "m1", "m2"):
        raise KeyError(f"no preset for model {model!r}")
    if method == "SGD":
        return SgdHyper(eta=0.01, alpha=0.0, decay=0.0)
    if method == "Adam":
        return AdamHyper(eta=0.001, beta1=0.9, beta2=0.999, epsilon=1e-8, decay=0.0)
    try:
        return _PRESETS[(method, model)]
    except KeyError:
        raise KeyError(f"no preset for method {method!r}") from None
