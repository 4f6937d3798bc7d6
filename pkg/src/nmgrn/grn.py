"""Artificial gene regulatory network: proteins, affinities and dynamics.

A genome is an ordered list of proteins (inputs, then outputs, then
regulators) plus the two dynamics constants ``beta`` and ``delta``. The
state of a network is a concentration vector aligned with that order.
Input concentrations are written by the environment; output and regulator
concentrations evolve under the enhancing/inhibiting influence of input
and regulator proteins and are kept on the unit simplex.
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "Kind",
    "Protein",
    "Genome",
    "AffinityMode",
    "GrnConfig",
    "GrnState",
    "AffinityPair",
    "CompiledGrn",
    "InvalidGenomeError",
    "validate_genome",
    "compute_affinities",
    "signature_matrix",
    "compile_grn",
    "init_state",
    "set_inputs",
    "grn_step",
    "read_raw_outputs",
    "paired_outputs",
]


class Kind(str, enum.Enum):
    INPUT = "input"
    OUTPUT = "output"
    REGULATOR = "regulator"


_KIND_RANK = {Kind.INPUT: 0, Kind.OUTPUT: 1, Kind.REGULATOR: 2}


@dataclass(frozen=True)
class Protein:
    id: float
    enh: float
    inh: float
    kind: Kind

    def tags(self) -> tuple[float, float, float]:
        return (self.id, self.enh, self.inh)


@dataclass(frozen=True)
class Genome:
    """Immutable controller genome.

    Use :meth:`from_parts` to build one in canonical order from separate
    protein lists.
    """

    proteins: tuple[Protein, ...]
    beta: float
    delta: float

    def __post_init__(self):
        object.__setattr__(self, "proteins", tuple(self.proteins))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "delta", float(self.delta))

    @classmethod
    def from_parts(cls, inputs: Sequence[Protein], outputs: Sequence[Protein],
                   regulators: Sequence[Protein], beta: float, delta: float) -> Genome:
        prots = [Protein(p.id, p.enh, p.inh, Kind.INPUT) for p in inputs]
        prots += [Protein(p.id, p.enh, p.inh, Kind.OUTPUT) for p in outputs]
        prots += [Protein(p.id, p.enh, p.inh, Kind.REGULATOR) for p in regulators]
        return cls(tuple(prots), beta, delta)

    def __len__(self) -> int:
        return len(self.proteins)

    def _count(self, kind: Kind) -> int:
        return sum(1 for p in self.proteins if p.kind is kind)

    @property
    def n_inputs(self) -> int:
        return self._count(Kind.INPUT)

    @property
    def n_outputs(self) -> int:
        return self._count(Kind.OUTPUT)

    @property
    def n_regulators(self) -> int:
        return self._count(Kind.REGULATOR)

    def of_kind(self, kind: Kind) -> list[Protein]:
        return [p for p in self.proteins if p.kind is kind]

    def kind_mask(self, kind: Kind) -> np.ndarray:
        return np.array([p.kind is kind for p in self.proteins], dtype=bool)

    def tag_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return the (id, enh, inh) tag vectors in genome order."""
        t = np.array([p.tags() for p in self.proteins], dtype=np.float64).reshape(-1, 3)
        return t[:, 0], t[:, 1], t[:, 2]


class AffinityMode(str, enum.Enum):
    # A = -beta * u, the literal sign convention
    PAPER_LITERAL = "paper_literal"
    # A = beta * (u - u_max): closest tags give the strongest influence
    RELATIVE_MAX = "relative_max"


@dataclass(frozen=True)
class GrnConfig:
    u_size: float = 1.0
    affinity_mode: AffinityMode = AffinityMode.RELATIVE_MAX
    steps_per_query: int = 1
    beta_min: float = 0.05
    beta_max: float = 2.0
    delta_min: float = 0.05
    delta_max: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "affinity_mode", AffinityMode(self.affinity_mode))
        if not self.u_size > 0:
            raise ValueError("u_size must be positive")
        if self.steps_per_query < 1:
            raise ValueError("steps_per_query must be >= 1")
        if self.beta_min > self.beta_max or self.delta_min > self.delta_max:
            raise ValueError("dynamics bounds must satisfy min <= max")


@dataclass
class GrnState:
    concentrations: np.ndarray = field(repr=False)

    def copy(self) -> GrnState:
        return GrnState(self.concentrations.copy())


class AffinityPair(NamedTuple):
    a_plus: np.ndarray
    a_minus: np.ndarray


class InvalidGenomeError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("invalid genome: " + "; ".join(violations))
        self.violations = violations


def validate_genome(genome: Genome, config: GrnConfig | None = None) -> list[str]:
    """List every invariant violation of ``genome``; an empty list means valid."""
    config = config or GrnConfig()
    out = []
    for i, p in enumerate(genome.proteins):
        if not isinstance(p.kind, Kind):
            out.append(f"protein {i}: unknown kind {p.kind!r}")
        for name in ("id", "enh", "inh"):
            v = getattr(p, name)
            if not (0.0 <= v <= 1.0):
                out.append(f"protein {i}: {name}={v!r} outside [0, 1]")
    if not (config.beta_min <= genome.beta <= config.beta_max):
        out.append(f"beta={genome.beta!r} outside [{config.beta_min}, {config.beta_max}]")
    if not (config.delta_min <= genome.delta <= config.delta_max):
        out.append(f"delta={genome.delta!r} outside [{config.delta_min}, {config.delta_max}]")
    if genome.n_inputs < 1:
        out.append("no input proteins")
    if genome.n_outputs < 1:
        out.append("no output proteins")
    ranks = [_KIND_RANK.get(p.kind, -1) for p in genome.proteins]
    if ranks != sorted(ranks):
        out.append("proteins not in canonical order (inputs, outputs, regulators)")
    return out


def _require_valid(genome: Genome, config: GrnConfig) -> None:
    violations = validate_genome(genome, config)
    if violations:
        raise InvalidGenomeError(violations)


def compute_affinities(genome: Genome, config: GrnConfig | None = None) -> AffinityPair:
    """Affinity exponents; entry [i, j] is the influence of protein j on protein i."""
    config = config or GrnConfig()
    _require_valid(genome, config)
    ids, enh, inh = genome.tag_arrays()
    u_plus = config.u_size - np.abs(enh[None, :] - ids[:, None])
    u_minus = config.u_size - np.abs(inh[None, :] - ids[:, None])
    beta = genome.beta
    if config.affinity_mode is AffinityMode.PAPER_LITERAL:
        return AffinityPair(-beta * u_plus, -beta * u_minus)
    return AffinityPair(beta * (u_plus - u_plus.max()), beta * (u_minus - u_minus.max()))


def signature_matrix(genome: Genome, config: GrnConfig | None = None) -> np.ndarray:
    a = compute_affinities(genome, config)
    return np.exp(a.a_plus) - np.exp(a.a_minus)


class CompiledGrn:
    """Precomputed dynamics for one (genome, config) pair.

    Holds the signature rows for output and regulator proteins restricted to
    the columns of input and regulator proteins, so one update is a single
    matrix-vector product.
    """

    def __init__(self, genome: Genome, config: GrnConfig | None = None):
        config = config or GrnConfig()
        self.genome = genome
        self.config = config
        a = compute_affinities(genome, config)
        self.affinities = a
        self.n = len(genome)
        self.input_idx = np.flatnonzero(genome.kind_mask(Kind.INPUT))
        self.output_idx = np.flatnonzero(genome.kind_mask(Kind.OUTPUT))
        self.target_idx = np.flatnonzero(~genome.kind_mask(Kind.INPUT))
        # sources: outputs have no outgoing influence
        self.source_idx = np.flatnonzero(~genome.kind_mask(Kind.OUTPUT))
        rows, cols = np.ix_(self.target_idx, self.source_idx)
        self.enhance = np.exp(a.a_plus[rows, cols])
        self.inhibit = np.exp(a.a_minus[rows, cols])
        self.signature = self.enhance - self.inhibit

    def update(self, c: np.ndarray, method: str = "signature") -> np.ndarray:
        """One clamped Euler step, without normalization."""
        src = c[self.source_idx]
        if method == "signature":
            net = (self.signature @ src) / self.n
        elif method == "direct":
            g = (self.enhance @ src) / self.n
            h = (self.inhibit @ src) / self.n
            net = g - h
        else:
            raise ValueError(f"unknown method {method!r}")
        new = c.copy()
        new[self.target_idx] = np.maximum(0.0, c[self.target_idx] + self.genome.delta * net)
        return new

    def normalize(self, c: np.ndarray) -> np.ndarray:
        c = c.copy()
        part = c[self.target_idx]
        total = part.sum()
        if total > 0.0:
            c[self.target_idx] = part / total
        else:
            c[self.target_idx] = 1.0 / len(self.target_idx)
        return c

    def step(self, c: np.ndarray, method: str = "signature") -> np.ndarray:
        return self.normalize(self.update(c, method))


@functools.lru_cache(maxsize=512)
def compile_grn(genome: Genome, config: GrnConfig | None = None) -> CompiledGrn:
    return CompiledGrn(genome, config)


def init_state(genome: Genome, config: GrnConfig | None = None) -> GrnState:
    c = np.zeros(len(genome), dtype=np.float64)
    mask = ~genome.kind_mask(Kind.INPUT)
    n_active = int(mask.sum())
    if n_active:
        c[mask] = 1.0 / n_active
    return GrnState(c)


def set_inputs(genome: Genome, state: GrnState, values: Sequence[float]) -> GrnState:
    values = np.asarray(values, dtype=np.float64)
    idx = np.flatnonzero(genome.kind_mask(Kind.INPUT))
    if values.shape != (len(idx),):
        raise ValueError(f"expected {len(idx)} input values, got shape {values.shape}")
    c = state.concentrations.copy()
    c[idx] = np.clip(values, 0.0, 1.0)
    return GrnState(c)


def grn_step(genome: Genome, state: GrnState, config: GrnConfig | None = None,
             method: str = "signature") -> GrnState:
    """Advance the network by one step.

    ``method="direct"`` evaluates the enhancing and inhibiting sums
    separately instead of through the signature matrix.
    """
    config = config or GrnConfig()
    return GrnState(compile_grn(genome, config).step(state.concentrations, method))


def read_raw_outputs(genome: Genome, state: GrnState) -> np.ndarray:
    return state.concentrations[genome.kind_mask(Kind.OUTPUT)].copy()


def paired_outputs(raw: Sequence[float], n_params: int) -> np.ndarray:
    """Decode pairs of output concentrations into values in [0, 1].

    Each parameter is ``|a - b| / (a + b)`` for its two proteins, and 0 when
    both are 0.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape != (2 * n_params,):
        raise ValueError(f"expected {2 * n_params} raw outputs, got shape {raw.shape}")
    a, b = raw[0::2], raw[1::2]
    total = a + b
    out = np.zeros(n_params)
    nz = total > 0
    out[nz] = np.abs(a[nz] - b[nz]) / total[nz]
    return np.clip(out, 0.0, 1.0)
