"""GRNEAT-style genetic algorithm for GRN genomes.

Small initial networks, speciation by genome distance, crossover that
aligns regulator proteins by tag distance, and structural/tag/dynamics
mutations. The fitness function is supplied by the caller and receives a
per-generation context, so every individual of a generation is scored on
the same task instance.
"""
from __future__ import annotations

import concurrent.futures
import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from .grn import Genome, GrnConfig, Kind, Protein

__all__ = [
    "EvolutionConfig",
    "Individual",
    "Species",
    "GenerationRecord",
    "GenerationContext",
    "EvaluationError",
    "random_genome",
    "protein_distance",
    "genome_distance",
    "align_regulators",
    "speciate",
    "crossover",
    "mutate",
    "next_generation",
    "evaluate_population",
    "evolve",
    "random_search",
]

log = logging.getLogger(__name__)

UNMATCHED_PENALTY = 1.0


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 50
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
    rng_seed: int = 0
    n_inputs: int = 13
    n_outputs: int = 4
    grn: GrnConfig = field(default_factory=GrnConfig)

    def __post_init__(self):
        for name in ("p_crossover", "p_add_protein", "p_remove_protein",
                     "p_mutate_tag", "p_mutate_dynamics"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be a probability")
        if self.population_size < 1 or self.generations < 1 or self.tournament_size < 1:
            raise ValueError("population_size, generations and tournament_size must be positive")
        if not 0 <= self.elite_count <= self.population_size:
            raise ValueError("elite_count must lie in [0, population_size]")
        if not self.speciation_threshold > 0:
            raise ValueError("speciation_threshold must be positive")


@dataclass
class Individual:
    genome: Genome
    fitness: Optional[float] = None
    species_id: Optional[int] = None


@dataclass
class Species:
    id: int
    representative: Genome
    members: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class GenerationContext:
    generation: int
    init_seed: int
    model_id: Optional[str] = None


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    best_ever_fitness: float
    species_count: int
    model_id: Optional[str]
    seed: int


class EvaluationError(RuntimeError):
    def __init__(self, generation: int, individual: int, cause: BaseException):
        super().__init__(f"fitness evaluation failed at generation {generation}, "
                         f"individual {individual}: {cause!r}")
        self.generation = generation
        self.individual = individual


# --- genomes -------------------------------------------------------------

def _random_protein(rng: np.random.Generator, kind: Kind) -> Protein:
    t = rng.random(3)
    return Protein(float(t[0]), float(t[1]), float(t[2]), kind)


def random_genome(n_inputs: int, n_outputs: int, config: EvolutionConfig,
                  rng: np.random.Generator) -> Genome:
    if n_inputs < 1 or n_outputs < 1:
        raise ValueError("need at least one input and one output protein")
    g = config.grn
    prots = ([_random_protein(rng, Kind.INPUT) for _ in range(n_inputs)]
             + [_random_protein(rng, Kind.OUTPUT) for _ in range(n_outputs)]
             + [_random_protein(rng, Kind.REGULATOR) for _ in range(config.initial_regulators)])
    beta = float(rng.uniform(g.beta_min, g.beta_max))
    delta = float(rng.uniform(g.delta_min, g.delta_max))
    return Genome(tuple(prots), beta, delta)


def protein_distance(a: Protein, b: Protein) -> float:
    return abs(a.id - b.id) + abs(a.enh - b.enh) + abs(a.inh - b.inh)


def _distance_matrix(xs: list[Protein], ys: list[Protein]) -> np.ndarray:
    if not xs or not ys:
        return np.zeros((len(xs), len(ys)))
    a = np.array([p.tags() for p in xs])
    b = np.array([p.tags() for p in ys])
    return np.abs(a[:, None, :] - b[None, :, :]).sum(axis=2)


def align_regulators(a: Genome, b: Genome, exact: bool = False) -> list[tuple[int, int]]:
    """Pairs (i, j) of regulator indices (within each genome's regulator list).

    Greedy: repeatedly match the closest remaining pair, ties broken by
    lowest (i, j). ``exact`` solves the min-cost assignment instead.
    """
    ra, rb = a.of_kind(Kind.REGULATOR), b.of_kind(Kind.REGULATOR)
    d = _distance_matrix(ra, rb)
    if d.size == 0:
        return []
    if exact:
        from scipy.optimize import linear_sum_assignment
        rows, cols = linear_sum_assignment(d)
        return sorted(zip(rows.tolist(), cols.tolist()))
    pairs = []
    order = np.argsort(d, axis=None, kind="stable")
    used_a, used_b = set(), set()
    for flat in order:
        i, j = divmod(int(flat), d.shape[1])
        if i in used_a or j in used_b:
            continue
        pairs.append((i, j))
        used_a.add(i)
        used_b.add(j)
        if len(pairs) == min(d.shape):
            break
    return sorted(pairs)


def genome_distance(a: Genome, b: Genome, exact: bool = False) -> float:
    """Tag distance between two genomes with the same input/output layout.

    Inputs and outputs are compared position by position (their roles are
    fixed); regulators are aligned by tag distance. Every regulator left
    unmatched costs ``UNMATCHED_PENALTY``. The protein part is averaged over
    the larger genome size; ``|d beta| + |d delta|`` is added unscaled.
    """
    if a.n_inputs != b.n_inputs or a.n_outputs != b.n_outputs:
        raise ValueError("genomes differ in input/output counts")
    total = 0.0
    for kind in (Kind.INPUT, Kind.OUTPUT):
        for p, q in zip(a.of_kind(kind), b.of_kind(kind)):
            total += protein_distance(p, q)
    ra, rb = a.of_kind(Kind.REGULATOR), b.of_kind(Kind.REGULATOR)
    pairs = align_regulators(a, b, exact=exact)
    total += sum(protein_distance(ra[i], rb[j]) for i, j in pairs)
    total += UNMATCHED_PENALTY * (len(ra) + len(rb) - 2 * len(pairs))
    return total / max(len(a), len(b)) + abs(a.beta - b.beta) + abs(a.delta - b.delta)


# --- variation -------------------------------------------------------------

def crossover(a: Genome, b: Genome, rng: np.random.Generator, a_is_fitter: bool = True) -> Genome:
    """Child of ``a`` and ``b``; unaligned regulators come from the fitter parent."""
    if a.n_inputs != b.n_inputs or a.n_outputs != b.n_outputs:
        raise ValueError("genomes differ in input/output counts")
    fixed = []
    for kind in (Kind.INPUT, Kind.OUTPUT):
        for p, q in zip(a.of_kind(kind), b.of_kind(kind)):
            fixed.append(p if rng.random() < 0.5 else q)
    ra, rb = a.of_kind(Kind.REGULATOR), b.of_kind(Kind.REGULATOR)
    pairs = align_regulators(a, b)
    regs = [ra[i] if rng.random() < 0.5 else rb[j] for i, j in pairs]
    if a_is_fitter:
        matched = {i for i, _ in pairs}
        regs += [p for i, p in enumerate(ra) if i not in matched]
    else:
        matched = {j for _, j in pairs}
        regs += [p for j, p in enumerate(rb) if j not in matched]
    beta = a.beta if rng.random() < 0.5 else b.beta
    delta = a.delta if rng.random() < 0.5 else b.delta
    return Genome(tuple(fixed + regs), beta, delta)


def mutate(genome: Genome, config: EvolutionConfig, rng: np.random.Generator) -> Genome:
    prots = list(genome.proteins)
    beta, delta = genome.beta, genome.delta
    g = config.grn
    if rng.random() < config.p_add_protein:
        prots.append(_random_protein(rng, Kind.REGULATOR))
    if rng.random() < config.p_remove_protein:
        reg_idx = [i for i, p in enumerate(prots) if p.kind is Kind.REGULATOR]
        if reg_idx:
            del prots[reg_idx[int(rng.integers(len(reg_idx)))]]
    if rng.random() < config.p_mutate_tag:
        i = int(rng.integers(len(prots)))
        which = int(rng.integers(3))
        tags = list(prots[i].tags())
        tags[which] = float(np.clip(tags[which] + rng.normal(0.0, config.tag_mutation_sigma), 0.0, 1.0))
        prots[i] = Protein(*tags, prots[i].kind)
    if rng.random() < config.p_mutate_dynamics:
        if rng.random() < 0.5:
            span = g.beta_max - g.beta_min
            beta = float(np.clip(beta + rng.normal(0.0, config.tag_mutation_sigma * span), g.beta_min, g.beta_max))
        else:
            span = g.delta_max - g.delta_min
            delta = float(np.clip(delta + rng.normal(0.0, config.tag_mutation_sigma * span), g.delta_min, g.delta_max))
    return Genome(tuple(prots), beta, delta)


# --- population ----------------------------------------------------------

def speciate(population: list[Individual], threshold: float, previous_species: list[Species],
             rng: np.random.Generator | None = None) -> list[Species]:
    """Assign every individual to the first species whose representative is close enough.

    Species from the previous generation keep their ids; empty ones are
    dropped. With ``rng`` given, each surviving species' representative is
    refreshed to a random member.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    species = [Species(s.id, s.representative, []) for s in previous_species]
    next_id = max((s.id for s in species), default=-1) + 1
    for idx, ind in enumerate(population):
        for s in species:
            if genome_distance(ind.genome, s.representative) <= threshold:
                s.members.append(idx)
                ind.species_id = s.id
                break
        else:
            species.append(Species(next_id, ind.genome, [idx]))
            ind.species_id = next_id
            next_id += 1
    species = [s for s in species if s.members]
    if rng is not None:
        for s in species:
            s.representative = population[s.members[int(rng.integers(len(s.members)))]].genome
    return species


def _tournament(members: list[int], population: list[Individual], k: int,
                rng: np.random.Generator) -> int:
    picks = rng.choice(len(members), size=min(k, len(members)), replace=False)
    # ties go to the lowest population index
    return min((members[int(p)] for p in picks), key=lambda i: (-population[i].fitness, i))


def _allocate(species: list[Species], population: list[Individual], slots: int) -> list[int]:
    """Offspring per species, proportional to shifted mean fitness (largest remainder)."""
    means = np.array([np.mean([population[i].fitness for i in s.members]) for s in species])
    shares = means - means.min() + 1e-9
    raw = slots * shares / shares.sum()
    counts = np.floor(raw).astype(int)
    rest = slots - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:rest]] += 1
    return counts.tolist()


def next_generation(population: list[Individual], species: list[Species], config: EvolutionConfig,
                    rng: np.random.Generator) -> list[Individual]:
    if any(ind.fitness is None for ind in population):
        raise ValueError("every individual needs a fitness before selection")
    ranked = sorted(range(len(population)), key=lambda i: (-population[i].fitness, i))
    children = [Individual(population[i].genome) for i in ranked[:config.elite_count]]
    slots = len(population) - len(children)
    if slots == 0:
        return children
    all_idx = list(range(len(population)))
    for s, n_off in zip(species, _allocate(species, population, slots)):
        for _ in range(n_off):
            p1 = _tournament(s.members, population, config.tournament_size, rng)
            if rng.random() < config.p_crossover:
                pool = s.members if len(s.members) > 1 else all_idx
                p2 = _tournament(pool, population, config.tournament_size, rng)
                fa, fb = population[p1].fitness, population[p2].fitness
                child = crossover(population[p1].genome, population[p2].genome, rng, a_is_fitter=fa >= fb)
            else:
                child = population[p1].genome
            children.append(Individual(mutate(child, config, rng)))
    return children


def _default_context(config: EvolutionConfig) -> Callable[[int], GenerationContext]:
    def make(generation: int) -> GenerationContext:
        seed = int(np.random.default_rng([config.rng_seed, generation, 1]).integers(2**31))
        return GenerationContext(generation, seed)
    return make


def evaluate_population(fitness_fn, genomes: list[Genome], ctx, generation: int,
                        executor: concurrent.futures.Executor | None = None) -> list[float]:
    """Score genomes in index order; an executor may run them concurrently."""
    if executor is None:
        out = []
        for i, g in enumerate(genomes):
            try:
                out.append(float(fitness_fn(g, ctx)))
            except Exception as e:
                raise EvaluationError(generation, i, e) from e
        return out
    futures = [executor.submit(fitness_fn, g, ctx) for g in genomes]
    out = []
    for i, f in enumerate(futures):
        try:
            out.append(float(f.result()))
        except Exception as e:
            raise EvaluationError(generation, i, e) from e
    return out


def evolve(fitness_fn: Callable[[Genome, Any], float], config: EvolutionConfig,
           context_fn: Callable[[int], Any] | None = None,
           executor: concurrent.futures.Executor | None = None,
           callback: Callable[[GenerationRecord, list[Individual]], None] | None = None):
    """Run the GA and return ``(best_ever, history)``.

    ``context_fn(generation)`` builds the context shared by all individuals
    of a generation; it defaults to a seed derived from ``config.rng_seed``.
    ``history[-1].best_fitness`` is the best of the final generation;
    ``callback`` sees every evaluated population if the genomes are needed.
    """
    rng = np.random.default_rng(config.rng_seed)
    context_fn = context_fn or _default_context(config)
    population = [Individual(random_genome(config.n_inputs, config.n_outputs, config, rng))
                  for _ in range(config.population_size)]
    species: list[Species] = []
    best: Individual | None = None
    history: list[GenerationRecord] = []
    for gen in range(config.generations):
        ctx = context_fn(gen)
        scores = evaluate_population(fitness_fn, [ind.genome for ind in population], ctx, gen, executor)
        for ind, f in zip(population, scores):
            ind.fitness = f
        species = speciate(population, config.speciation_threshold, species, rng)
        gen_best = max(range(len(population)), key=lambda i: (population[i].fitness, -i))
        if best is None or population[gen_best].fitness > best.fitness:
            best = dataclasses.replace(population[gen_best])
        rec = GenerationRecord(
            generation=gen,
            best_fitness=population[gen_best].fitness,
            mean_fitness=float(np.mean(scores)),
            best_ever_fitness=best.fitness,
            species_count=len(species),
            model_id=getattr(ctx, "model_id", None),
            seed=int(getattr(ctx, "init_seed", 0)),
        )
        history.append(rec)
        log.info("gen %d best %.4f mean %.4f species %d", gen, rec.best_fitness,
                 rec.mean_fitness, rec.species_count)
        if callback is not None:
            callback(rec, population)
        if gen + 1 < config.generations:
            population = next_generation(population, species, config, rng)
    return best, history


def random_search(fitness_fn, config: EvolutionConfig, budget: int,
                  context_fn: Callable[[int], Any] | None = None) -> float:
    """Best fitness among ``budget`` random genomes (baseline for the GA).

    Evaluation ``k`` uses the context of generation ``k // population_size``,
    so the baseline sees the same sequence of task instances as ``evolve``.
    """
    rng = np.random.default_rng([config.rng_seed, 7])
    context_fn = context_fn or _default_context(config)
    best = -np.inf
    ctx, ctx_gen = None, -1
    for k in range(budget):
        gen = k // config.population_size
        if gen != ctx_gen:
            ctx, ctx_gen = context_fn(gen), gen
        g = random_genome(config.n_inputs, config.n_outputs, config, rng)
        best = max(best, float(fitness_fn(g, ctx)))
    return best
