import concurrent.futures

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nmgrn import grneat as ga
from nmgrn.grn import Genome, Kind, Protein, validate_genome
from nmgrn.grneat import EvolutionConfig, Individual

from oracles import brute_force_regulator_cost
from tasks import DistanceToTarget, tracking_fitness

QUIET = dict(p_add_protein=0.0, p_remove_protein=0.0, p_mutate_tag=0.0, p_mutate_dynamics=0.0)


def genome(regs, beta=1.0, delta=1.0, inp=(0.1, 0.2, 0.3), out=(0.4, 0.5, 0.6)):
    return Genome.from_parts([Protein(*inp, Kind.INPUT)], [Protein(*out, Kind.OUTPUT)],
                             [Protein(*r, Kind.REGULATOR) for r in regs], beta, delta)


def tag_sum_fitness(g, ctx=None):
    """Context-free fitness: mean output tag id."""
    return float(np.mean([p.id for p in g.of_kind(Kind.OUTPUT)]))


def failing_at_one(g, ctx):
    if ctx.generation == 1:
        raise RuntimeError("boom")
    return 0.0


class TestRandomGenome:
    @pytest.mark.parametrize("n_out,total", [(4, 18), (8, 22)])
    def test_counts(self, n_out, total):
        g = ga.random_genome(13, n_out, EvolutionConfig(), np.random.default_rng(0))
        assert len(g) == total and g.n_regulators == 1
        assert validate_genome(g) == []

    def test_deterministic(self):
        a = ga.random_genome(13, 4, EvolutionConfig(), np.random.default_rng(5))
        b = ga.random_genome(13, 4, EvolutionConfig(), np.random.default_rng(5))
        assert a == b

    def test_rejects_empty_roles(self):
        with pytest.raises(ValueError):
            ga.random_genome(13, 0, EvolutionConfig(), np.random.default_rng(0))


class TestDistance:
    def test_protein_examples(self):
        p = Protein(0.1, 0.2, 0.3, Kind.REGULATOR)
        assert ga.protein_distance(p, p) == 0.0
        assert ga.protein_distance(p, Protein(0.2, 0.2, 0.1, Kind.REGULATOR)) == pytest.approx(0.3)
        assert ga.protein_distance(Protein(0, 0, 0, Kind.INPUT), Protein(1, 1, 1, Kind.INPUT)) == 3.0

    def test_identical_and_dynamics_only(self):
        g = genome([(0.3, 0.3, 0.3)])
        assert ga.genome_distance(g, g) == 0.0
        assert ga.genome_distance(g, genome([(0.3, 0.3, 0.3)], beta=1.5)) == pytest.approx(0.5)

    def test_hand_built_against_brute_force(self):
        ra = [(0.1, 0.1, 0.1), (0.5, 0.5, 0.5), (0.9, 0.9, 0.9)]
        rb = [(0.12, 0.1, 0.1), (0.5, 0.52, 0.5), (0.9, 0.9, 0.88), (0.3, 0.7, 0.0)]
        a = genome(ra, beta=0.5)
        b = genome(rb, beta=0.7, out=(0.4, 0.5, 0.7))
        oracle = (0.1 + brute_force_regulator_cost(ra, rb)) / 6 + 0.2
        assert ga.genome_distance(a, b, exact=True) == pytest.approx(oracle, abs=1e-12)
        # well separated: greedy finds the optimum too
        assert ga.genome_distance(a, b) == pytest.approx(oracle, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(0, 4), st.integers(0, 4))
    def test_exact_matches_brute_force(self, seed, na, nb):
        rng = np.random.default_rng(seed)
        ra = [tuple(rng.random(3)) for _ in range(na)]
        rb = [tuple(rng.random(3)) for _ in range(nb)]
        a, b = genome(ra), genome(rb)
        expect = brute_force_regulator_cost(ra, rb) / max(len(a), len(b))
        assert ga.genome_distance(a, b, exact=True) == pytest.approx(expect, abs=1e-12)
        # greedy is never better than the optimum, and the metric is symmetric
        assert ga.genome_distance(a, b) >= expect - 1e-12
        assert ga.genome_distance(a, b, exact=True) == pytest.approx(ga.genome_distance(b, a, exact=True))

    def test_layout_mismatch(self):
        a = genome([])
        b = Genome.from_parts([Protein(0, 0, 0, Kind.INPUT)] * 2, [Protein(0, 0, 0, Kind.OUTPUT)], [], 1.0, 1.0)
        with pytest.raises(ValueError):
            ga.genome_distance(a, b)


class TestSpeciate:
    def pop(self):
        return [Individual(genome([(x, x, x)])) for x in (0.0, 0.05, 0.9, 1.0)]

    def test_threshold_extremes(self):
        assert len(ga.speciate(self.pop(), 100.0, [])) == 1
        assert len(ga.speciate(self.pop(), 1e-9, [])) == 4

    def test_two_clusters(self):
        pop = self.pop()
        sp = ga.speciate(pop, 0.5, [])
        assert [s.members for s in sp] == [[0, 1], [2, 3]]
        assert [ind.species_id for ind in pop] == [0, 0, 1, 1]

    def test_ids_persist(self):
        first = ga.speciate(self.pop(), 0.5, [])
        shifted = [Individual(genome([(0.95, 0.95, 0.95)]))]
        again = ga.speciate(shifted, 0.5, first)
        assert [s.id for s in again] == [1]

    def test_boundary_inclusive(self):
        a, b = genome([(0.0, 0.0, 0.0)]), genome([(0.0, 0.0, 0.0)], beta=1.25)
        assert len(ga.speciate([Individual(a), Individual(b)], 0.25, [])) == 1


class TestCrossover:
    def test_identical_parents(self):
        g = genome([(0.2, 0.3, 0.4), (0.6, 0.1, 0.9)])
        assert ga.crossover(g, g, np.random.default_rng(0)) == g

    @pytest.mark.parametrize("fitter_a", [True, False])
    def test_regulators_follow_fitter(self, fitter_a):
        a = genome([(0.1, 0.1, 0.1)])
        b = genome([(0.1, 0.1, 0.1), (0.8, 0.8, 0.8), (0.5, 0.2, 0.9)], beta=2.0)
        for seed in range(10):
            child = ga.crossover(a, b, np.random.default_rng(seed), a_is_fitter=fitter_a)
            assert child.n_regulators == (1 if fitter_a else 3)
            pool = set(a.proteins) | set(b.proteins)
            assert set(child.proteins) <= pool
            assert child.beta in (1.0, 2.0)
            assert validate_genome(child) == []


class TestMutate:
    def test_zero_rates_identity(self):
        g = ga.random_genome(13, 4, EvolutionConfig(), np.random.default_rng(0))
        cfg = EvolutionConfig(**QUIET)
        assert ga.mutate(g, cfg, np.random.default_rng(1)) == g

    def test_add_protein(self):
        g = genome([(0.5, 0.5, 0.5)])
        cfg = EvolutionConfig(**{**QUIET, "p_add_protein": 1.0})
        m = ga.mutate(g, cfg, np.random.default_rng(2))
        assert len(m) == len(g) + 1 and m.proteins[-1].kind is Kind.REGULATOR

    def test_remove_keeps_io(self):
        g = genome([])
        cfg = EvolutionConfig(**{**QUIET, "p_remove_protein": 1.0})
        assert ga.mutate(g, cfg, np.random.default_rng(0)) == g

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_clamped(self, seed):
        cfg = EvolutionConfig(p_add_protein=0.5, p_remove_protein=0.5, p_mutate_tag=1.0,
                              p_mutate_dynamics=1.0, tag_mutation_sigma=5.0)
        rng = np.random.default_rng(seed)
        g = ga.random_genome(3, 2, cfg, rng)
        for _ in range(5):
            g = ga.mutate(g, cfg, rng)
            assert validate_genome(g) == []


class TestSelection:
    def scored(self, n=10, seed=0):
        rng = np.random.default_rng(seed)
        pop = [Individual(ga.random_genome(2, 2, EvolutionConfig(), rng)) for _ in range(n)]
        for ind in pop:
            ind.fitness = tag_sum_fitness(ind.genome)
        return pop

    def test_all_elites(self):
        pop = self.scored()
        cfg = EvolutionConfig(population_size=10, elite_count=10)
        sp = ga.speciate(pop, cfg.speciation_threshold, [])
        kids = ga.next_generation(pop, sp, cfg, np.random.default_rng(0))
        ranked = sorted(pop, key=lambda i: -i.fitness)
        assert [k.genome for k in kids] == [r.genome for r in ranked]

    def test_size_and_determinism(self):
        cfg = EvolutionConfig(population_size=10)
        runs = []
        for _ in range(2):
            pop = self.scored()
            sp = ga.speciate(pop, cfg.speciation_threshold, [])
            runs.append([k.genome for k in ga.next_generation(pop, sp, cfg, np.random.default_rng(3))])
        assert len(runs[0]) == 10 and runs[0] == runs[1]

    def test_single_species_offspring(self):
        pop = self.scored()
        cfg = EvolutionConfig(population_size=10, elite_count=0, p_crossover=0.0, **QUIET)
        sp = ga.speciate(pop, 100.0, [])
        kids = ga.next_generation(pop, sp, cfg, np.random.default_rng(1))
        assert len(sp) == 1
        assert {k.genome for k in kids} <= {ind.genome for ind in pop}

    def test_unscored_rejected(self):
        pop = self.scored()
        pop[0].fitness = None
        with pytest.raises(ValueError):
            ga.next_generation(pop, [], EvolutionConfig(population_size=10), np.random.default_rng(0))

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=6), st.integers(1, 50))
    def test_allocation_sums(self, means, slots):
        pop = [Individual(genome([]), fitness=m) for m in means]
        sp = [ga.Species(i, pop[i].genome, [i]) for i in range(len(pop))]
        counts = ga._allocate(sp, pop, slots)
        assert sum(counts) == slots and min(counts) >= 0


class TestEvolve:
    CFG = EvolutionConfig(population_size=8, generations=5, n_inputs=2, n_outputs=2, rng_seed=11)

    def test_constant_fitness(self):
        best, hist = ga.evolve(lambda g, ctx: 0.5, self.CFG)
        assert len(hist) == 5 and best.fitness == 0.5
        assert all(r.best_fitness == 0.5 and r.mean_fitness == 0.5 for r in hist)

    def test_elitism_monotone(self):
        _, hist = ga.evolve(tag_sum_fitness, self.CFG)
        bests = [r.best_fitness for r in hist]
        assert all(b >= a for a, b in zip(bests, bests[1:]))
        assert hist[-1].best_ever_fitness == max(bests)

    def test_distance_target_monotone(self):
        target = ga.random_genome(13, 4, EvolutionConfig(), np.random.default_rng(99))
        _, hist = ga.evolve(DistanceToTarget(target), EvolutionConfig(population_size=20, generations=10))
        bests = [r.best_fitness for r in hist]
        assert all(b >= a for a, b in zip(bests, bests[1:]))

    def test_tracking_improves(self):
        improved = 0
        for seed in range(10):
            _, hist = ga.evolve(tracking_fitness, EvolutionConfig(population_size=20, generations=20,
                                                                  rng_seed=42 + seed))
            improved += hist[-1].best_fitness > hist[0].best_fitness
        assert improved >= 9

    def test_deterministic(self):
        a = ga.evolve(tag_sum_fitness, self.CFG)
        b = ga.evolve(tag_sum_fitness, self.CFG)
        assert a[0].genome == b[0].genome and a[1] == b[1]

    @pytest.mark.parametrize("pool", [concurrent.futures.ThreadPoolExecutor,
                                      concurrent.futures.ProcessPoolExecutor])
    def test_parallel_matches_serial(self, pool):
        serial = ga.evolve(tag_sum_fitness, self.CFG)
        with pool(max_workers=2) as ex:
            par = ga.evolve(tag_sum_fitness, self.CFG, executor=ex)
        assert serial[1] == par[1] and serial[0].genome == par[0].genome

    def test_error_propagates(self):
        with pytest.raises(ga.EvaluationError) as info:
            ga.evolve(failing_at_one, self.CFG)
        assert info.value.generation == 1 and info.value.individual == 0
        assert isinstance(info.value.__cause__, RuntimeError)

    def test_callback_and_context(self):
        seen = []
        ga.evolve(lambda g, ctx: float(ctx.generation), self.CFG,
                  context_fn=lambda gen: ga.GenerationContext(gen, 100 + gen, "m1"),
                  callback=lambda rec, pop: seen.append((rec.model_id, rec.seed, len(pop))))
        assert seen == [("m1", 100 + k, 8) for k in range(5)]

    def test_random_search(self):
        score = ga.random_search(tag_sum_fitness, self.CFG, 16)
        assert 0.0 <= score <= 1.0
        assert score == ga.random_search(tag_sum_fitness, self.CFG, 16)

    def test_random_search_context_schedule(self):
        seen = []
        ga.random_search(lambda g, ctx: seen.append(ctx.generation) or 0.0, self.CFG, 20,
                         context_fn=lambda gen: ga.GenerationContext(gen, gen))
        assert seen == [k // 8 for k in range(20)]
