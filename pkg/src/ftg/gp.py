"""Tree-based GP baselines: (1+1), (1+lambda), and canonical generational GP.

All three initialize with ramped half-and-half draws and mutate by replacing a
uniformly chosen node with a fresh random composition. Canonical GP adds
binary tournament selection, subtree crossover, and full generational
replacement with the best-so-far tracked outside the population.

Individuals evolve as flat postorder genomes (see :mod:`ftg.genomes`) because
unconstrained variation bloats trees into the thousands of nodes; the node
tree of an individual is materialized on demand. One fitness evaluation is
one traversal of the training set. Runs only start a generation that fits
completely inside the remaining budget, so evaluation counts follow the exact
pattern 1 + g*lambda for the elitist chains and g*population for canonical GP.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .genomes import Genome, decode_genome, encode_tree, genome_crossover, \
    replace_genome_subtree
from .hilbert import BudgetMeter
from .trees import ExprTree, GenParams, generate_composition


@dataclass(frozen=True)
class GpConfig:
    population_size: int
    offspring_size: int
    mutation: str               # "uniform-subtree" or "probabilistic-subtree"
    mutation_rate: float
    crossover_rate: float = 0.0
    tournament_size: int = 0
    gen: GenParams = GenParams(0.5, 1, 9)
    budget: float = 100_000

    @classmethod
    def one_plus_one(cls, budget: float = 100_000, gen: GenParams = GenParams(0.5, 1, 9)):
        return cls(1, 1, "uniform-subtree", 1.0, gen=gen, budget=budget)

    @classmethod
    def one_plus_lambda(cls, offspring: int = 500, budget: float = 100_000,
                        gen: GenParams = GenParams(0.5, 1, 9)):
        return cls(1, offspring, "uniform-subtree", 1.0, gen=gen, budget=budget)

    @classmethod
    def canonical(cls, population: int = 500, budget: float = 100_000,
                  gen: GenParams = GenParams(0.5, 1, 9)):
        return cls(population, population, "probabilistic-subtree", 0.1,
                   crossover_rate=0.9, tournament_size=2, gen=gen, budget=budget)


@dataclass(eq=False)
class Individual:
    genome: Genome
    loss: float
    fe_stamp: int  # traversal count right after this individual was evaluated
    _tree: ExprTree | None = field(default=None, repr=False)

    @property
    def tree(self) -> ExprTree:
        if self._tree is None:
            self._tree = decode_genome(self.genome)
        return self._tree

    @property
    def size(self) -> int:
        return len(self.genome)


@dataclass
class GpRun:
    trajectory: list[tuple[int, float]]  # (traversals, best-so-far loss) per generation
    best: Individual
    generations: int
    traversals: int
    termination: str = "budget"


def mutate_uniform_subtree(genome: Genome, opset, params: GenParams,
                           rng: np.random.Generator) -> Genome:
    """Replace a uniformly chosen node by a fresh random composition."""
    index = int(rng.integers(len(genome)))
    donor = encode_tree(generate_composition(opset, params, rng))
    return replace_genome_subtree(genome, index, donor)


def tournament_select(pop: list[Individual], size: int,
                      rng: np.random.Generator) -> Individual:
    """Best of ``size`` uniform draws with replacement; ties broken uniformly."""
    if not pop:
        raise ValueError("empty population")
    picks = [pop[int(i)] for i in rng.integers(len(pop), size=size)]
    best_loss = min(ind.loss for ind in picks)
    winners = [ind for ind in picks if ind.loss == best_loss]
    if len(winners) == 1:
        return winners[0]
    return winners[int(rng.integers(len(winners)))]


def _fresh_individual(problem, config: GpConfig, rng, evaluate, meter) -> Individual:
    genome = encode_tree(generate_composition(problem.opset, config.gen, rng))
    return Individual(genome, evaluate(genome), meter.count)


def run_one_plus_lambda(problem, config: GpConfig, rng: np.random.Generator,
                        stop_loss: float | None = None,
                        on_eval: Callable[[Individual], None] | None = None,
                        on_generation: Callable[[int, list[Individual], Individual], None] | None = None,
                        ) -> GpRun:
    """Elitist mutation-only chain; ``offspring_size`` 1 gives the (1+1) case.

    Each generation mutates the parent ``lambda`` times and the best mutant
    replaces the parent when its loss is less than or equal, so the parent
    loss never increases. Neutral moves are accepted to allow drift.
    """
    meter = BudgetMeter(config.budget)
    evaluate = problem.genome_evaluator(meter)

    parent = _fresh_individual(problem, config, rng, evaluate, meter)
    if on_eval:
        on_eval(parent)
    trajectory = [(meter.count, parent.loss)]
    if on_generation:
        on_generation(0, [parent], parent)

    generation = 0
    termination = "budget"
    lam = config.offspring_size
    while True:
        if stop_loss is not None and parent.loss < stop_loss:
            termination = "stopped"
            break
        if meter.count + lam > config.budget:
            break
        generation += 1
        champion: Individual | None = None
        for _ in range(lam):
            genome = mutate_uniform_subtree(parent.genome, problem.opset, config.gen, rng)
            mutant = Individual(genome, evaluate(genome), meter.count)
            if on_eval:
                on_eval(mutant)
            if champion is None or mutant.loss < champion.loss:
                champion = mutant
        if champion.loss <= parent.loss:
            parent = champion
        trajectory.append((meter.count, parent.loss))
        if on_generation:
            on_generation(generation, [parent], parent)

    return GpRun(trajectory, parent, generation, meter.count, termination)


def run_canonical(problem, config: GpConfig, rng: np.random.Generator,
                  stop_loss: float | None = None,
                  on_eval: Callable[[Individual], None] | None = None,
                  on_generation: Callable[[int, list[Individual], Individual], None] | None = None,
                  ) -> GpRun:
    """Generational GP: tournament parents, subtree crossover, then mutation.

    Offspring are built one by one: a tournament parent, crossed with a second
    tournament parent with probability ``crossover_rate``, then hit by one
    uniform-subtree mutation with probability ``mutation_rate``. The new
    population replaces the old one completely; the best individual ever seen
    is tracked outside the population.
    """
    meter = BudgetMeter(config.budget)
    evaluate = problem.genome_evaluator(meter)

    population = [_fresh_individual(problem, config, rng, evaluate, meter)
                  for _ in range(config.population_size)]
    if on_eval:
        for ind in population:
            on_eval(ind)
    best = min(population, key=lambda ind: ind.loss)
    trajectory = [(meter.count, best.loss)]
    if on_generation:
        on_generation(0, population, best)

    generation = 0
    termination = "budget"
    while True:
        if stop_loss is not None and best.loss < stop_loss:
            termination = "stopped"
            break
        if meter.count + config.offspring_size > config.budget:
            break
        generation += 1
        offspring: list[Individual] = []
        for _ in range(config.offspring_size):
            genome = tournament_select(population, config.tournament_size, rng).genome
            if rng.random() < config.crossover_rate:
                mate = tournament_select(population, config.tournament_size, rng).genome
                genome = genome_crossover(genome, mate, rng)
            if rng.random() < config.mutation_rate:
                genome = mutate_uniform_subtree(genome, problem.opset, config.gen, rng)
            ind = Individual(genome, evaluate(genome), meter.count)
            if on_eval:
                on_eval(ind)
            offspring.append(ind)
        population = offspring
        gen_best = min(population, key=lambda ind: ind.loss)
        if gen_best.loss < best.loss:
            best = gen_best
        trajectory.append((meter.count, best.loss))
        if on_generation:
            on_generation(generation, population, best)

    return GpRun(trajectory, best, generation, meter.count, termination)
