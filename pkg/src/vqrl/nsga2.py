"""NSGA-II architecture search over genomes.

Two minimized objectives: f1 is the negative mean episode reward of a short
noiseless training run (averaged over evaluation seeds), f2 the number of
entangling blocks before the terminator.  Standard machinery otherwise:
fast non-dominated sorting, crowding distance, binary tournaments on
(rank, crowding), single-point crossover, per-gene uniform mutation,
elitist (parents + offspring) truncation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import BackendDescriptor
from .genome import ComponentKind, DEFAULT_GENOME_LENGTH, Genome, decode_genome, random_genome
from .reinforce import TrainConfig, train

# Worst-possible f1: a degenerate genome is scored as if it collected zero
# reward, which any evaluable policy beats.
DEGENERATE_F1 = 0.0


@dataclass
class Individual:
    genome: Genome
    objectives: tuple[float, float]
    rank: int = 0
    crowding: float = 0.0


@dataclass
class SearchConfig:
    population: int = 20
    generations: int = 10
    crossover_prob: float = 0.9
    mutation_prob: float | None = None  # default 1/L
    genome_length: int = DEFAULT_GENOME_LENGTH
    n_qubits: int = 4
    eval_episodes: int = 150
    eval_episode_cap: int = 200
    eval_seeds: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population < 2 or self.population % 2:
            raise ValueError(f"population must be even and >= 2, got {self.population}")
        for name, p in (("crossover_prob", self.crossover_prob), ("mutation_prob", self.mutation_prob)):
            if p is not None and not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")


@dataclass
class SearchResult:
    front: list[Individual]
    history: list[list[Individual]]
    n_evaluations: int


def evaluate_genome(genome: Genome, config: SearchConfig) -> tuple[float, float]:
    """Objectives for one genome: (-mean training reward, entangler count).

    Genomes whose circuit lacks a rotation or an encoding block cannot form a
    state-dependent policy and get the zero-reward sentinel instead of a run.
    """
    f2 = float(genome.ent_count())
    ir = decode_genome(genome, config.n_qubits)
    kinds = {c.kind for c in ir.components}
    if ComponentKind.VAR not in kinds or ComponentKind.ENC not in kinds:
        return (DEGENERATE_F1, f2)
    rewards = []
    for k in range(config.eval_seeds):
        run_seed = int(np.random.SeedSequence((config.seed, hash(genome.genes) & 0xFFFFFFFF, k)).generate_state(1)[0])
        result = train(
            TrainConfig(
                genome=genome,
                n_qubits=config.n_qubits,
                episodes=config.eval_episodes,
                episode_cap=config.eval_episode_cap,
                seed=run_seed,
                backend=BackendDescriptor(kind="exact"),
            )
        )
        rewards.append(float(np.mean([m.reward for m in result.metrics])))
    return (-float(np.mean(rewards)), f2)


def dominates(a: tuple[float, ...], b: tuple[float, ...]) -> bool:
    """True when a is no worse in every objective and better in at least one."""
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def non_dominated_sort(objectives: list[tuple[float, ...]]) -> list[list[int]]:
    """Fast non-dominated sorting; returns fronts as lists of indices."""
    n = len(objectives)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    domination_count = [0] * n
    fronts: list[list[int]] = [[]]
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(objectives[i], objectives[j]):
                dominated_by[i].append(j)
                domination_count[j] += 1
            elif dominates(objectives[j], objectives[i]):
                dominated_by[j].append(i)
                domination_count[i] += 1
    for i in range(n):
        if domination_count[i] == 0:
            fronts[0].append(i)
    current = 0
    while fronts[current]:
        nxt: list[int] = []
        for i in fronts[current]:
            for j in dominated_by[i]:
                domination_count[j] -= 1
                if domination_count[j] == 0:
                    nxt.append(j)
        current += 1
        fronts.append(nxt)
    fronts.pop()
    return fronts


def crowding_distance(objectives: list[tuple[float, ...]]) -> list[float]:
    """Crowding distances for one front; boundary members get +inf."""
    n = len(objectives)
    if n == 0:
        return []
    dist = [0.0] * n
    n_obj = len(objectives[0])
    for m in range(n_obj):
        order = sorted(range(n), key=lambda i: objectives[i][m])
        dist[order[0]] = math.inf
        dist[order[-1]] = math.inf
        span = objectives[order[-1]][m] - objectives[order[0]][m]
        if span <= 0:
            continue
        for pos in range(1, n - 1):
            i = order[pos]
            if dist[i] != math.inf:
                dist[i] += (objectives[order[pos + 1]][m] - objectives[order[pos - 1]][m]) / span
    return dist


def _rank_population(pop: list[Individual]) -> list[list[int]]:
    fronts = non_dominated_sort([ind.objectives for ind in pop])
    for rank, front in enumerate(fronts):
        dists = crowding_distance([pop[i].objectives for i in front])
        for i, d in zip(front, dists):
            pop[i].rank = rank
            pop[i].crowding = d
    return fronts


def _tournament(pop: list[Individual], rng: np.random.Generator) -> Individual:
    i, j = rng.integers(len(pop)), rng.integers(len(pop))
    a, b = pop[i], pop[j]
    if (a.rank, -a.crowding) <= (b.rank, -b.crowding):
        return a
    return b


def _crossover(a: Genome, b: Genome, rng: np.random.Generator, prob: float) -> tuple[Genome, Genome]:
    if rng.random() >= prob or len(a) < 2:
        return a, b
    point = int(rng.integers(1, len(a)))
    return (
        Genome(a.genes[:point] + b.genes[point:]),
        Genome(b.genes[:point] + a.genes[point:]),
    )


def _mutate(genome: Genome, rng: np.random.Generator, prob: float) -> Genome:
    genes = list(genome.genes)
    for i in range(len(genes)):
        if rng.random() < prob:
            genes[i] = int(rng.integers(0, 4))
    return Genome(tuple(genes))


def _update_archive(archive: list[Individual], candidate: Individual) -> None:
    # Keep the all-time non-dominated set; first-come wins on exact ties.
    for kept in archive:
        if dominates(kept.objectives, candidate.objectives) or kept.objectives == candidate.objectives:
            return
    archive[:] = [kept for kept in archive if not dominates(candidate.objectives, kept.objectives)]
    archive.append(candidate)


def evolve(config: SearchConfig, evaluate_fn=None, on_generation=None) -> SearchResult:
    """Run the search and return the all-time Pareto archive sorted by f1.

    ``evaluate_fn(genome) -> (f1, f2)`` overrides the RL evaluation (used by
    tests with synthetic objectives); ``on_generation(gen, population)`` is
    called after each generation's truncation.
    """
    rng = np.random.default_rng(config.seed)
    mut_prob = config.mutation_prob if config.mutation_prob is not None else 1.0 / config.genome_length
    evaluate = evaluate_fn or (lambda g: evaluate_genome(g, config))

    archive: list[Individual] = []
    n_evals = 0

    def make_individual(genome: Genome) -> Individual:
        nonlocal n_evals
        ind = Individual(genome, tuple(evaluate(genome)))
        n_evals += 1
        _update_archive(archive, ind)
        return ind

    population = [make_individual(random_genome(rng, config.genome_length)) for _ in range(config.population)]
    _rank_population(population)
    history = [[Individual(i.genome, i.objectives, i.rank, i.crowding) for i in population]]
    if on_generation is not None:
        on_generation(0, population)

    for gen in range(1, config.generations + 1):
        offspring: list[Individual] = []
        while len(offspring) < config.population:
            p1, p2 = _tournament(population, rng), _tournament(population, rng)
            c1, c2 = _crossover(p1.genome, p2.genome, rng, config.crossover_prob)
            offspring.append(make_individual(_mutate(c1, rng, mut_prob)))
            if len(offspring) < config.population:
                offspring.append(make_individual(_mutate(c2, rng, mut_prob)))
        combined = population + offspring
        fronts = _rank_population(combined)
        survivors: list[Individual] = []
        for front in fronts:
            members = [combined[i] for i in front]
            if len(survivors) + len(members) <= config.population:
                survivors.extend(members)
            else:
                members.sort(key=lambda ind: -ind.crowding)
                survivors.extend(members[: config.population - len(survivors)])
                break
        population = survivors
        _rank_population(population)
        history.append([Individual(i.genome, i.objectives, i.rank, i.crowding) for i in population])
        if on_generation is not None:
            on_generation(gen, population)

    front = sorted(archive, key=lambda ind: ind.objectives)
    return SearchResult(front=front, history=history, n_evaluations=n_evals)
