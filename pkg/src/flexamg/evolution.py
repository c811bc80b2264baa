"""Multi-objective (mu + lambda) evolutionary loop with NSGA-II ranking.

Objectives are (cost per iteration, iteration count), both minimized. In
work-unit cost mode the whole run is deterministic for a fixed seed; wallclock
mode measures the median of 5 preconditioner applications and is meant for
real tuning runs, not tests.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import time

import numpy as np

from . import amg, cycles, grammar as grammar_mod
from .gmres import gmres
from .problems import ProblemInstance

INFEASIBLE_TIME = 1e30


@dataclass(frozen=True)
class Fitness:
    time_per_iteration: float
    iterations: int
    feasible: bool

    def objectives(self) -> tuple[float, float]:
        return (self.time_per_iteration, float(self.iterations))

    @property
    def aggregate(self) -> float:
        return self.time_per_iteration * self.iterations


def infeasible_fitness(maxiter: int) -> Fitness:
    # sentinel objectives dominated by every feasible individual
    return Fitness(time_per_iteration=INFEASIBLE_TIME,
                   iterations=maxiter * 10, feasible=False)


@dataclass
class Individual:
    genotype: grammar_mod.Genotype
    ir: cycles.CycleIR
    fitness: Fitness | None = None
    rank: int | None = None
    crowding: float | None = None


@dataclass(frozen=True)
class EvolutionConfig:
    mu: int = 256
    lam: int = 256
    generations: int = 100
    crossover_prob: float = 0.9
    mutation_prob: float = 0.1
    init_factor: int = 64
    cost_mode: str = "work_units"      # or "wallclock"
    rng_seed: int = 0
    n_flex: int = grammar_mod.DEFAULT_N_FLEX
    # GMRES parameters used during fitness evaluation
    rtol: float = 1e-4
    atol: float = 1e-8
    restart: int = 50
    maxiter: int = 100

    def __post_init__(self):
        if self.mu < 1 or self.lam < 1 or self.generations < 0 or self.init_factor < 1:
            raise ValueError("population counts must be >= 1")
        if self.crossover_prob + self.mutation_prob > 1 + 1e-12:
            raise ValueError("crossover_prob + mutation_prob must be <= 1")
        if self.cost_mode not in ("work_units", "wallclock"):
            raise ValueError("cost_mode must be 'work_units' or 'wallclock'")


def evaluate_fitness(ind: Individual, problem: ProblemInstance,
                     hierarchy: amg.AmgHierarchy,
                     config: EvolutionConfig) -> Fitness:
    """GMRES run with the individual's cycle as right preconditioner.
    Divergence or hitting maxiter makes the individual infeasible."""
    ir = ind.ir
    wu = cycles.work_units(ir, hierarchy)
    precond = lambda v: cycles.execute(ir, hierarchy, v)
    _, report = gmres(problem.matrix, problem.rhs, precond=precond,
                      rtol=config.rtol, atol=config.atol,
                      restart=config.restart, maxiter=config.maxiter,
                      work_units_per_application=wu)
    if not report.converged:
        return infeasible_fitness(config.maxiter)
    if config.cost_mode == "work_units":
        tpi = wu
    else:
        samples = []
        for _ in range(5):
            t0 = time.perf_counter()
            precond(problem.rhs)
            samples.append(time.perf_counter() - t0)
        tpi = float(np.median(samples))
    return Fitness(time_per_iteration=tpi, iterations=report.iterations,
                   feasible=True)


def dominates(a: Fitness, b: Fitness) -> bool:
    """a dominates b under (minimize, minimize); feasible always beats
    infeasible."""
    if a.feasible != b.feasible:
        return a.feasible
    ao, bo = a.objectives(), b.objectives()
    return all(x <= y for x, y in zip(ao, bo)) and any(x < y for x, y in zip(ao, bo))


def nondominated_sort(population: list[Individual]) -> list[list[Individual]]:
    """Fast non-dominated sort; assigns ``rank`` on each individual."""
    n = len(population)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    dom_count = [0] * n
    for i in range(n):
        for j in range(i + 1, n):
            if dominates(population[i].fitness, population[j].fitness):
                dominated_by[i].append(j)
                dom_count[j] += 1
            elif dominates(population[j].fitness, population[i].fitness):
                dominated_by[j].append(i)
                dom_count[i] += 1
    fronts: list[list[Individual]] = []
    current = [i for i in range(n) if dom_count[i] == 0]
    rank = 0
    while current:
        for i in current:
            population[i].rank = rank
        fronts.append([population[i] for i in current])
        nxt = []
        for i in current:
            for j in dominated_by[i]:
                dom_count[j] -= 1
                if dom_count[j] == 0:
                    nxt.append(j)
        current = sorted(nxt)
        rank += 1
    return fronts


def crowding_distance(front: list[Individual]) -> list[float]:
    """NSGA-II crowding: boundary individuals per objective get infinity,
    interior ones the normalized neighbor-gap sum. Assigns ``crowding``."""
    if not front:
        raise ValueError("front must be non-empty")
    n = len(front)
    dist = [0.0] * n
    for obj in range(2):
        vals = [ind.fitness.objectives()[obj] for ind in front]
        order = sorted(range(n), key=lambda i: vals[i])
        dist[order[0]] = dist[order[-1]] = float("inf")
        span = vals[order[-1]] - vals[order[0]]
        if span > 0:
            for k in range(1, n - 1):
                dist[order[k]] += (vals[order[k + 1]] - vals[order[k - 1]]) / span
    for ind, d in zip(front, dist):
        ind.crowding = d
    return dist


def select_parents(population: list[Individual], count: int,
                   rng: np.random.Generator) -> list[Individual]:
    """Binary tournament on (rank, crowding)."""
    out = []
    n = len(population)
    for _ in range(count):
        i, j = int(rng.integers(n)), int(rng.integers(n))
        a, b = population[i], population[j]
        if a.rank != b.rank:
            out.append(a if a.rank < b.rank else b)
        elif a.crowding != b.crowding:
            out.append(a if a.crowding > b.crowding else b)
        else:
            out.append(a if rng.random() < 0.5 else b)
    return out


def _truncate(population: list[Individual], mu: int) -> list[Individual]:
    fronts = nondominated_sort(population)
    chosen: list[Individual] = []
    for front in fronts:
        crowding_distance(front)
        if len(chosen) + len(front) <= mu:
            chosen.extend(front)
        else:
            room = mu - len(chosen)
            order = sorted(range(len(front)),
                           key=lambda i: (-front[i].crowding, i))
            chosen.extend(front[i] for i in order[:room])
            break
    return chosen


def _evaluate_all(inds, problem, hierarchy, config, cache, jobs=1):
    todo = []
    for ind in inds:
        key = ind.ir.to_text()
        if key in cache:
            ind.fitness = cache[key]
        else:
            todo.append((key, ind))
    if jobs > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(
                lambda item: evaluate_fitness(item[1], problem, hierarchy, config),
                todo))
        for (key, ind), fit in zip(todo, results):
            ind.fitness = fit
            cache[key] = fit
    else:
        for key, ind in todo:
            fit = evaluate_fitness(ind, problem, hierarchy, config)
            ind.fitness = fit
            cache[key] = fit


@dataclass
class ParetoFront:
    """Rank-0 individuals, deduplicated by phenotype, sorted by increasing
    iteration count and named GP-<index>."""
    members: list[tuple[str, Individual]]

    @classmethod
    def from_population(cls, population: list[Individual]) -> "ParetoFront":
        fronts = nondominated_sort(list(population))
        seen = set()
        unique = []
        for ind in fronts[0]:
            key = ind.ir.to_text()
            if key not in seen:
                seen.add(key)
                unique.append(ind)
        unique.sort(key=lambda i: (i.fitness.iterations,
                                   i.fitness.time_per_iteration))
        return cls(members=[(f"GP-{k}", ind) for k, ind in enumerate(unique)])


def pareto_front(population: list[Individual]) -> ParetoFront:
    return ParetoFront.from_population(population)


def hypervolume(points: list[tuple[float, float]], ref: tuple[float, float]) -> float:
    """2D hypervolume of a minimization front w.r.t. a reference point."""
    pts = sorted({p for p in points if p[0] < ref[0] and p[1] < ref[1]})
    hv = 0.0
    prev_y = ref[1]
    for x, y in pts:
        if y < prev_y:
            hv += (ref[0] - x) * (prev_y - y)
            prev_y = y
    return hv


def evolve(config: EvolutionConfig, problem: ProblemInstance,
           setup_params: amg.SetupParams | None = None,
           hierarchy: amg.AmgHierarchy | None = None,
           jobs: int = 1):
    """Run the full loop; returns (final population, ParetoFront, history).

    history is a list of per-generation records with best/median objectives,
    the best feasible aggregate cost, and the current front. All randomness
    flows from ``config.rng_seed`` through a counter-based generator, so
    work-unit runs are reproducible bit for bit.
    """
    if hierarchy is None:
        hierarchy = amg.build_hierarchy(problem.matrix, setup_params,
                                        problem.row_partition)
    gram = grammar_mod.Grammar.for_hierarchy(hierarchy, n_flex=config.n_flex)
    rng = np.random.Generator(np.random.Philox(config.rng_seed))
    cache: dict[str, Fitness] = {}

    genos = grammar_mod.init_population(gram, config.mu, config.init_factor, rng)
    population = [Individual(genotype=g, ir=g.ir) for g in genos]
    _evaluate_all(population, problem, hierarchy, config, cache, jobs)
    population = _truncate(population, config.mu)

    history = [_record(0, population)]
    for gen in range(1, config.generations + 1):
        offspring: list[Individual] = []
        while len(offspring) < config.lam:
            r = rng.random()
            if r < config.crossover_prob:
                pa, pb = select_parents(population, 2, rng)
                child_g, _ = grammar_mod.crossover(pa.genotype, pb.genotype, rng)
            else:
                (pa,) = select_parents(population, 1, rng)
                child_g = grammar_mod.mutate(pa.genotype, rng)
            offspring.append(Individual(genotype=child_g, ir=child_g.ir))
        _evaluate_all(offspring, problem, hierarchy, config, cache, jobs)
        population = _truncate(population + offspring, config.mu)
        history.append(_record(gen, population))
    front = ParetoFront.from_population(population)
    return population, front, history


def _record(generation: int, population: list[Individual]) -> dict:
    feas = [i for i in population if i.fitness.feasible]
    objs = sorted(i.fitness.objectives() for i in feas)
    front = ParetoFront.from_population(population)
    rec = {
        "generation": generation,
        "n_feasible": len(feas),
        "best_aggregate": min((i.fitness.aggregate for i in feas), default=None),
        "best_time_per_iter": min((o[0] for o in objs), default=None),
        "best_iterations": min((o[1] for o in objs), default=None),
        "median_time_per_iter": float(np.median([o[0] for o in objs])) if objs else None,
        "median_iterations": float(np.median([o[1] for o in objs])) if objs else None,
        "front": [
            {"index": k, "name": name,
             "time_per_iter": ind.fitness.time_per_iteration,
             "iterations": ind.fitness.iterations,
             "ir_text": ind.ir.to_text()}
            for k, (name, ind) in enumerate(front.members)
            if ind.fitness.feasible
        ],
    }
    return rec
