"""Genetic-programming search for a tree whose landscape encodes to a target latent point.

Each slot of the population draws its own tournament parent, produces one
offspring by roulette reproduction, evaluates it at every local-search
dimension and keeps it only if it is no worse than the slot's incumbent.
Fitness of a (tree, dim) pair is a pure function: the ELA seed is derived from
the search seed, target id, tree hash and dim.
"""
from __future__ import annotations

import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import symbolic as sym
from .ela import ELAConfig, ELAVector, compute_ela
from .errors import ConfigurationError, ParameterError
from .seeding import derive_seed
from .symbolic import ExprTree, Op

log = logging.getLogger(__name__)

OPERATORS = ("crossover", "subtree", "point", "hoist", "reproduce")
MAX_RETRIES = 5


@dataclass(frozen=True)
class GPConfig:
    pop_size: int = 1000
    generations: int = 50
    tournament_size: int = 50
    stopping_criteria: float | None = 1e-2  # None disables early stopping
    p_crossover: float = 0.6
    p_subtree_mutation: float = 0.25
    p_point_mutation: float = 0.1
    p_hoist_mutation: float = 0.04
    p_reproduce: float = 0.01
    init_depth: tuple = (5, 8)
    mutate_depth: tuple = (5, 15)
    max_depth: int = 15
    eval_workers: int = 10
    local_search_dims: tuple = (2, 5, 10)
    local_search_enabled: bool = True
    seed: int = 0
    generational: bool = False  # ablation: replace the whole population each generation
    ela: ELAConfig = field(default_factory=ELAConfig)

    def __post_init__(self):
        object.__setattr__(self, "init_depth", tuple(self.init_depth))
        object.__setattr__(self, "mutate_depth", tuple(self.mutate_depth))
        object.__setattr__(self, "local_search_dims", tuple(int(d) for d in self.local_search_dims))
        if abs(sum(self.probabilities) - 1.0) > 1e-9 or min(self.probabilities) < 0:
            raise ParameterError(f"reproduction probabilities must be >= 0 and sum to 1, got {self.probabilities}")
        if self.pop_size < self.tournament_size or self.tournament_size < 1:
            raise ParameterError("need pop_size >= tournament_size >= 1")
        if self.generations < 0:
            raise ParameterError("generations must be >= 0")
        if not 1 <= self.max_depth <= sym.MAX_DEPTH:
            raise ParameterError(f"max_depth must be in [1, {sym.MAX_DEPTH}]")
        for lo, hi in (self.init_depth, self.mutate_depth):
            if not 1 <= lo <= hi <= self.max_depth:
                raise ParameterError(f"depth range ({lo}, {hi}) outside [1, {self.max_depth}]")
        if not self.local_search_dims or min(self.local_search_dims) < 2:
            raise ParameterError("local_search_dims must be non-empty with dims >= 2")
        if self.eval_workers < 1:
            raise ParameterError("eval_workers must be >= 1")

    @property
    def probabilities(self):
        return (
            self.p_crossover,
            self.p_subtree_mutation,
            self.p_point_mutation,
            self.p_hoist_mutation,
            self.p_reproduce,
        )

    @property
    def search_dims(self):
        return self.local_search_dims if self.local_search_enabled else self.local_search_dims[:1]

    def to_json(self):
        d = asdict(self)
        d["ela"] = asdict(self.ela)
        return d

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        d["ela"] = ELAConfig(**d.get("ela", {}))
        return cls(**d)


@dataclass(frozen=True)
class SearchTarget:
    h: tuple
    target_id: int = 0

    def __post_init__(self):
        h = tuple(float(v) for v in self.h)
        if len(h) != 2 or not all(math.isfinite(v) for v in h):
            raise ParameterError(f"target must be a finite 2-vector, got {self.h}")
        object.__setattr__(self, "h", h)


@dataclass
class Individual:
    tree: ExprTree
    dim: int
    objective: float
    ela: ELAVector | None = None

    @property
    def size(self):
        return len(self.tree)


def _require_trained(model):
    if not getattr(model, "trained", False) or model.normalizer is None:
        raise ConfigurationError("the autoencoder model is not trained")


def ela_seed(search_seed, target_id, tree: ExprTree, dim) -> int:
    return derive_seed(search_seed, target_id, tree.hash(), dim)


def latent_distance(z, h) -> float:
    return 0.5 * float(np.linalg.norm(np.asarray(z, dtype=float) - np.asarray(h, dtype=float)))


def evaluate_tree(tree: ExprTree, dim: int, target: SearchTarget, model, ela_config: ELAConfig, seed: int = 0):
    """``(objective, ELAVector)``; invalid landscapes give ``+inf``."""
    cfg = replace(ela_config, seed=ela_seed(seed, target.target_id, tree, dim))
    e = compute_ela(sym.SymbolicProblem(tree, dim), cfg)
    if not e.valid:
        return math.inf, e
    return latent_distance(model.encode(e), target.h), e


def objective(tree: ExprTree, dim: int, target: SearchTarget, model, ela_config: ELAConfig, seed: int = 0) -> float:
    _require_trained(model)
    if dim < 2:
        raise ParameterError("dim must be >= 2")
    return evaluate_tree(tree, dim, target, model, ela_config, seed)[0]


# -- selection and variation --------------------------------------------------


def _better(a: Individual, ia: int, b: Individual, ib: int) -> bool:
    return (a.objective, a.size, ia) < (b.objective, b.size, ib)


def tournament_index(population, k: int, rng, full_enumeration: bool = False) -> int:
    if not population:
        raise ParameterError("empty population")
    picks = range(len(population)) if full_enumeration else rng.integers(len(population), size=k)
    best = None
    for i in picks:
        i = int(i)
        if best is None or _better(population[i], i, population[best], best):
            best = i
    return best


def tournament_select(population, k: int, rng, full_enumeration: bool = False) -> Individual:
    """Min objective of k draws with replacement; ties: fewer nodes, then lower index."""
    return population[tournament_index(population, k, rng, full_enumeration)]


def _same_arity_symbol(node, rng):
    if not isinstance(node, Op):
        while True:
            new = sym.random_operand(rng)
            if new != node:
                return new
    if node.arity == 1:
        pool = [Op(n, 1) for n in sym.UNARY + sym.AGGREGATES]
    else:
        pool = [Op(n, 2) for n in sym.BINARY + sym.AGGREGATES]
    others = [p for p in pool if p != node]
    return others[int(rng.integers(len(others)))]


def _point_mutation(tree: ExprTree, rng) -> ExprTree:
    i = int(rng.integers(len(tree)))
    nodes = list(tree.nodes)
    nodes[i] = _same_arity_symbol(nodes[i], rng)
    return ExprTree(tuple(nodes))


def _subtree_mutation(tree: ExprTree, config: GPConfig, rng) -> ExprTree:
    i = int(rng.integers(len(tree)))
    room = config.max_depth - tree.node_depth(i) + 1
    lo, hi = config.mutate_depth
    hi = max(1, min(hi, room))
    lo = min(lo, hi)
    return tree.replace(i, sym.random_tree((lo, hi), rng))


def _crossover(tree: ExprTree, donor: ExprTree, rng) -> ExprTree:
    i = int(rng.integers(len(tree)))
    j = int(rng.integers(len(donor)))
    return tree.replace(i, donor.subtree(j))


def _hoist(tree: ExprTree, rng) -> ExprTree:
    i = int(rng.integers(len(tree)))
    sub = tree.subtree(i)
    j = int(rng.integers(len(sub)))
    return tree.replace(i, sub.subtree(j))


def roulette_reproduction(parent: ExprTree, config: GPConfig, rng, donor=None):
    """One offspring and the name of the operator drawn.

    ``donor`` is a tree or a zero-argument callable returning one (a second
    tournament winner); it is only consulted for crossover.
    """
    op = OPERATORS[int(rng.choice(len(OPERATORS), p=config.probabilities))]
    if op == "reproduce":
        return parent, op
    if op == "crossover":
        donor_tree = donor() if callable(donor) else (donor if donor is not None else parent)
    for _ in range(MAX_RETRIES):
        if op == "crossover":
            child = _crossover(parent, donor_tree, rng)
        elif op == "subtree":
            child = _subtree_mutation(parent, config, rng)
        elif op == "point":
            child = _point_mutation(parent, rng)
        else:
            child = _hoist(parent, rng)
        # variable-free children are as useless as oversize ones
        if child.depth <= config.max_depth and child.has_variable():
            return child, op
    return parent, op


# -- evaluation -----------------------------------------------------------------

_WORKER = {}


def _worker_init(model, target, ela_config, seed):
    _WORKER.update(model=model, target=target, ela=ela_config, seed=seed)


def _worker_eval(job):
    text, dim = job
    w = _WORKER
    obj, e = evaluate_tree(sym.parse(text), dim, w["target"], w["model"], w["ela"], w["seed"])
    return obj, e.values, e.valid, e.error


class Evaluator:
    """Cached (tree, dim) fitness with a logical evaluation counter and optional pool."""

    def __init__(self, target, model, config: GPConfig, seed: int, workers: int | None = None):
        self.target, self.model, self.config, self.seed = target, model, config, seed
        self.cache = {}
        self.evaluations = 0
        self.workers = config.eval_workers if workers is None else workers
        self._pool = None

    def __enter__(self):
        if self.workers > 1:
            self._pool = ProcessPoolExecutor(
                self.workers,
                initializer=_worker_init,
                initargs=(self.model, self.target, self.config.ela, self.seed),
            )
        return self

    def __exit__(self, *exc):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _fill(self, keys):
        todo = [k for k in dict.fromkeys(keys) if k not in self.cache]
        if not todo:
            return
        if self._pool is not None:
            chunk = max(1, len(todo) // (4 * self.workers))
            for k, (obj, vals, ok, err) in zip(todo, self._pool.map(_worker_eval, todo, chunksize=chunk)):
                self.cache[k] = (obj, ELAVector(vals, ok, err))
        else:
            for k in todo:
                self.cache[k] = evaluate_tree(
                    sym.parse(k[0]), k[1], self.target, self.model, self.config.ela, self.seed
                )

    def local_search(self, trees):
        """Best dimension per tree (ties to the smaller dim), results in input order."""
        dims = sorted(self.config.search_dims)
        texts = [sym.serialize(t) for t in trees]
        self._fill([(s, d) for s in texts for d in dims])
        out = []
        for tree, text in zip(trees, texts):
            best = None
            for d in dims:
                self.evaluations += 1
                obj, e = self.cache[(text, d)]
                if best is None or obj < best.objective:
                    best = Individual(tree, d, obj, e)
            out.append(best)
        return out


def cross_dimension_local_search(tree: ExprTree, target: SearchTarget, model, config: GPConfig, seed=None) -> Individual:
    _require_trained(model)
    ev = Evaluator(target, model, config, config.seed if seed is None else seed, workers=1)
    return ev.local_search([tree])[0]


# -- search ---------------------------------------------------------------------


@dataclass
class SearchResult:
    target: SearchTarget
    best: Individual
    trace: list  # best objective after initialization, then after each generation
    evaluations_used: int
    wall_time: float
    generations_run: int
    stopped_early: bool

    def to_json(self):
        return {
            "target_id": self.target.target_id,
            "h": list(self.target.h),
            "best_tree": sym.serialize(self.best.tree),
            "best_dim": self.best.dim,
            "best_objective": _num(self.best.objective),
            "trace": [_num(v) for v in self.trace],
            "evaluations_used": self.evaluations_used,
            "wall_time": self.wall_time,
            "generations_run": self.generations_run,
            "stopped_early": self.stopped_early,
        }


def _num(v):
    return float(v) if math.isfinite(v) else None


def _best_index(pop):
    best = 0
    for i in range(1, len(pop)):
        if _better(pop[i], i, pop[best], best):
            best = i
    return best


def _save_checkpoint(path, gen, pop, trace, rng, evaluations, best_ever):
    state = {
        "generation": gen,
        "population": [[sym.serialize(p.tree), p.dim] for p in pop],
        "best_ever": [sym.serialize(best_ever.tree), best_ever.dim],
        "trace": [_num(v) for v in trace],
        "rng": rng.bit_generator.state,
        "evaluations": evaluations,
    }
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(state, fh)
    os.replace(tmp, path)


def _reached(obj, config):
    return config.stopping_criteria is not None and obj <= config.stopping_criteria


def gp_search(target: SearchTarget, model, config: GPConfig, progress=None, checkpoint=None, workers=None) -> SearchResult:
    """Run the search; ``checkpoint`` is a file path written every generation and resumed from."""
    _require_trained(model)
    t0 = time.perf_counter()
    rng = np.random.default_rng(derive_seed(config.seed, "gp"))
    N, k = config.pop_size, config.tournament_size

    with Evaluator(target, model, config, config.seed, workers) as ev:

        def rebuild(records):
            # re-evaluating restores the cached ELA; the logical counter is reset below
            return [ev.local_search([sym.parse(t)])[0] for t, _ in records]

        start = 1
        if checkpoint and os.path.exists(checkpoint):
            with open(checkpoint) as fh:
                state = json.load(fh)
            pop = rebuild(state["population"])
            best_ever = rebuild([state["best_ever"]])[0]
            trace = [math.inf if v is None else v for v in state["trace"]]
            rng.bit_generator.state = state["rng"]
            ev.evaluations = state["evaluations"]
            start = state["generation"] + 1
            log.info("target %s resumed at gen %d", target.target_id, start)
        else:
            pop = ev.local_search([sym.random_tree(config.init_depth, rng) for _ in range(N)])
            best_ever = pop[_best_index(pop)]
            trace = [best_ever.objective]
            _report(progress, target, 0, trace[-1])

        stopped = _reached(trace[-1], config)
        for gen in range(start, config.generations + 1):
            if stopped:
                break
            children = []
            for i in range(N):
                parent = tournament_select(pop, k, rng).tree
                child, _ = roulette_reproduction(
                    parent, config, rng, donor=lambda: tournament_select(pop, k, rng).tree
                )
                children.append(child)
            offspring = ev.local_search(children)
            if config.generational:
                pop = offspring
            else:
                pop = [c if c.objective <= p.objective else p for c, p in zip(offspring, pop)]
            cand = pop[_best_index(pop)]
            if cand.objective < best_ever.objective:
                best_ever = cand
            trace.append(best_ever.objective)
            _report(progress, target, gen, trace[-1])
            if checkpoint:
                _save_checkpoint(checkpoint, gen, pop, trace, rng, ev.evaluations, best_ever)
            stopped = _reached(trace[-1], config)

        if not config.generational:
            best_ever = pop[_best_index(pop)]
        return SearchResult(
            target=target,
            best=best_ever,
            trace=trace,
            evaluations_used=ev.evaluations,
            wall_time=time.perf_counter() - t0,
            generations_run=len(trace) - 1,
            stopped_early=stopped and len(trace) - 1 < config.generations,
        )


def _report(progress, target, gen, best):
    line = f"target {target.target_id} gen {gen} best {best:.6g}"
    log.info(line)
    if progress is not None:
        progress(line)
