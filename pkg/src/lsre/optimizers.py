"""Black-box optimizer pool: DE (rand/1/bin), global-best PSO, CMA-ES, sep-CMA-ES.

Every optimizer sees the problem only through batched evaluation on
[-5, 5]^d.  Points are clamped to the box before evaluation, and a shared
``_Tracker`` does the bookkeeping (budget, best-so-far history, stagnation).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

LOWER, UPPER = -5.0, 5.0
STAGNATION_TOL = 1e-12
EIG_FLOOR = 1e-20

CSV_FIELDS = ("instance_id", "optimizer", "run_id", "seed", "best_value", "evaluations_used")


@dataclass
class RunResult:
    best_value: float
    best_point: np.ndarray
    history: list  # (evaluations_used, best_so_far) after every evaluated batch
    evaluations_used: int
    seed: int

    def csv_row(self, instance_id, optimizer, run_id) -> dict:
        return {
            "instance_id": instance_id,
            "optimizer": optimizer,
            "run_id": run_id,
            "seed": self.seed,
            "best_value": repr(float(self.best_value)),
            "evaluations_used": self.evaluations_used,
        }


class _Tracker:
    def __init__(self, problem, dim, budget, stagnation):
        self.problem = problem
        self.dim = dim
        self.budget = budget
        self.used = 0
        self.best = math.inf
        self.best_x = None
        self.history = []
        self.stagnation = stagnation
        self._ref = math.inf
        self._ref_at = 0

    @property
    def remaining(self):
        return self.budget - self.used

    def __call__(self, X):
        X = np.clip(X, LOWER, UPPER)
        y = np.asarray(self.problem(X), dtype=float).reshape(-1)
        y = np.where(np.isnan(y), np.inf, y)
        self.used += len(X)
        k = int(np.argmin(y))
        if y[k] < self.best:
            self.best, self.best_x = float(y[k]), X[k].copy()
        if self.best < self._ref - STAGNATION_TOL or self.best_x is None:
            self._ref, self._ref_at = self.best, self.used
        self.history.append((self.used, self.best))
        return y

    def done(self, batch):
        if self.remaining < batch:
            return True
        return self.stagnation and self.used - self._ref_at >= 50 * self.dim

    def result(self, seed):
        x = self.best_x if self.best_x is not None else np.zeros(self.dim)
        return RunResult(self.best, x, self.history, self.used, seed)


def de(f: _Tracker, rng, pop_size=50, F=0.5, CR=0.9):
    d = f.dim
    pop = rng.uniform(LOWER, UPPER, (pop_size, d))
    fit = f(pop)
    idx = np.arange(pop_size)
    while not f.done(1):
        n = min(pop_size, f.remaining)
        # r1, r2, r3 distinct and different from the target index
        r = np.argsort(rng.random((pop_size, pop_size - 1)), axis=1)[:, :3]
        r += r >= idx[:, None]
        mutant = pop[r[:, 0]] + F * (pop[r[:, 1]] - pop[r[:, 2]])
        cross = rng.random((pop_size, d)) < CR
        cross[idx, rng.integers(d, size=pop_size)] = True
        trial = np.clip(np.where(cross, mutant, pop), LOWER, UPPER)[:n]
        ft = f(trial)
        better = ft <= fit[:n]
        pop[:n][better] = trial[better]
        fit[:n][better] = ft[better]


def pso(f: _Tracker, rng, n_particles=50, w=0.729, c1=1.49445, c2=1.49445):
    d = f.dim
    vmax = 0.5 * (UPPER - LOWER)
    x = rng.uniform(LOWER, UPPER, (n_particles, d))
    v = rng.uniform(-vmax, vmax, (n_particles, d))
    fx = f(x)
    pbest, pfit = x.copy(), fx.copy()
    while not f.done(1):
        n = min(n_particles, f.remaining)
        g = pbest[np.argmin(pfit)]
        r1, r2 = rng.random((n_particles, d)), rng.random((n_particles, d))
        v = np.clip(w * v + c1 * r1 * (pbest - x) + c2 * r2 * (g - x), -vmax, vmax)
        x = np.clip(x + v, LOWER, UPPER)
        fx = f(x[:n])
        imp = fx < pfit[:n]
        pbest[:n][imp] = x[:n][imp]
        pfit[:n][imp] = fx[imp]


def cma_es(f: _Tracker, rng, sigma0=2.0, separable=False):
    n = f.dim
    lam = 4 + int(3 * math.log(n))
    mu = lam // 2
    w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mueff = 1.0 / np.sum(w**2)
    cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
    cs = (mueff + 2) / (n + mueff + 5)
    c1 = 2 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1 - c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
    if separable:
        # diagonal model learns faster (Ros & Hansen 2008)
        c1, cmu = min(1.0, c1 * (n + 2) / 3), min(1 - c1 * (n + 2) / 3, cmu * (n + 2) / 3)
        cmu = max(cmu, 0.0)
    damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + cs
    chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

    mean = rng.uniform(LOWER, UPPER, n)
    sigma = sigma0
    pc, ps = np.zeros(n), np.zeros(n)
    C = np.ones(n) if separable else np.eye(n)
    B, D = np.eye(n), np.ones(n)
    gen = 0
    while not f.done(lam):
        gen += 1
        z = rng.standard_normal((lam, n))
        y = z * D if separable else (z * D) @ B.T
        x = np.clip(mean + sigma * y, LOWER, UPPER)
        fx = f(x)
        order = np.argsort(fx, kind="stable")[:mu]
        # steps are recomputed from the clamped points
        ysel = (x[order] - mean) / sigma
        ymean = w @ ysel
        mean = mean + sigma * ymean

        invsqrt_y = ymean / D if separable else B @ ((B.T @ ymean) / D)
        ps = (1 - cs) * ps + math.sqrt(cs * (2 - cs) * mueff) * invsqrt_y
        hsig = np.linalg.norm(ps) / math.sqrt(1 - (1 - cs) ** (2 * gen)) / chi_n < 1.4 + 2 / (n + 1)
        pc = (1 - cc) * pc + hsig * math.sqrt(cc * (2 - cc) * mueff) * ymean
        dh = (1 - hsig) * cc * (2 - cc)
        if separable:
            C = (1 - c1 - cmu) * C + c1 * (pc**2 + dh * C) + cmu * (w @ ysel**2)
            C = np.maximum(C, EIG_FLOOR)
            D = np.sqrt(C)
        else:
            C = (1 - c1 - cmu) * C + c1 * (np.outer(pc, pc) + dh * C) + cmu * (ysel.T * w) @ ysel
            C = 0.5 * (C + C.T)
            evals, B = np.linalg.eigh(C)
            if evals.min() < EIG_FLOOR:
                evals = np.maximum(evals, EIG_FLOOR)
                C = (B * evals) @ B.T
            D = np.sqrt(evals)
        sigma *= math.exp(min(1.0, (cs / damps) * (np.linalg.norm(ps) / chi_n - 1)))
        if not np.isfinite(sigma) or sigma * D.max() < 1e-300:
            break


def sep_cma_es(f, rng, sigma0=2.0):
    cma_es(f, rng, sigma0, separable=True)


def _cma_lambda(d):
    return 4 + int(3 * math.log(d))


@dataclass
class OptimizerSpec:
    name: str
    fn: object
    min_budget: object  # dim -> first-batch size
    options: dict = field(default_factory=dict)


REGISTRY: dict[str, OptimizerSpec] = {}


def register(name, fn, min_budget):
    """Add an optimizer; ``fn(tracker, rng)`` must only evaluate through the tracker."""
    REGISTRY[name] = OptimizerSpec(name, fn, min_budget)


register("DE", de, lambda d: 50)
register("PSO", pso, lambda d: 50)
register("CMAES", cma_es, _cma_lambda)
register("SEP_CMAES", sep_cma_es, _cma_lambda)

DEFAULT_POOL = ("DE", "PSO", "CMAES", "SEP_CMAES")


def run(opt: str, instance, budget_evals: int, seed: int, stagnation: bool = True) -> RunResult:
    """Minimize ``instance`` (batched callable with ``.dim``) within ``budget_evals``."""
    if opt not in REGISTRY:
        raise ParameterError(f"unknown optimizer {opt!r}; known: {sorted(REGISTRY)}")
    spec = REGISTRY[opt]
    d = int(instance.dim)
    need = spec.min_budget(d)
    if budget_evals < need:
        raise ParameterError(f"{opt} needs a budget of at least {need} evaluations at d={d}")
    tracker = _Tracker(instance, d, int(budget_evals), stagnation)
    spec.fn(tracker, np.random.default_rng(seed))
    return tracker.result(seed)
