"""Average success rate distribution (ASRD) over an instance set and an optimizer pool.

Two passes: every (instance, optimizer, run) job runs first and only records its
best value; success is decided afterwards against a per-instance reference so
that the reference can depend on all runs.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import optimizers
from .errors import ParameterError

log = logging.getLogger(__name__)

PROTOCOL = (
    "success: |best - f_ref| <= tol * (1 + |f_ref|); f_ref is the known optimum value when "
    "the instance exposes one inside the box, otherwise the best value seen over all runs "
    "of all pool optimizers on that instance"
)


def run_seed(rid: int) -> int:
    return 100 * (rid + 2)


@dataclass(frozen=True)
class ASRDConfig:
    runs_per_pair: int = 51
    budget_multiplier: float = 1e3
    success_tolerance: float = 1e-8
    histogram_bins: int = 10
    stagnation: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.runs_per_pair < 1:
            raise ParameterError("runs_per_pair must be >= 1")
        if self.histogram_bins < 2:
            raise ParameterError("histogram_bins must be >= 2")
        if self.success_tolerance < 0 or self.budget_multiplier <= 0:
            raise ParameterError("tolerance must be >= 0 and budget multiplier > 0")

    def budget(self, dim: int) -> int:
        return int(round(self.budget_multiplier * dim))


@dataclass
class ASRDReport:
    instance_ids: list
    pool: list
    success_rates: np.ndarray  # N x M
    histogram: np.ndarray
    bin_edges: np.ndarray
    reference_values: list  # (value, kind) per instance
    best_values: np.ndarray  # N x M x R, kept for re-thresholding
    config: ASRDConfig
    evaluations: np.ndarray | None = None

    @property
    def instance_marginal(self):
        return self.success_rates.mean(axis=1)

    @property
    def optimizer_marginal(self):
        return self.success_rates.mean(axis=0)

    def nonempty_bins(self) -> int:
        return int(np.count_nonzero(self.histogram))

    def to_json(self) -> dict:
        return {
            "protocol": PROTOCOL,
            "config": asdict(self.config),
            "instances": list(self.instance_ids),
            "pool": list(self.pool),
            "matrix": self.success_rates.tolist(),
            "histogram": {
                "edges": self.bin_edges.tolist(),
                "counts": self.histogram.astype(int).tolist(),
            },
            "marginals": {
                "per_instance": self.instance_marginal.tolist(),
                "per_optimizer": dict(zip(self.pool, self.optimizer_marginal.tolist())),
            },
            "reference_values": [
                {"value": v if math.isfinite(v) else None, "kind": k} for v, k in self.reference_values
            ],
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)


def _job(args):
    problem, opt, budget, rid, stagnation = args
    res = optimizers.run(opt, problem, budget, run_seed(rid), stagnation=stagnation)
    return res.best_value, res.evaluations_used


def _known_optimum(problem):
    opt = getattr(problem, "optimum", None)
    found = opt() if callable(opt) else None
    return None if found is None else float(found[1])


def histogram(rates, bins: int):
    edges = np.linspace(0.0, 1.0, bins + 1)
    counts, _ = np.histogram(np.asarray(rates, dtype=float).ravel(), bins=edges)
    return counts, edges


def resolve(best_values, problems, pool, config: ASRDConfig, instance_ids) -> ASRDReport:
    """Second pass: references and success rates from already collected best values."""
    N, M, R = best_values.shape
    rates = np.zeros((N, M))
    refs = []
    for i, p in enumerate(problems):
        known = _known_optimum(p)
        if known is not None:
            ref, kind = known, "known"
        else:
            ref, kind = float(np.min(best_values[i])), "relative_best"
        refs.append((ref, kind))
        if not math.isfinite(ref):
            continue  # nothing ever evaluated finitely: no run counts as success
        tol = config.success_tolerance * (1.0 + abs(ref))
        ok = np.abs(best_values[i] - ref) <= tol
        rates[i] = ok.sum(axis=1) / R
    counts, edges = histogram(rates, config.histogram_bins)
    return ASRDReport(list(instance_ids), list(pool), rates, counts, edges, refs, best_values, config)


def asrd(benchmark, pool=optimizers.DEFAULT_POOL, config: ASRDConfig = ASRDConfig(), instance_ids=None):
    """``benchmark``: sequence of problems (batched callables with ``.dim``)."""
    benchmark, pool = list(benchmark), list(pool)
    if not benchmark or not pool:
        raise ParameterError("benchmark and pool must be non-empty")
    ids = list(instance_ids) if instance_ids is not None else list(range(len(benchmark)))
    R = config.runs_per_pair
    jobs = [
        (p, opt, config.budget(p.dim), rid, config.stagnation)
        for p in benchmark
        for opt in pool
        for rid in range(R)
    ]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as ex:
            values = list(ex.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))
    else:
        values = [_job(j) for j in jobs]
    shape = (len(benchmark), len(pool), R)
    best = np.array([v for v, _ in values], dtype=float).reshape(shape)
    log.info("asrd: %d runs done", len(jobs))
    report = resolve(best, benchmark, pool, config, ids)
    report.evaluations = np.array([n for _, n in values], dtype=int).reshape(shape)
    return report


def success_rate(instance, opt, config: ASRDConfig = ASRDConfig(), pool=None) -> float:
    """Success rate of one optimizer; the relative reference uses the whole ``pool``."""
    pool = list(pool or [opt])
    if opt not in pool:
        pool.append(opt)
    rep = asrd([instance], pool, config)
    return float(rep.success_rates[0, pool.index(opt)])


def write_histogram_csv(report: ASRDReport, path):
    total = report.histogram.sum()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_low", "bin_high", "count", "fraction"])
        for lo, hi, c in zip(report.bin_edges[:-1], report.bin_edges[1:], report.histogram):
            w.writerow([f"{lo:.6g}", f"{hi:.6g}", int(c), repr(float(c / total))])


def render_histogram(report: ASRDReport, path_prefix, label="benchmark"):
    """Write ``<prefix>.csv`` and ``<prefix>.svg``."""
    from .plotting import histogram_svg

    write_histogram_csv(report, f"{path_prefix}.csv")
    histogram_svg(report, f"{path_prefix}.svg", label)


def write_runs_csv(report: ASRDReport, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=optimizers.CSV_FIELDS)
        w.writeheader()
        for i, iid in enumerate(report.instance_ids):
            for j, opt in enumerate(report.pool):
                for rid, v in enumerate(report.best_values[i, j]):
                    w.writerow({
                        "instance_id": iid, "optimizer": opt, "run_id": rid,
                        "seed": run_seed(rid), "best_value": repr(float(v)),
                        "evaluations_used": (
                            "" if report.evaluations is None else int(report.evaluations[i, j, rid])
                        ),
                    })
