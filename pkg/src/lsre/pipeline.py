"""Grid-sampled latent targets -> one GP search each -> a generated problem set."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__, symbolic as sym
from .errors import ConfigurationError, LSREError, ParameterError, ProblemSetImportError
from .gp import GPConfig, SearchTarget, _require_trained, gp_search
from .seeding import derive_seed

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class GridSpec:
    B: float = 1.0
    K: int = 16

    def __post_init__(self):
        if not self.B > 0 or self.K < 1:
            raise ParameterError(f"grid needs B > 0 and K >= 1, got B={self.B}, K={self.K}")

    def axis(self):
        return np.zeros(1) if self.K == 1 else np.linspace(-self.B, self.B, self.K)


def grid_targets(spec: GridSpec) -> list[SearchTarget]:
    """K x K latent points, endpoints included, row-major ids."""
    ax = spec.axis()
    return [
        SearchTarget((float(a), float(b)), i * spec.K + j)
        for i, a in enumerate(ax)
        for j, b in enumerate(ax)
    ]


def target_seed(gp_seed: int, target_id: int) -> int:
    return derive_seed(gp_seed, target_id)


@dataclass
class GeneratedInstance:
    target_id: int
    h: tuple
    tree: str
    dim: int
    objective: float
    provenance: dict
    failed: bool = False

    def expr(self):
        return sym.parse(self.tree)

    def problem(self):
        return sym.SymbolicProblem(self.expr(), self.dim)

    def to_json(self):
        return {
            "target_id": self.target_id,
            "h": list(self.h),
            "tree": self.tree,
            "dim": self.dim,
            "objective": self.objective if math.isfinite(self.objective) else None,
            "provenance": self.provenance,
            "failed": self.failed,
        }

    @classmethod
    def from_json(cls, d):
        obj = d["objective"]
        return cls(
            int(d["target_id"]),
            tuple(float(v) for v in d["h"]),
            str(d["tree"]),
            int(d["dim"]),
            math.inf if obj is None else float(obj),
            dict(d["provenance"]),
            bool(d.get("failed", False)),
        )


@dataclass
class ProblemSet:
    instances: list
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.instances)

    def to_json(self):
        return {
            "schema": SCHEMA_VERSION,
            "metadata": self.metadata,
            "instances": [g.to_json() for g in self.instances],
        }

    def content(self):
        """JSON form without the generation timestamp (for replay comparisons)."""
        d = self.to_json()
        d["metadata"] = {k: v for k, v in d["metadata"].items() if k != "generated_at"}
        return d


def config_hash(config: GPConfig) -> str:
    """Hash of the settings that affect results; worker counts are left out."""
    d = config.to_json()
    d.pop("eval_workers")
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _target_file(out_dir, target_id):
    return os.path.join(out_dir, "targets", f"target_{target_id:04d}.json")


def _search_job(args):
    target, model, config, out_dir, workers = args
    seed = target_seed(config.seed, target.target_id)
    ckpt = None
    if out_dir:
        os.makedirs(os.path.join(out_dir, "checkpoints"), exist_ok=True)
        ckpt = os.path.join(out_dir, "checkpoints", f"target_{target.target_id:04d}.ckpt.json")
    cfg = replace(config, seed=seed)
    res = gp_search(target, model, cfg, checkpoint=ckpt, workers=workers)
    attempts = [res.to_json()]
    failed = not math.isfinite(res.best.objective)
    if failed:
        # one retry with a reseeded population
        seed = derive_seed(config.seed, target.target_id, "retry")
        cfg = replace(config, seed=seed)
        ckpt2 = ckpt and ckpt.replace(".ckpt.json", ".retry.ckpt.json")
        res = gp_search(target, model, cfg, checkpoint=ckpt2, workers=workers)
        attempts.append(res.to_json())
        failed = not math.isfinite(res.best.objective)
    inst = GeneratedInstance(
        target.target_id,
        target.h,
        sym.serialize(res.best.tree),
        res.best.dim,
        res.best.objective,
        {"config_hash": config_hash(config), "model_hash": model.fingerprint(), "seed": seed},
        failed,
    )
    record = {"instance": inst.to_json(), "searches": attempts}
    if out_dir:
        path = _target_file(out_dir, target.target_id)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path + ".tmp", "w") as fh:
            json.dump(record, fh, indent=1, sort_keys=True)
        os.replace(path + ".tmp", path)
    return record


def generate(spec: GridSpec, model, gp_config: GPConfig, parallel_searches: int = 1, out_dir=None, resume=False) -> ProblemSet:
    """One search per grid target; with ``out_dir`` and ``resume`` finished targets are reused."""
    try:
        _require_trained(model)
    except LSREError as exc:
        raise ConfigurationError(str(exc)) from exc
    if parallel_searches < 1:
        raise ParameterError("parallel_searches must be >= 1")
    targets = grid_targets(spec)
    records = {}
    if out_dir and resume:
        for t in targets:
            path = _target_file(out_dir, t.target_id)
            if os.path.exists(path):
                with open(path) as fh:
                    records[t.target_id] = json.load(fh)
        log.info("resume: %d of %d targets already done", len(records), len(targets))
    todo = [t for t in targets if t.target_id not in records]
    # inside an outer worker the inner pool would oversubscribe a small machine
    inner = gp_config.eval_workers
    jobs = [(t, model, gp_config, out_dir, inner) for t in todo]
    if parallel_searches > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(parallel_searches) as ex:
            done = list(ex.map(_search_job, jobs))
    else:
        done = [_search_job(j) for j in jobs]
    for t, rec in zip(todo, done):
        records[t.target_id] = rec
    instances = [GeneratedInstance.from_json(records[t.target_id]["instance"]) for t in targets]
    meta = {
        "grid": {"B": spec.B, "K": spec.K},
        "local_search_dims": list(gp_config.search_dims),
        "config_hash": config_hash(gp_config),
        "model_hash": model.fingerprint(),
        "generated_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "versions": {"lsre": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "failed_targets": [g.target_id for g in instances if g.failed],
    }
    return ProblemSet(instances, meta)


def export_problemset(ps: ProblemSet, path):
    with open(path, "w") as fh:
        json.dump(ps.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def _check_instance(g: GeneratedInstance, spec: GridSpec, dims, n_points=100):
    tid = g.target_id
    ax = spec.axis()
    i, j = divmod(tid, spec.K)
    if not np.allclose(g.h, (ax[i], ax[j]), rtol=0, atol=1e-12):
        raise ProblemSetImportError(f"latent point {g.h} does not match the grid", tid)
    if dims and g.dim not in dims:
        raise ProblemSetImportError(f"dim {g.dim} not among {dims}", tid)
    try:
        tree = sym.parse(g.tree)
        sym.validate(tree)
        X = np.random.default_rng(derive_seed("import", tid)).uniform(-5, 5, (n_points, g.dim))
        y = sym.eval_batch(tree, X)
    except LSREError as exc:
        raise ProblemSetImportError(f"bad tree: {exc}", tid) from exc
    if not np.all(np.isfinite(y)):
        raise ProblemSetImportError("tree evaluates to non-finite values", tid)
    if not (g.objective >= 0):
        raise ProblemSetImportError(f"objective {g.objective} is negative", tid)


def import_problemset(path) -> ProblemSet:
    """Load and validate; every tree is re-parsed and re-evaluated at 100 points."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ProblemSetImportError(f"cannot read {path}: {exc}") from exc
    try:
        meta = raw["metadata"]
        spec = GridSpec(float(meta["grid"]["B"]), int(meta["grid"]["K"]))
        dims = [int(d) for d in meta.get("local_search_dims", [])]
        records = raw["instances"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ProblemSetImportError(f"schema violation: {exc!r}") from exc
    if len(records) != spec.K**2:
        raise ProblemSetImportError(f"expected {spec.K ** 2} instances, found {len(records)}")
    instances = []
    for pos, rec in enumerate(records):
        tid = rec.get("target_id") if isinstance(rec, dict) else None
        try:
            g = GeneratedInstance.from_json(rec)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProblemSetImportError(f"schema violation: {exc!r}", tid) from exc
        if g.target_id != pos:
            raise ProblemSetImportError(f"out of order or duplicate id at position {pos}", g.target_id)
        _check_instance(g, spec, dims)
        instances.append(g)
    return ProblemSet(instances, meta)


def write_formulas(ps: ProblemSet, path):
    lines = ["# Generated instances", "", "| id | h | dim | objective | formula |", "|---|---|---|---|---|"]
    for g in ps.instances:
        obj = "failed" if g.failed else f"{g.objective:.4g}"
        h = f"({g.h[0]:.3f}, {g.h[1]:.3f})"
        lines.append(f"| {g.target_id} | {h} | {g.dim} | {obj} | `{sym.to_infix(g.expr())}` |")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
