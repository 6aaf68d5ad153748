"""``lsre`` command line.

Exit codes: 0 success, 1 validation/usage error, 2 partial failure, 3 internal error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__, asrd as asrd_mod, autoencoder, bbob, ela, pipeline, symbolic as sym
from .config import RunConfig
from .errors import LSREError
from .seeding import derive_seed

log = logging.getLogger("lsre")

EXIT_OK, EXIT_INVALID, EXIT_PARTIAL, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


# -- helpers --------------------------------------------------------------------


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config, args.preset)
    if args.workers is not None:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        w = args.workers
        searches = min(cfg["io"]["parallel_searches"], w)
        cfg = cfg.with_overrides("io", workers=w, parallel_searches=searches)
        # searches x evaluators never exceeds the cap
        inner = max(1, min(cfg["gp"]["eval_workers"], w // searches))
        cfg = cfg.with_overrides("gp", eval_workers=inner)
    return cfg


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _ela_job(args):
    iid, problem, cfg = args
    return iid, ela.compute_ela(problem, cfg)


def _compute_all(items, ela_cfg, workers):
    """``items``: (instance_id, problem); the ELA seed is derived from the id."""
    jobs = [(iid, p, replace(ela_cfg, seed=derive_seed(ela_cfg.seed, iid))) for iid, p in items]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(_ela_job, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    return [_ela_job(j) for j in jobs]


def _write_failures(path, results):
    failures = [(iid, v.error) for iid, v in results if not v.valid]
    if failures:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["instance_id", "error"])
            w.writerows(failures)
    elif os.path.exists(path):
        os.remove(path)
    return failures


def _manifest_rows(spec):
    return [
        {"instance_id": k, "base_id": f, "dim": d, "seed": s}
        for k, (f, d, s) in enumerate(bbob.instance_seeds(spec))
    ]


def _load_benchmark(path):
    """A problem set or a BBOB manifest -> (ids, problems)."""
    with open(path) as fh:
        head = json.load(fh)
    if "instances" in head and "schema" in head:
        ps = pipeline.import_problemset(path)
        return [g.target_id for g in ps.instances], [g.problem() for g in ps.instances]
    if "rows" in head:
        rows = head["rows"]
        return [r["instance_id"] for r in rows], [bbob.TransformedInstance.from_json(r) for r in rows]
    raise UsageError(f"{path}: neither a problem set nor a manifest")


# -- commands -------------------------------------------------------------------


def cmd_build_distribution(args, cfg: RunConfig):
    if args.scale:
        from .config import preset

        cfg = cfg.with_overrides("distribution", **{k: v for k, v in preset(args.scale)["distribution"].items() if k != "master_seed"})
    if args.functions:
        funcs = [int(v) for v in args.functions.split(",")]
    else:
        funcs = None
    spec = cfg.distribution_spec()
    out = args.out
    os.makedirs(out, exist_ok=True)
    cfg.echo(out)
    rows = _manifest_rows(spec)
    if funcs:
        rows = [r for r in rows if r["base_id"] in funcs]
    _write_json(os.path.join(out, "manifest.json"), {
        "spec": {"dims": list(spec.dims), "instances_per_function": spec.instances_per_function,
                 "master_seed": spec.master_seed, "functions": funcs},
        "count": len(rows),
        "version": __version__,
        "rows": rows,
    })
    print(f"manifest: {len(rows)} instances")
    if args.manifest_only:
        return EXIT_OK
    items = [(r["instance_id"], bbob.TransformedInstance.from_json(r)) for r in rows]
    results = _compute_all(items, cfg.ela_config(), cfg["io"]["workers"])
    ela.write_csv(os.path.join(out, "ela.csv"), results)
    failures = _write_failures(os.path.join(out, "failures.csv"), results)
    print(f"ela: {len(results) - len(failures)} vectors, {len(failures)} failures")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_compute_ela(args, cfg: RunConfig):
    ids, problems = _load_benchmark(args.input)
    results = _compute_all(list(zip(ids, problems)), cfg.ela_config(), cfg["io"]["workers"])
    ela.write_csv(args.out, results)
    failures = _write_failures(args.out + ".failures.csv", results)
    print(f"ela: {len(results) - len(failures)} vectors, {len(failures)} failures")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_train_ae(args, cfg: RunConfig):
    if args.epochs is not None:
        cfg = cfg.with_overrides("autoencoder", epochs=args.epochs)
    ids, data, bad = ela.read_csv(args.ela)
    if bad:
        raise autoencoder.TrainingError(f"invalid ELA rows: {bad}")
    res = autoencoder.train(data, cfg.train_config(), progress=_epoch_logger)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    res.model.save(args.out)
    losses = args.losses or os.path.splitext(args.out)[0] + "_losses.csv"
    with open(losses, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_loss", "val_loss"])
        for k, (a, b) in enumerate(zip(res.train_loss, res.val_loss)):
            w.writerow([k, repr(a), repr(b)])
    cfg.echo(os.path.dirname(os.path.abspath(args.out)))
    print(f"trained {len(res.train_loss)} epochs: train {res.train_loss[-1]:.6g} val {res.val_loss[-1]:.6g}")
    return EXIT_OK


def _epoch_logger(epoch, tr, va):
    log.info("epoch %d train %.6g val %.6g", epoch, tr, va)


def cmd_generate(args, cfg: RunConfig):
    if args.K is not None:
        cfg = cfg.with_overrides("grid", K=args.K)
    try:
        model = autoencoder.AEModel.load(args.model)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot load model {args.model}: {exc}") from exc
    out = args.out
    os.makedirs(out, exist_ok=True)
    cfg.echo(out)
    ps = pipeline.generate(
        cfg.grid_spec(), model, cfg.gp_config(),
        parallel_searches=cfg["io"]["parallel_searches"], out_dir=out, resume=args.resume,
    )
    pipeline.export_problemset(ps, os.path.join(out, "problemset.json"))
    pipeline.write_formulas(ps, os.path.join(out, "formulas.md"))
    failed = ps.metadata["failed_targets"]
    print(f"generated {len(ps)} instances, {len(failed)} failed")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_asrd(args, cfg: RunConfig):
    from .plotting import comparison_svg

    out = args.out
    os.makedirs(out, exist_ok=True)
    cfg.echo(out)
    reports = {}
    for spec in args.input:
        label, _, path = spec.rpartition("=")
        label = label or os.path.splitext(os.path.basename(path))[0]
        ids, problems = _load_benchmark(path)
        if args.limit:
            ids, problems = ids[: args.limit], problems[: args.limit]
        if not problems:
            raise UsageError(f"{path}: empty benchmark")
        rep = asrd_mod.asrd(problems, cfg.pool, cfg.asrd_config(), instance_ids=ids)
        prefix = os.path.join(out, label)
        rep.save(prefix + "_report.json")
        asrd_mod.render_histogram(rep, prefix + "_histogram", label)
        asrd_mod.write_runs_csv(rep, prefix + "_runs.csv")
        reports[label] = rep
        print(f"{label}: {len(ids)} instances x {len(cfg.pool)} optimizers, "
              f"histogram {rep.histogram.tolist()} ({rep.nonempty_bins()} non-empty bins)")
    if len(reports) > 1:
        comparison_svg(reports, os.path.join(out, "comparison.svg"))
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig):
    ps = pipeline.import_problemset(args.problemset)
    by_id = {g.target_id: g for g in ps.instances}
    if args.target_id not in by_id:
        raise UsageError(f"no instance with target id {args.target_id}")
    g = by_id[args.target_id]
    try:
        x = np.array([float(v) for v in args.x.split(",")], dtype=float)
    except ValueError as exc:
        raise UsageError(f"bad x vector: {exc}") from exc
    if x.shape[0] != g.dim:
        raise UsageError(f"instance {g.target_id} is {g.dim}-dimensional, got {x.shape[0]} values")
    print(repr(sym.eval(g.expr(), x)))
    return EXIT_OK


def cmd_export(args, cfg: RunConfig):
    ps = pipeline.import_problemset(args.problemset)
    pipeline.export_problemset(ps, args.out)
    if args.formulas:
        pipeline.write_formulas(ps, args.formulas)
    print(f"exported {len(ps)} instances to {args.out}")
    return EXIT_OK


# -- entry point ----------------------------------------------------------------


def build_parser():
    p = _Parser(prog="lsre", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"lsre {__version__}")
    p.add_argument("--config", help="INI file with overrides")
    p.add_argument("--preset", default="paper", choices=("paper", "desk"))
    p.add_argument("--workers", type=int, help="cap on worker processes")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("build-distribution", help="instance manifest + ELA dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--scale", choices=("paper", "desk"), help="use that preset's distribution size")
    s.add_argument("--functions", help="comma-separated base ids to keep (default all)")
    s.add_argument("--manifest-only", action="store_true")
    s.set_defaults(func=cmd_build_distribution)

    s = sub.add_parser("compute-ela", help="ELA vectors for a manifest or problem set")
    s.add_argument("input")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_compute_ela)

    s = sub.add_parser("train-ae", help="train the autoencoder")
    s.add_argument("--ela", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--losses")
    s.add_argument("--epochs", type=int)
    s.set_defaults(func=cmd_train_ae)

    s = sub.add_parser("generate", help="reverse-engineer a grid of latent targets")
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--K", type=int)
    s.add_argument("--resume", action="store_true")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("asrd", help="success-rate distribution of one or more benchmarks")
    s.add_argument("input", nargs="+", help="[label=]path to problemset.json or manifest.json")
    s.add_argument("--out", required=True)
    s.add_argument("--limit", type=int, help="use only the first N instances of each input")
    s.set_defaults(func=cmd_asrd)

    s = sub.add_parser("eval", help="evaluate one generated instance at a point")
    s.add_argument("problemset")
    s.add_argument("target_id", type=int)
    s.add_argument("x", help="comma-separated coordinates")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("export", help="validate and re-export a problem set")
    s.add_argument("problemset")
    s.add_argument("--out", required=True)
    s.add_argument("--formulas")
    s.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _load_config(args)
        return args.func(args, cfg)
    except (UsageError, LSREError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - mapped to the internal-error exit code
        log.exception("internal error")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
