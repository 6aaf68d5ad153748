import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lsre import asrd, bbob
from lsre.asrd import ASRDConfig


class Flat:
    """Problem without a known optimum."""
    def __init__(self, inst):
        self.inst, self.dim = inst, inst.dim

    def __call__(self, X):
        return self.inst(X)


def test_run_seeds():
    assert asrd.run_seed(0) == 200
    assert asrd.run_seed(50) == 5200


def test_sphere_all_success():
    cfg = ASRDConfig(runs_per_pair=3, budget_multiplier=2000)
    rep = asrd.asrd([bbob.identity_instance(1, 2)], ["CMAES"], cfg)
    assert rep.success_rates[0, 0] == 1.0
    assert rep.reference_values[0] == (0.0, "known")


def small_report(**kw):
    cfg = ASRDConfig(runs_per_pair=4, budget_multiplier=100, **kw)
    bench = [bbob.make_instance(f, 2, f) for f in (1, 3, 21)]
    return bench, asrd.asrd(bench, ["DE", "CMAES"], cfg)


def test_counts_lattice_and_marginals():
    _, rep = small_report()
    assert rep.histogram.sum() == 3 * 2
    assert np.all(np.isin(rep.success_rates * 4, np.arange(5)))
    assert np.allclose(rep.instance_marginal, rep.success_rates.mean(1))
    assert rep.evaluations.shape == (3, 2, 4)


def test_relative_reference():
    inst = bbob.make_instance(21, 2, 1)
    rep = asrd.asrd([Flat(inst)], ["DE", "PSO"], ASRDConfig(runs_per_pair=3, budget_multiplier=100))
    ref, kind = rep.reference_values[0]
    assert kind == "relative_best" and ref == rep.best_values.min()
    assert rep.success_rates.max() > 0


def test_tolerance_monotone():
    bench, base = small_report()
    looser = asrd.resolve(base.best_values, bench, base.pool, ASRDConfig(runs_per_pair=4, success_tolerance=1e-2), base.instance_ids)
    assert np.all(looser.success_rates >= base.success_rates)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 10), min_size=1, max_size=40))
def test_histogram_counts(hits):
    rates = np.array(hits) / 10
    counts, edges = asrd.histogram(rates, 10)
    assert counts.sum() == len(hits) and edges[0] == 0 and edges[-1] == 1
    assert counts[-1] == np.sum(rates >= 0.9)


def test_csv_outputs(tmp_path):
    _, rep = small_report()
    asrd.write_histogram_csv(rep, tmp_path / "h.csv")
    rows = list(csv.DictReader(open(tmp_path / "h.csv")))
    assert len(rows) == 10
    assert sum(float(r["fraction"]) for r in rows) == pytest.approx(1.0, abs=1e-12)
    asrd.write_runs_csv(rep, tmp_path / "r.csv")
    runs = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert len(runs) == 3 * 2 * 4 and runs[1]["seed"] == "300"


def test_replay_and_workers():
    _, a = small_report()
    _, b = small_report(workers=2)
    assert np.array_equal(a.best_values, b.best_values)
    assert np.array_equal(a.success_rates, b.success_rates)


def test_render(tmp_path):
    _, rep = small_report()
    asrd.render_histogram(rep, str(tmp_path / "x"), "demo")
    first = (tmp_path / "x.svg").read_bytes()
    asrd.render_histogram(rep, str(tmp_path / "x"), "demo")
    assert first.startswith(b"<?xml") and (tmp_path / "x.svg").read_bytes() == first
