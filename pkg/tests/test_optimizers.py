import numpy as np
import pytest

from lsre import bbob, optimizers as opt
from lsre.errors import ParameterError


class Counted:
    def __init__(self, dim=5):
        self.dim, self.calls, self.seen = dim, 0, []

    def __call__(self, X):
        X = np.atleast_2d(X)
        self.calls += len(X)
        self.seen.append(X.copy())
        return (X**2).sum(1)


@pytest.mark.parametrize("name", opt.DEFAULT_POOL)
def test_sphere_converges(name):
    r = opt.run(name, bbob.identity_instance(1, 5), 50_000, 1, stagnation=False)
    assert r.best_value <= 1e-8


@pytest.mark.parametrize("name", opt.DEFAULT_POOL)
def test_budget_bounds_and_history(name):
    f = Counted()
    r = opt.run(name, f, 777, 3)
    assert r.evaluations_used == f.calls <= 777
    assert all(np.all(np.abs(X) <= 5) for X in f.seen)
    bests = [b for _, b in r.history]
    assert bests == sorted(bests, reverse=True)
    used = [u for u, _ in r.history]
    assert used == sorted(used) and used[-1] == r.evaluations_used


@pytest.mark.parametrize("name", ["DE", "PSO"])
def test_budget_of_one_population(name):
    r = opt.run(name, Counted(), 50, 0)
    assert r.evaluations_used == 50 and len(r.history) == 1


@pytest.mark.parametrize("name", opt.DEFAULT_POOL)
def test_replay(name):
    inst = bbob.make_instance(10, 3, 4)
    a, b = opt.run(name, inst, 3000, 9), opt.run(name, inst, 3000, 9)
    assert a.best_value == b.best_value and np.array_equal(a.best_point, b.best_point)
    assert a.history == b.history


def test_budget_too_small_and_unknown():
    with pytest.raises(ParameterError):
        opt.run("DE", Counted(), 49, 0)
    with pytest.raises(ParameterError):
        opt.run("CMAES", Counted(), 3, 0)
    with pytest.raises(ParameterError):
        opt.run("NELDER", Counted(), 1000, 0)


def test_nan_counts_as_worst():
    class Holes(Counted):
        def __call__(self, X):
            y = super().__call__(X)
            return np.where(np.atleast_2d(X)[:, 0] > 0, np.nan, y)

    r = opt.run("CMAES", Holes(3), 2000, 0)
    assert np.isfinite(r.best_value) and r.best_point[0] <= 0


def test_registry_accepts_new_optimizer():
    def random_search(f, rng):
        while not f.done(10):
            f(rng.uniform(-5, 5, (10, f.dim)))

    opt.register("RS", random_search, lambda d: 10)
    try:
        r = opt.run("RS", Counted(2), 100, 0, stagnation=False)
        assert r.evaluations_used == 100
    finally:
        del opt.REGISTRY["RS"]


def test_csv_row():
    r = opt.run("DE", Counted(), 100, 7)
    row = r.csv_row(3, "DE", 1)
    assert tuple(row) == opt.CSV_FIELDS and float(row["best_value"]) == r.best_value
