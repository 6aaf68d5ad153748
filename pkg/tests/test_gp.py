import json
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from lsre import gp, symbolic as sym
from lsre.autoencoder import AEModel
from lsre.ela import ELAVector
from lsre.errors import ConfigurationError, ParameterError
from lsre.gp import GPConfig, Individual, SearchTarget


def test_latent_distance_example():
    assert gp.latent_distance((0.6, 0.8), (0.0, 0.0)) == pytest.approx(0.5, abs=1e-15)


def test_constant_tree_is_infinite(desk_model, small_gp):
    obj = gp.objective(sym.parse("C(5,0)"), 2, SearchTarget((0, 0)), desk_model, small_gp.ela)
    assert obj == np.inf


def test_objective_matches_encoding(desk_model, small_gp):
    tree = sym.parse("sum(mul(X, X))")
    t = SearchTarget((0.1, -0.2), 3)
    obj, e = gp.evaluate_tree(tree, 5, t, desk_model, small_gp.ela, 7)
    assert obj == pytest.approx(0.5 * np.linalg.norm(desk_model.encode(e) - np.array(t.h)), rel=1e-12)
    assert obj == gp.objective(tree, 5, t, desk_model, small_gp.ela, 7)


def test_untrained_model_rejected(small_gp):
    with pytest.raises(ConfigurationError):
        gp.gp_search(SearchTarget((0, 0)), AEModel.initialize(0), small_gp)


def test_target_validation():
    with pytest.raises(ParameterError):
        SearchTarget((0.0, float("nan")))
    with pytest.raises(ParameterError):
        GPConfig(p_crossover=0.7)


def ind(obj, size):
    tree = sym.parse("X" if size == 1 else "neg(" * (size - 1) + "X" + ")" * (size - 1))
    return Individual(tree, 2, obj)


def test_tournament_ties():
    pop = [ind(1.0, 3), ind(0.5, 4), ind(0.5, 2), ind(0.5, 2)]
    rng = np.random.default_rng(0)
    assert gp.tournament_index(pop, 4, rng, full_enumeration=True) == 2
    assert gp.tournament_index([ind(0.2, 1)], 5, rng) == 0


def test_tournament_best_of_draws():
    pop = [ind(float(v), 1) for v in np.random.default_rng(1).permutation(30)]
    rng = np.random.default_rng(2)
    for _ in range(50):
        state = rng.bit_generator.state
        picked = gp.tournament_index(pop, 5, rng)
        draws = np.random.default_rng()
        draws.bit_generator.state = state
        ids = draws.integers(30, size=5)
        assert picked == min(ids, key=lambda i: (pop[i].objective, i))


def test_operator_frequencies():
    cfg = GPConfig(pop_size=50, max_depth=15)
    rng = np.random.default_rng(0)
    parent = sym.random_tree((3, 5), rng)
    counts = Counter(gp.roulette_reproduction(parent, cfg, rng)[1] for _ in range(10_000))
    for name, p in zip(gp.OPERATORS, cfg.probabilities):
        assert abs(counts[name] / 10_000 - p) <= 0.02


def test_pure_reproduction():
    cfg = GPConfig(pop_size=50, p_crossover=0, p_subtree_mutation=0, p_point_mutation=0, p_hoist_mutation=0, p_reproduce=1)
    parent = sym.parse("add(sin(X), C(3,1))")
    rng = np.random.default_rng(0)
    for _ in range(20):
        child, op = gp.roulette_reproduction(parent, cfg, rng)
        assert op == "reproduce" and child == parent


def test_point_mutation_keeps_shape():
    rng = np.random.default_rng(4)
    for _ in range(300):
        tree = sym.random_tree((2, 6), rng)
        child = gp._point_mutation(tree, rng)
        assert len(child) == len(tree)
        assert [sym._arity(n) for n in child.nodes] == [sym._arity(n) for n in tree.nodes]
        assert sum(a != b for a, b in zip(child.nodes, tree.nodes)) == 1


def test_children_respect_depth():
    cfg = GPConfig(pop_size=50, max_depth=6, init_depth=(2, 4), mutate_depth=(2, 6))
    rng = np.random.default_rng(5)
    for _ in range(500):
        parent = sym.random_tree((2, 6), rng)
        donor = sym.random_tree((2, 6), rng)
        child, _ = gp.roulette_reproduction(parent, cfg, rng, donor)
        assert child.depth <= 6
        sym.validate(child)


def fake_evaluator(small_gp, table):
    ev = gp.Evaluator(SearchTarget((0, 0)), None, replace(small_gp, local_search_dims=(2, 5, 10)), 0, workers=1)
    for (text, d), obj in table.items():
        ev.cache[(text, d)] = (obj, ELAVector.invalid("fake"))
    return ev


def test_local_search_tie_and_dominance(small_gp):
    ev = fake_evaluator(small_gp, {("X", 2): 0.3, ("X", 5): 0.1, ("X", 10): 0.1,
                                   ("Xa", 2): 0.2, ("Xa", 5): 0.4, ("Xa", 10): 0.9})
    a, b = ev.local_search([sym.parse("X"), sym.parse("Xa")])
    assert (a.dim, a.objective) == (5, 0.1)
    assert (b.dim, b.objective) == (2, 0.2)
    assert ev.evaluations == 6


def test_zero_generations(desk_model, small_gp):
    cfg = replace(small_gp, generations=0)
    res = gp.gp_search(SearchTarget((0.2, 0.2)), desk_model, cfg)
    assert res.generations_run == 0 and len(res.trace) == 1
    assert res.evaluations_used == cfg.pop_size * len(cfg.local_search_dims)
    assert res.best.objective == res.trace[0]


@pytest.fixture(scope="module")
def search(desk_model, small_gp):
    lines = []
    res = gp.gp_search(SearchTarget((-0.3, 0.4), 2), desk_model, small_gp, progress=lines.append)
    return res, lines


def test_trace_and_budget(search, small_gp):
    res, lines = search
    assert res.trace == sorted(res.trace, reverse=True)
    assert len(res.trace) == small_gp.generations + 1
    assert res.evaluations_used == small_gp.pop_size * 2 * (small_gp.generations + 1)
    assert res.best.objective == res.trace[-1]
    assert lines[0].startswith("target 2 gen 0 best")


def test_determinism(search, desk_model, small_gp):
    again = gp.gp_search(SearchTarget((-0.3, 0.4), 2), desk_model, small_gp)
    a, b = search[0].to_json(), again.to_json()
    a.pop("wall_time"), b.pop("wall_time")
    assert a == b


def test_pool_matches_serial(search, desk_model, small_gp):
    par = gp.gp_search(SearchTarget((-0.3, 0.4), 2), desk_model, small_gp, workers=2)
    assert par.trace == search[0].trace
    assert sym.serialize(par.best.tree) == sym.serialize(search[0].best.tree)


def test_checkpoint_resume(tmp_path, search, desk_model, small_gp):
    ck = str(tmp_path / "c.json")
    gp.gp_search(SearchTarget((-0.3, 0.4), 2), desk_model, replace(small_gp, generations=1), checkpoint=ck)
    assert json.load(open(ck))["generation"] == 1
    resumed = gp.gp_search(SearchTarget((-0.3, 0.4), 2), desk_model, small_gp, checkpoint=ck)
    full = search[0]
    assert resumed.trace == full.trace
    assert resumed.evaluations_used == full.evaluations_used
    assert sym.serialize(resumed.best.tree) == sym.serialize(full.best.tree)


def test_early_stop(desk_model, small_gp):
    cfg = replace(small_gp, stopping_criteria=10.0, generations=5)
    res = gp.gp_search(SearchTarget((0, 0)), desk_model, cfg)
    assert res.generations_run == 0 and res.stopped_early


def test_cross_dimension_entry_point(desk_model, small_gp):
    tree = sym.parse("sum(mul(X, X))")
    best = gp.cross_dimension_local_search(tree, SearchTarget((0, 0)), desk_model, small_gp)
    each = [gp.objective(tree, d, SearchTarget((0, 0)), desk_model, small_gp.ela, small_gp.seed) for d in (2, 5)]
    assert best.objective == min(each)
