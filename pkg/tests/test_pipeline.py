import json
from dataclasses import replace

import numpy as np
import pytest

from lsre import gp, pipeline as pl, symbolic as sym
from lsre.autoencoder import AEModel
from lsre.errors import ConfigurationError, ParameterError, ProblemSetImportError
from lsre.pipeline import GridSpec


def test_grid_examples():
    t = pl.grid_targets(GridSpec(1.0, 2))
    assert [x.h for x in t] == [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    assert [x.target_id for x in t] == [0, 1, 2, 3]
    t3 = pl.grid_targets(GridSpec(0.5, 3))
    assert t3[5].h == (0.0, 0.5) and t3[5].target_id == 5
    assert pl.grid_targets(GridSpec(1.0, 1))[0].h == (0.0, 0.0)
    assert len(pl.grid_targets(GridSpec())) == 256


def test_grid_validation():
    with pytest.raises(ParameterError):
        GridSpec(0.0, 4)
    with pytest.raises(ParameterError):
        GridSpec(1.0, 0)


@pytest.fixture(scope="module")
def tiny(small_gp):
    return replace(small_gp, pop_size=8, tournament_size=2, generations=1)


@pytest.fixture(scope="module")
def generated(desk_model, tiny, tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    return pl.generate(GridSpec(1.0, 2), desk_model, tiny, out_dir=str(out)), out


def test_single_target_equals_direct_search(desk_model, tiny):
    ps = pl.generate(GridSpec(1.0, 1), desk_model, tiny)
    res = gp.gp_search(gp.SearchTarget((0.0, 0.0), 0), desk_model, replace(tiny, seed=pl.target_seed(tiny.seed, 0)))
    g = ps.instances[0]
    assert g.tree == sym.serialize(res.best.tree) and g.dim == res.best.dim and g.objective == res.best.objective


def test_generate_shape_and_metadata(generated, tiny):
    ps, out = generated
    assert len(ps) == 4 and [g.target_id for g in ps.instances] == [0, 1, 2, 3]
    assert ps.metadata["grid"] == {"B": 1.0, "K": 2}
    assert ps.metadata["local_search_dims"] == list(tiny.local_search_dims)
    assert all(g.dim in tiny.local_search_dims for g in ps.instances)
    assert len(list((out / "targets").glob("*.json"))) == 4


def test_replay_and_parallel(generated, desk_model, tiny):
    ps, _ = generated
    again = pl.generate(GridSpec(1.0, 2), desk_model, replace(tiny, eval_workers=2), parallel_searches=2)
    assert again.content() == ps.content()


def test_resume_reuses_targets(generated, desk_model, tiny):
    ps, out = generated
    (out / "targets" / "target_0002.json").unlink()
    again = pl.generate(GridSpec(1.0, 2), desk_model, tiny, out_dir=str(out), resume=True)
    assert again.content() == ps.content()


def test_untrained_model(tiny):
    with pytest.raises(ConfigurationError):
        pl.generate(GridSpec(1.0, 1), AEModel.initialize(0), tiny)


def test_export_import_round_trip(generated, tmp_path):
    ps, _ = generated
    path = tmp_path / "ps.json"
    pl.export_problemset(ps, path)
    back = pl.import_problemset(path)
    assert back.to_json() == ps.to_json()
    X = np.random.default_rng(0).uniform(-5, 5, (50, 5))
    for a, b in zip(ps.instances, back.instances):
        Xd = X[:, : a.dim]
        assert np.array_equal(a.problem()(Xd), b.problem()(Xd))
    pl.write_formulas(back, tmp_path / "f.md")
    assert (tmp_path / "f.md").read_text().count("\n|") == 6


def test_truncated_file(generated, tmp_path):
    ps, _ = generated
    path = tmp_path / "ps.json"
    pl.export_problemset(ps, path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(ProblemSetImportError):
        pl.import_problemset(path)


def _tamper(ps, tmp_path, fn):
    d = ps.to_json()
    fn(d)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(d))
    with pytest.raises(ProblemSetImportError) as info:
        pl.import_problemset(path)
    return info.value


def test_bad_arity_names_target(generated, tmp_path):
    ps, _ = generated

    def break_tree(d):
        d["instances"][2]["tree"] = "add(X)"

    err = _tamper(ps, tmp_path, break_tree)
    assert err.target_id == 2 and "2" in str(err)


def test_other_schema_violations(generated, tmp_path):
    ps, _ = generated
    assert _tamper(ps, tmp_path, lambda d: d["instances"].pop()) is not None

    def swap(d):
        d["instances"][0], d["instances"][1] = d["instances"][1], d["instances"][0]

    assert _tamper(ps, tmp_path, swap).target_id is not None

    def move(d):
        d["instances"][3]["h"] = [0.0, 0.0]

    assert _tamper(ps, tmp_path, move).target_id == 3

    def negative(d):
        d["instances"][1]["objective"] = -1.0

    assert _tamper(ps, tmp_path, negative).target_id == 1
