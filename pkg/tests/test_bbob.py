import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lsre import bbob
from lsre.errors import DomainError, ParameterError


def test_sphere_at_origin():
    assert bbob.evaluate_base(1, np.zeros(7)) == 0.0


def test_rosenbrock_at_ones():
    assert bbob.evaluate_base(8, np.ones(6)) == 0.0


def test_rastrigin_by_hand():
    # 10 (d - sum cos(2 pi z)) + |z|^2 at z = (0.5, 0.5)
    expected = 10.0 * (2 - math.cos(math.pi) - math.cos(math.pi)) + 0.25 + 0.25
    assert bbob.evaluate_base(3, [0.5, 0.5]) == pytest.approx(expected, abs=1e-12)


def test_non_finite_input():
    with pytest.raises(DomainError):
        bbob.evaluate_base(1, [np.nan, 0.0])


def test_bad_id_and_dim():
    with pytest.raises(ParameterError):
        bbob.evaluate_base(25, [0.0, 0.0])
    with pytest.raises(ParameterError):
        bbob.make_instance(1, 1, 0)


def test_identity_instance_matches_base():
    rng = np.random.default_rng(0)
    for fid in range(1, 25):
        X = rng.uniform(-5, 5, (1000, 3))
        inst = bbob.identity_instance(fid, 3)
        assert np.array_equal(inst(X), bbob.evaluate_base_batch(fid, X))


def test_shift_cancels():
    for fid in range(1, 25):
        inst = bbob.make_instance(fid, 4, 11 + fid)
        assert bbob.evaluate(inst, inst.shift) == pytest.approx(bbob.evaluate_base(fid, np.zeros(4)), rel=1e-12, abs=1e-12)


def test_unit_shift_sphere():
    inst = bbob.TransformedInstance(1, 3, 0, np.eye(3), np.ones(3))
    assert bbob.evaluate(inst, np.ones(3)) == 0.0


def test_loop_oracle_composition():
    inst = bbob.make_instance(15, 5, 99)
    x = np.random.default_rng(3).uniform(-5, 5, 5)
    z = [sum(inst.rotation[i][j] * (x[i] - inst.shift[i]) for i in range(5)) for j in range(5)]
    assert bbob.evaluate(inst, x) == pytest.approx(bbob.evaluate_base(15, z), rel=1e-12)


def test_dim_mismatch():
    with pytest.raises(ParameterError):
        bbob.evaluate(bbob.make_instance(1, 10, 0), np.zeros(5))


def test_replay_and_difference():
    a, b = bbob.make_instance(7, 5, 1), bbob.make_instance(7, 5, 1)
    assert np.array_equal(a.rotation, b.rotation) and np.array_equal(a.shift, b.shift)
    c = bbob.make_instance(7, 5, 2)
    assert np.linalg.norm(a.rotation - c.rotation) > 0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), d=st.sampled_from([2, 5, 10, 30, 50]))
def test_orthogonal_and_bounded(seed, d):
    inst = bbob.make_instance(1, d, seed)
    assert np.linalg.norm(inst.rotation.T @ inst.rotation - np.eye(d)) < 1e-10
    assert np.all(np.abs(inst.shift) <= 4.0)


def test_distribution_counts():
    assert bbob.DistributionSpec().size == 32_400
    assert len(bbob.build_distribution(bbob.DistributionSpec(dims=(2,), instances_per_function=1))) == 24


def test_distribution_replay():
    spec = bbob.DistributionSpec(dims=(2, 5), instances_per_function=3, master_seed=5)
    assert list(bbob.instance_seeds(spec)) == list(bbob.instance_seeds(spec))


@pytest.mark.parametrize("fid", range(1, 25))
def test_known_optimum_is_minimum(fid):
    d = 5
    inst = bbob.make_instance(fid, d, 1000 + fid)
    found = bbob.identity_instance(fid, d).optimum()
    assert found is not None
    x_star, f_star = found
    assert f_star == pytest.approx(0.0, abs=1e-6)
    X = np.random.default_rng(fid).uniform(-5, 5, (5000, d))
    assert f_star <= inst(X).min() + 1e-9
    opt = inst.optimum()
    if opt is not None:
        assert bbob.evaluate(inst, opt[0]) == pytest.approx(f_star, abs=1e-8)


def test_json_round_trip():
    inst = bbob.make_instance(3, 5, 42)
    back = bbob.TransformedInstance.from_json(inst.to_json())
    assert np.array_equal(back.rotation, inst.rotation) and back.name == inst.name
