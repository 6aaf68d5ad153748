import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lsre import symbolic as sym
from lsre.errors import ParameterError, ParseError
from lsre.symbolic import Const, ExprTree, Op


def T(text):
    return sym.parse(text)


def test_neg_root_is_summed():
    assert sym.eval(T("neg(X)"), [1.0, 2.0]) == -3.0


def test_protected_div_elementwise():
    assert sym.eval(T("div(C(1,0), X)"), [0.0, 2.0]) == 1.5


def test_log_of_constant():
    assert sym.eval(T("log(C(1,2))"), [0.3, 0.4]) == pytest.approx(2.0, abs=1e-15)


def test_protected_pow_minus_one_at_zero():
    assert sym.eval(T("sum(pow(X, neg(C(1,0))))"), [0.0, 4.0]) == 1.25


def test_log_near_zero_and_sqrt_abs():
    assert sym.eval(T("sum(log(X))"), [0.0, 1000.0]) == pytest.approx(3.0)
    assert sym.eval(T("sum(sqrt(X))"), [-4.0, 9.0]) == 5.0


def test_overflow_is_clamped():
    v = sym.eval(T("exp(exp(exp(X)))"), [5.0, 5.0])
    # each element saturates, and so does their sum
    assert v == sym.CLAMP


def test_zero_to_negative_power_is_clamped():
    v = sym.eval(T("sum(pow(X, neg(C(2,0))))"), [0.0, 1.0])
    assert math.isfinite(v) and v == sym.CLAMP + 1.0


def test_slices_truncate_to_shorter():
    # X has length 3, Xa length 2 -> add truncates X to its first 2 entries
    assert sym.eval(T("add(X, Xb)"), [1.0, 2.0, 3.0]) == (1 + 2) + (2 + 3)


def test_sum_mean_modes():
    x = [1.0, 2.0, 3.0]
    assert sym.eval(T("mul(sum(X), C(1,0))"), x) == 6.0
    assert sym.eval(T("mul(mean(X), C(1,0))"), x) == 2.0
    assert sym.eval(T("sum(X, X)"), x) == 12.0
    assert sym.eval(T("mean(X, C(2,0))"), x) == pytest.approx((1.5 + 2 + 2.5))
    # aggregation of a scalar is the identity
    assert sym.eval(T("sum(C(3,0))"), x) == 3.0


def test_constant_spec_values():
    assert Const(10, 0).value == math.pi
    assert Const(11, 1).value == pytest.approx(10 * math.e)
    assert Const(3, -1).value == pytest.approx(0.3)


def test_d_below_two_rejected():
    with pytest.raises(ParameterError):
        sym.eval(T("X"), [1.0])


def test_single_node_serialization():
    assert sym.serialize(ExprTree(("X",))) == "X"
    t = T("add(X, C(3,0))")
    assert sym.serialize(t) == "add(X, C(3,0))"
    assert t.nodes == (Op("add", 2), "X", Const(3, 0))


@pytest.mark.parametrize("text,pos", [("add(X", 5), ("add(X, X, X)", 0), ("foo(X)", 0), ("add(X, C(12,0))", 7)])
def test_parse_errors_carry_position(text, pos):
    with pytest.raises(ParseError) as info:
        sym.parse(text)
    assert info.value.position == pos


def test_depth_one_tree():
    rng = np.random.default_rng(0)
    for _ in range(50):
        t = sym.random_tree((1, 1), rng)
        assert t.depth == 1 and t.nodes[0] in sym.VARIABLES


def test_random_tree_structure_sweep():
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        t = sym.random_tree((5, 8), rng)
        assert 5 <= t.depth <= 8
        sym.validate(t)
        # arity: the prefix sequence closes exactly at the end
        assert sym.subtree_end(t.nodes, 0) == len(t)


def test_random_tree_replay():
    a = sym.random_tree((5, 8), np.random.default_rng(7))
    b = sym.random_tree((5, 8), np.random.default_rng(7))
    assert a == b


def test_round_trip_1000_trees():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        t = sym.random_tree((1, 10), rng)
        assert sym.parse(sym.serialize(t)) == t


def test_slice_lengths():
    for d in range(2, 51):
        X = np.zeros((1, d))
        a, _ = sym._eval_at(("Xa",), 0, X)
        b, _ = sym._eval_at(("Xb",), 0, X)
        assert a.shape[1] == b.shape[1] == d - 1


def test_infix():
    assert sym.to_infix(T("add(Xa, mul(C(10,0), Xb))")) == "(x[0:n-1] + (pi * x[1:n]))"


def test_malformed_nodes_rejected():
    with pytest.raises(ParameterError):
        ExprTree((Op("add", 2), "X"))


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 50))
def test_totality(seed, d):
    rng = np.random.default_rng(seed)
    t = sym.random_tree((1, 15), rng)
    X = rng.uniform(-5, 5, (5, d))
    assert np.all(np.isfinite(sym.eval_batch(t, X)))


@settings(max_examples=100, deadline=None)
@given(a=st.floats(-1e300, 1e300), b=st.floats(-1e300, 1e300))
def test_protected_ops_closed(a, b):
    X = np.array([[a, b]])
    for text in ("div(X, Xb)", "pow(X, Xb)", "log(X)", "sqrt(X)", "pow(Xa, neg(C(1,0)))"):
        assert np.isfinite(sym.eval_batch(T(text), X)).all()
