import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scalelab.core import (FullCube, FunctionClass, PartialConceptClass, aggregate, canonical,
                           crit2_ceiling, discretize, dual, hat_embed, restrict, to_partial)
from scalelab.errors import InputError


def abc_class():
    return FunctionClass(("a", "b", "c"), np.array([[0.0, 1.0, 0.5], [1.0, 0.0, -0.5], [0.2, 0.3, 0.4]]), 1.0)


def test_function_class_rejects_bad_input():
    with pytest.raises(InputError):
        FunctionClass((1, 2), np.array([[0.0, 2.0]]), 1.0)
    with pytest.raises(InputError):
        FunctionClass((1, 1), np.zeros((1, 2)), 1.0)
    with pytest.raises(InputError):
        FunctionClass((1,), np.zeros((0, 1)), 1.0)
    with pytest.raises(InputError):
        FunctionClass((1,), np.array([[np.nan]]), 1.0)
    with pytest.raises(InputError):
        FunctionClass((1,), np.zeros((1, 1)), 0.0)


def test_function_class_is_immutable_and_keeps_duplicates():
    F = FunctionClass((1, 2), np.array([[0.0, 1.0], [0.0, 1.0]]), 1.0)
    assert F.n_functions == 2
    with pytest.raises(ValueError):
        F.values[0, 0] = 5
    assert F.dedup().n_functions == 1


def test_json_round_trip():
    F = abc_class()
    G = FunctionClass.from_dict(json.loads(json.dumps(F.to_dict())))
    assert G.domain_labels == F.domain_labels and np.array_equal(G.values, F.values)
    P = PartialConceptClass((1, 2), np.array([[1, 0], [-1, 1]]))
    d = P.to_dict()
    assert d["values"] == [[1, None], [-1, 1]]
    assert np.array_equal(PartialConceptClass.from_dict(d).values, P.values)


def test_restrict_examples():
    F = abc_class()
    assert np.array_equal(restrict(F, ["a"]).values, F.values[:, [0]])
    assert np.array_equal(restrict(F, ["a", "b", "c"]).values, F.values)
    assert np.array_equal(restrict(restrict(F, ["b", "c"]), ["c"]).values, restrict(F, ["c"]).values)
    assert restrict(F, ["a"]).bound_R == F.bound_R
    with pytest.raises(InputError):
        restrict(F, ["z"])
    with pytest.raises(InputError):
        restrict(F, [])


def test_dual_examples():
    F = FunctionClass((1, 2, 3), np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]]), 1.0)
    D = dual(F)
    assert np.array_equal(D.values, [[0, 1], [1, 0], [0, 0]])
    assert D.domain_labels == (0, 1)
    assert np.array_equal(dual(D).values, F.values)
    C = canonical("constant", 4, value=0.3)
    assert np.array_equal(dual(C).values, np.full((4, 1), 0.3))


def test_aggregate_examples():
    A = FunctionClass((1, 2), np.array([[0.0, 1.0]]), 1.0)
    B = FunctionClass((1, 2), np.array([[1.0, 0.0]]), 1.0)
    assert np.array_equal(aggregate(np.maximum, [A, B]).values, [[1, 1]])
    cube = canonical("cube", 2, gamma=1.0)
    first = aggregate(lambda f, g: f, [cube, cube])
    assert {tuple(r) for r in first.values} == {tuple(r) for r in cube.values}
    avg = aggregate(lambda f, g: (f + g) / 2, [cube, cube])
    assert avg.n_functions == 16
    assert {tuple(r) for r in avg.values} == set(itertools.product((0.0, 0.5, 1.0), repeat=2))
    with pytest.raises(InputError):
        aggregate(np.maximum, [A, FunctionClass((1, 3), np.array([[0.0, 0.0]]), 1.0)])


def test_discretize_examples():
    F = FunctionClass((1,), np.array([[0.6]]), 1.0)
    assert discretize(F, 0.25).values[0, 0] == 0.5
    C = canonical("cube", 2, gamma=0.3)
    assert np.array_equal(discretize(C, 0.1).values, C.values)
    big = discretize(abc_class(), 5.0)
    assert set(np.unique(big.values)) <= {0.0, -5.0}
    assert big.n_functions <= 2


@given(st.lists(st.floats(-1, 1, allow_nan=False), min_size=1, max_size=12),
       st.sampled_from([0.05, 0.1, 0.25, 0.3, 0.5]))
@settings(max_examples=60, deadline=None)
def test_discretize_is_close_and_idempotent(vals, eps):
    F = FunctionClass(tuple(range(len(vals))), np.array([vals]), 1.0)
    D = discretize(F, eps)
    assert np.all(np.abs(D.values - F.values) <= eps + 1e-9)
    assert np.array_equal(discretize(D, eps).values, D.values)


def test_to_partial_examples():
    F = FunctionClass((1, 2, 3), np.array([[0.5, -0.5, 0.1], [0.3, -0.3, 0.0]]), 1.0)
    assert to_partial(F, 0.6).values.tolist() == [[1, -1, 0], [1, -1, 0]]
    with pytest.raises(InputError):
        to_partial(F, 0.0)
    Z = FunctionClass((1, 2), np.zeros((1, 2)), 1.0)
    assert to_partial(Z, 0.2).values.tolist() == [[0, 0]]


def test_hat_embed_examples():
    P = PartialConceptClass((1, 2, 3), np.array([[1, 0, -1]]))
    H = hat_embed(P, 0.4)
    assert H.values.tolist() == [[0.4, 0.0, -0.4]] and H.bound_R == 0.4


@given(st.lists(st.lists(st.sampled_from([-1, 0, 1]), min_size=3, max_size=3), min_size=1, max_size=6),
       st.sampled_from([0.1, 0.4, 1.0]))
@settings(max_examples=60, deadline=None)
def test_partial_round_trip(rows, gstar):
    P = PartialConceptClass((1, 2, 3), np.array(rows))
    assert np.array_equal(to_partial(hat_embed(P, gstar), 2 * gstar).values, P.values)


def test_canonical_examples():
    S = canonical("singleton", 3)
    assert S.values.tolist() == [[1, -1, -1], [-1, 1, -1], [-1, -1, 1]]
    C = canonical("cube", 2, gamma=0.5)
    assert {tuple(r) for r in C.values} == {(0, 0), (0, 0.5), (0.5, 0), (0.5, 0.5)}
    B = canonical("ball", 1, gamma=1.0, step=0.5)
    assert sorted(B.values[:, 0]) == [-0.5, 0.0, 0.5]
    T = canonical("crit2", 3, gamma=0.5, step=0.25)
    assert T.values.max(axis=0).tolist() == [1.5, 1.5, 1.0]
    for bad in (dict(name="cube", n=0, gamma=1.0), dict(name="ball", n=2, gamma=1.0, step=0.0),
                dict(name="nope", n=2)):
        with pytest.raises(InputError):
            canonical(**bad)


def test_crit2_ceiling_and_base():
    assert crit2_ceiling(1, 0.5) == 1.5
    assert crit2_ceiling(2, 0.5) == 1.5
    assert crit2_ceiling(4, 0.5) == pytest.approx(1.0)
    assert crit2_ceiling(4, 0.5, log_base=np.e) == pytest.approx(0.5 + 1 / np.log(4))


def test_full_cube_matches_materialized():
    rng = np.random.default_rng(3)
    cube = FullCube(tuple(range(6)), 0.7)
    M = cube.materialize()
    for _ in range(20):
        w = rng.normal(size=6)
        assert cube.sup_discrepancy(w)[0] == pytest.approx(M.sup_discrepancy(w)[0], abs=1e-12)
