import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import exhaustive_cover_number, random_class
from scalelab.core import FunctionClass, PartialConceptClass, canonical
from scalelab.covers import (box_cover_step, compression_to_cover, disambiguate, entropy_profile,
                             exact_cover_number, greedy_cover, is_cover, iterated_cover, packing_number)
from scalelab.errors import InputError
from scalelab.shattering import fat_dim


def test_is_cover_examples():
    C = canonical("cube", 2, gamma=1.0)
    assert is_cover(C, [[0.5, 0.5]], 0.5)
    assert not is_cover(C, [[0.5, 0.5]], 0.49)
    assert is_cover(C.values, C.values, 0.0)
    with pytest.raises(InputError):
        is_cover(C, [[0.5, 0.5, 0.5]], 0.5)


def test_one_point_three_values():
    F = FunctionClass((1,), np.array([[0.0], [0.5], [1.0]]), 1.0)
    assert exact_cover_number(F, None, 0.25).size == 2
    assert exact_cover_number(F, None, 0.25, shortcuts=False).size == 2
    assert exact_cover_number(F, None, 0.5).size == 1


def test_scale_at_least_range_gives_one_center():
    F = random_class(np.random.default_rng(3), 12, 5)
    assert exact_cover_number(F, None, 1.0).size == 1


def test_cube_cover_sizes():
    for n in range(1, 6):
        C = canonical("cube", n, gamma=1.0)
        assert exact_cover_number(C, None, 0.49).size == 2 ** n
        assert exact_cover_number(C, None, 0.5).size == 1


@given(st.integers(0, 10_000), st.integers(1, 9), st.integers(1, 4), st.sampled_from([0.1, 0.25, 0.4, 0.6]),
       st.booleans())
@settings(max_examples=80, deadline=None)
def test_exact_cover_matches_exhaustive_search(seed, rows, points, gamma, shortcuts):
    F = random_class(np.random.default_rng(seed), rows, points)
    cover = exact_cover_number(F, None, gamma, shortcuts=shortcuts)
    assert cover.method == "exact"
    assert cover.size == exhaustive_cover_number(F.values, gamma)
    assert cover.verify(F)
    assert greedy_cover(F, None, gamma).size >= cover.size


def test_cover_on_sample_uses_restriction():
    C = canonical("cube", 3, gamma=1.0)
    cover = exact_cover_number(C, [1, 3], 0.3)
    assert cover.size == 4 and cover.points == (1, 3)


def test_packing_examples():
    C = canonical("cube", 3, gamma=1.0)
    assert packing_number(C, None, 0.5).size == 8
    assert packing_number(C, None, 1.0).size == 1
    S = canonical("singleton", 5)
    res = packing_number(S, None, 1.5)
    assert res.size == 5 and res.exact


@given(st.integers(0, 10_000), st.integers(1, 10), st.integers(1, 4), st.sampled_from([0.25, 0.5, 0.75]))
@settings(max_examples=60, deadline=None)
def test_packing_sandwiches_cover(seed, rows, points, gamma):
    F = random_class(np.random.default_rng(seed), rows, points)
    cover = exact_cover_number(F, None, gamma).size
    assert packing_number(F, None, 2 * gamma + 1e-6).size <= cover <= packing_number(F, None, gamma).size


def test_disambiguation_examples():
    P = PartialConceptClass(("a", "b"), np.array([[1, 0], [0, 1]]))
    res = disambiguate(P)
    assert res.size == 1 and res.exact
    P = PartialConceptClass(("a",), np.array([[1], [-1], [0]]))
    assert disambiguate(P).size == 2


def _exhaustive_disambiguation(rows: np.ndarray) -> int:
    n = rows.shape[1]
    import itertools
    vecs = np.array(list(itertools.product((-1, 1), repeat=n)))
    ok = [{i for i, r in enumerate(rows) if not np.any(r * v < 0)} for v in vecs]
    need = set(range(len(rows)))
    for k in range(1, len(rows) + 1):
        for combo in itertools.combinations(range(len(vecs)), k):
            if set().union(*(ok[c] for c in combo)) == need:
                return k
    return len(rows)


@given(st.integers(0, 10_000), st.integers(1, 7), st.integers(1, 3))
@settings(max_examples=50, deadline=None)
def test_disambiguation_is_minimum_and_sound(seed, rows, points):
    vals = np.random.default_rng(seed).integers(-1, 2, size=(rows, points))
    P = PartialConceptClass(tuple(range(points)), vals)
    res = disambiguate(P)
    assert res.exact
    assert res.size == _exhaustive_disambiguation(np.unique(vals, axis=0))
    for i, row in enumerate(vals):
        assert not np.any(row * res.vectors[res.assignment[i]] < 0)


def test_greedy_disambiguation_is_sound():
    vals = np.random.default_rng(1).integers(-1, 2, size=(40, 6))
    res = disambiguate(PartialConceptClass(tuple(range(6)), vals), exact_cap=5)
    assert not res.exact
    for i, row in enumerate(vals):
        assert not np.any(row * res.vectors[res.assignment[i]] < 0)


def test_box_step_on_recentred_cube():
    C = canonical("cube", 2, gamma=1.0)
    centred = FunctionClass(C.domain_labels, C.values - 0.5, 0.5)
    cover = box_cover_step(centred, 1.0, 0.5)
    assert cover.scale == pytest.approx(0.375)
    assert cover.size <= 4 and cover.verify(centred)


def test_box_step_on_constant_class_and_zero_dimension():
    K = canonical("constant", 3, value=0.1)
    cover = box_cover_step(K, 1.0, 0.5)
    assert cover.size == 1 and cover.info["route"] == "midrange"
    F = FunctionClass((1, 2), np.array([[0.1, 0.0], [0.2, 0.1]]), 0.5)
    cover = box_cover_step(F, 1.0, 0.5)
    assert cover.size == 1 and cover.verify(F)


def test_box_step_rejects_bad_inputs():
    C = canonical("cube", 2, gamma=1.0)
    with pytest.raises(InputError):
        box_cover_step(C, 1.0, 0.5)  # entries leave [-r/2, r/2]
    with pytest.raises(InputError):
        box_cover_step(canonical("constant", 2), 0.5, 0.5)


def test_iterated_cover_singleton_example():
    S = canonical("singleton", 4)
    cover = iterated_cover(S, None, 0.5, 0.3)
    assert cover.scale == pytest.approx(0.55)
    assert cover.verify(S)
    assert cover.size >= exact_cover_number(S, None, 0.55).size == 4


@given(st.integers(0, 10_000), st.integers(1, 12), st.integers(1, 5), st.sampled_from([0.25, 0.5]),
       st.sampled_from([0.1, 0.25]))
@settings(max_examples=40, deadline=None)
def test_iterated_cover_valid_and_above_shattering_bound(seed, rows, points, gamma, eps):
    F = random_class(np.random.default_rng(seed), rows, points)
    cover = iterated_cover(F, None, gamma, eps)
    assert cover.verify(F)
    # a set shattered at 2 * scale forces 2**s distinct centers at the cover scale
    s = fat_dim(F, 2 * cover.scale + 1e-6).d
    assert cover.size >= 2 ** s
    assert cover.size >= exact_cover_number(F, None, cover.scale).size


def test_compression_cover_examples():
    K = canonical("constant", 3, value=0.0)
    cover = compression_to_cover(K, None, 0.25, 0.25)
    assert cover.size == 1 and cover.scale == pytest.approx(1.0)
    C = canonical("cube", 3, gamma=1.0)
    cover = compression_to_cover(C, None, 0.2, 0.1, seed=3)
    assert cover.verify(C) and cover.method == "compression"


def test_entropy_profile_families():
    rep = entropy_profile(lambda n: canonical("singleton", n), [0.5], [2, 4, 8])
    assert [r.cover_size for r in rep] == [2, 4, 8]
    assert [r.entropy for r in rep] == pytest.approx([1.0, 2.0, 3.0])
    rep = entropy_profile(lambda n: canonical("ball", n, gamma=1.0, step=1.0), [0.5], [1, 4, 8])
    assert all(r.entropy == 0 for r in rep)


def test_entropy_profile_fixed_class_restricts_prefix():
    rep = entropy_profile(canonical("singleton", 8), [0.5], [4, 8])
    # restricting to 4 points leaves the four unit rows plus the all -1 row
    assert [r.cover_size for r in rep] == [5, 8]
    with pytest.raises(InputError):
        entropy_profile(canonical("singleton", 3), [0.5], [4])


def test_entropy_profile_crit2_respects_volume_formula():
    gstar = 0.5
    for n in (2, 3):
        rep = entropy_profile(canonical("crit2", n, gamma=gstar, step=0.05), [gstar / 2], [n])[0]
        formula = (1 + 1 / (gstar * math.log2(n))) ** n
        assert rep.cover_size >= formula and rep.method == "exact"


def test_entropy_profile_methods_ordered():
    F = random_class(np.random.default_rng(7), 10, 4)
    ex = entropy_profile(F, [0.3], [4])[0].cover_size
    gr = entropy_profile(F, [0.3], [4], method="greedy")[0].cover_size
    assert ex <= gr
    with pytest.raises(InputError):
        entropy_profile(F, [0.3], [4], method="iterated")
