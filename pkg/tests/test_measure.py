import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from twistlab.measure import (AtomSpace, DisjointFamily, DomainError, KVec, SpaceMismatch,
                              are_disjoint, decreasing_rearrangement, rank_function, support,
                              xlog_ratio)


def brute_rank(a, w):
    """Mass of atoms strictly larger in |x|, plus equal atoms up to and including i."""
    a = np.abs(a)
    out = np.zeros_like(a)
    for i in range(a.size):
        out[i] = sum(w[j] for j in range(a.size) if a[j] > a[i] or (a[j] == a[i] and j <= i))
    return out


def test_space_validation():
    with pytest.raises(ValueError):
        AtomSpace(np.array([]))
    with pytest.raises(ValueError):
        AtomSpace(np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        AtomSpace(np.array([1.0, np.inf]))
    S = AtomSpace.counting(4)
    assert S.is_counting and S.n_atoms == 4
    with pytest.raises(ValueError):
        S.weights[0] = 2.0


def test_space_constructors():
    assert np.allclose(AtomSpace.uniform(5).weights.sum(), 1.0)
    M = AtomSpace.geometric_mesh(3, 2, 4.0)
    assert M.weights.tolist() == [1, 1, 4, 4, 16, 16]
    assert AtomSpace.counting(3) == AtomSpace(np.ones(3))
    assert hash(AtomSpace.counting(3)) == hash(AtomSpace(np.ones(3)))


def test_kvec_arithmetic_and_mismatch():
    S, T = AtomSpace.counting(3), AtomSpace.uniform(3)
    x = S.vector([1, -2, 0])
    assert ((x + x) * 2).values.tolist() == [4, -8, 0]
    assert (-x).values.tolist() == [-1, 2, 0]
    assert abs(x).values.tolist() == [1, 2, 0]
    assert x.support() == frozenset({0, 1})
    with pytest.raises(SpaceMismatch):
        x + T.vector([1, 1, 1])
    with pytest.raises(ValueError):
        KVec(S, [1, 2])


def test_kvec_json_roundtrip():
    S = AtomSpace(np.array([0.5, 2.0, 3.0]))
    x = S.vector([1.5, -0.25, 0.0])
    y = KVec.from_json(x.to_json())
    assert y.space == S and np.array_equal(y.values, x.values)
    assert json.loads(x.to_json()).keys() == {"weights", "values"}
    with pytest.raises(SpaceMismatch):
        KVec.from_json(x.to_json(), AtomSpace.counting(3))


def test_disjoint_family_checks():
    S = AtomSpace.counting(5)
    with pytest.raises(ValueError):
        DisjointFamily.from_array(S, [[1, 1, 0, 0, 0], [0, 1, 0, 0, 0]])
    with pytest.raises(ValueError):
        DisjointFamily.from_array(S, [[1, 0, 0, 0, 0], [0, 0, 0, 0, 0]])
    with pytest.raises(ValueError):
        DisjointFamily.from_array(S, [[0, 0, 1, 0, 0], [1, 0, 0, 0, 0]], successive=True)
    F = DisjointFamily.atoms(S, [0, 2, 4])
    assert F.successive and F.n == 3 and F.supports() == [{0}, {2}, {4}]
    assert not DisjointFamily.atoms(S, [3, 1]).successive
    assert are_disjoint(F.members)
    assert not are_disjoint([S.vector([1, 0, 0, 0, 0]), S.vector([2, 0, 0, 0, 1])])


def test_decreasing_rearrangement_ties_keep_order():
    S = AtomSpace(np.array([1.0, 2.0, 3.0, 4.0]))
    pairs = decreasing_rearrangement(S.vector([2, -5, 2, 1]))
    assert pairs == [(5.0, 2.0), (2.0, 3.0), (2.0, 6.0), (1.0, 10.0)]


def test_rank_function_small():
    S = AtomSpace(np.array([1.0, 2.0, 3.0]))
    assert rank_function(S.vector([1, 1, 5])).values.tolist() == [4.0, 6.0, 3.0]


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, 7, elements=st.sampled_from([0.0, 1.0, -1.0, 2.5, -3.0, 0.5])),
       arrays(np.float64, 7, elements=st.floats(0.1, 5.0)))
def test_rank_function_matches_definition(a, w):
    S = AtomSpace(w)
    assert np.allclose(rank_function(S.vector(a)).values, brute_rank(a, w), rtol=1e-12)
    # batch path agrees with the single-vector path
    batch = rank_function(np.stack([a, -a]), S)
    assert np.allclose(batch[0], batch[1])


def test_xlog_ratio():
    x = np.array([2.0, 0.0, -1.0])
    out = xlog_ratio(x, np.array([1.0, 0.0, 4.0]), 2.0)
    assert out.tolist() == pytest.approx([2 * np.log(0.5), 0.0, -np.log(2.0)])
    with pytest.raises(DomainError):
        xlog_ratio(x, np.array([1.0, 1.0, 0.0]), 1.0)
    with pytest.raises(DomainError):
        xlog_ratio(x, 1.0, np.array([-1.0, 1.0, 1.0]))
    X = np.array([[1.0, 2.0], [0.0, 3.0]])
    assert xlog_ratio(X, np.e, 1.0).tolist() == [[1.0, 2.0], [0.0, 3.0]]


def test_support_helper():
    assert support(np.array([0.0, 1e-300, 0.0])) == frozenset({1})
