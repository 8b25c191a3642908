import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rfs_fusion.assignment import kbest_assignments, murty
from rfs_fusion.ospa import OspaParams, ospa_distance
from rfs_fusion.validation import brute_force_ospa


def _all_costs(C):
    r, c = C.shape
    out = []
    for perm in itertools.permutations(range(c), r):
        v = C[np.arange(r), list(perm)].sum()
        if np.isfinite(v):
            out.append(v)
    return sorted(out)




@given(st.integers(0, 2**31 - 1), st.integers(1, 4), st.integers(1, 6), st.integers(1, 30))
def test_ranked_solvers_match_enumeration(seed, r, extra, k):
    rng = np.random.default_rng(seed)
    c = r + extra - 1
    C = rng.normal(size=(r, c))
    C[rng.random((r, c)) < 0.3] = np.inf
    oracle = _all_costs(C)[:k]
    for solver in (murty, kbest_assignments):
        got = solver(C, k)
        assert len(got) == len(oracle)
        np.testing.assert_allclose([t for t, _ in got], oracle, atol=1e-9)
        for total, cols in got:
            assert len(set(cols.tolist())) == r
            assert C[np.arange(r), cols].sum() == pytest.approx(total)


def test_ranked_solvers_cost_gap():
    C = np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 5.0]])
    for solver in (murty, kbest_assignments):
        got = solver(C, 10, max_cost_gap=2.5)
        assert [t for t, _ in got] == [0.0, 2.0]


def test_ranked_solvers_infeasible():
    C = np.array([[np.inf, np.inf], [0.0, 1.0]])
    assert murty(C, 3) == []
    assert kbest_assignments(C, 3) == []


def test_kbest_falls_back_to_murty_under_tiny_budget():
    rng = np.random.default_rng(3)
    C = rng.normal(size=(4, 8))
    a = kbest_assignments(C, 20, node_budget=5)
    b = murty(C, 20)
    np.testing.assert_allclose([t for t, _ in a], [t for t, _ in b])


# --- OSPA --------------------------------------------------------------------

def test_ospa_identical_sets():
    X = np.array([[0.0, 0.0, 1.0, 1.0], [50.0, 10.0, 0.0, 0.0]])
    assert ospa_distance(X, X) == 0.0


def test_ospa_empty_vs_three():
    Y = np.zeros((3, 4))
    assert ospa_distance([], Y) == 100.0
    assert ospa_distance(Y, []) == 100.0
    assert ospa_distance([], []) == 0.0


def test_ospa_single_pair():
    assert ospa_distance([[0.0, 0.0]], [[30.0, 0.0]], OspaParams(100.0, 1.0)) == pytest.approx(30.0)


def test_ospa_uses_positions_only():
    assert ospa_distance([[0.0, 0.0, 5.0, 5.0]], [[3.0, 4.0, -9.0, 1.0]]) == pytest.approx(5.0)


def test_ospa_parameter_validation():
    with pytest.raises(ValueError):
        OspaParams(c=0.0)
    with pytest.raises(ValueError):
        OspaParams(p=0.5)


points = st.lists(st.tuples(st.floats(-200, 200), st.floats(-200, 200)), max_size=5)


@given(points, points, st.floats(1.0, 150.0), st.sampled_from([1.0, 2.0]))
def test_ospa_matches_brute_force(X, Y, c, p):
    X = np.array(X, dtype=float).reshape(-1, 2)
    Y = np.array(Y, dtype=float).reshape(-1, 2)
    d = ospa_distance(X, Y, OspaParams(c, p))
    assert d == pytest.approx(brute_force_ospa(X, Y, c, p), abs=1e-9)
    assert d == pytest.approx(ospa_distance(Y, X, OspaParams(c, p)), abs=1e-12)
    assert 0.0 <= d <= c + 1e-12


@given(points, points, points)
def test_ospa_triangle_inequality(X, Y, Z):
    X, Y, Z = (np.array(v, dtype=float).reshape(-1, 2) for v in (X, Y, Z))
    params = OspaParams(50.0, 1.0)
    assert ospa_distance(X, Z, params) <= ospa_distance(X, Y, params) + ospa_distance(Y, Z, params) + 1e-9
