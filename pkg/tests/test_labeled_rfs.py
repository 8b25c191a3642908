import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rfs_fusion import serialization
from rfs_fusion.diagnostics import DiscreteSpace, discretize, marginalize
from rfs_fusion.gaussian import GaussianMixture
from rfs_fusion.labeled_rfs import (
    GlmbDensity,
    GmbDensity,
    Label,
    LmbDensity,
    MbDensity,
    cardinality_distribution,
    expected_cardinality,
    glmb_to_gmb,
    glmb_to_lmb,
    lmb_to_glmb,
    lmb_to_mb,
    no_object_probability,
    phd,
)
from rfs_fusion.validation import phd_by_hypotheses, random_glmb, random_gmb

L1, L2, L3 = Label(1, 1), Label(1, 2), Label(2, 1)


def g1(mean, var=1.0):
    return GaussianMixture.single(np.array([mean]), np.array([[var]]))


GRID = np.linspace(-10, 10, 201)[:, None]


def test_glmb_to_gmb_single_hypothesis():
    p = g1(0.0)
    g = GlmbDensity([L1], [([L1], 0, 0.0)], {0: {L1: p}})
    u = glmb_to_gmb(g)
    assert isinstance(u, GmbDensity)
    assert u.sets == [(L1,)]
    assert u.density(0, L1) is p


def test_glmb_to_gmb_empty_only():
    g = GlmbDensity([], [([], 0, 0.0)], {0: {}})
    assert no_object_probability(glmb_to_gmb(g)) == 1.0


def test_glmb_to_gmb_matches_label_sum_on_two_cells():
    space = DiscreteSpace.grid_1d(-1.0, 1.0, 2, max_cardinality=2)
    pa, pb, pc = g1(-0.5, 0.3), g1(0.5, 0.2), g1(0.1, 0.5)
    g = GlmbDensity(
        [L1, L2],
        [([L1, L2], 0, np.log(0.6)), ([L1], 1, np.log(0.3)), ([], 0, np.log(0.1))],
        {0: {L1: pa, L2: pb}, 1: {L1: pc, L2: pb}},
    )
    va, vb, vc = (space.evaluate(p, coverage=1.0) for p in (pa, pb, pc))
    lab = discretize(g, space, normalize=False, coverage=1.0)
    unl = discretize(glmb_to_gmb(g), space, normalize=False, coverage=1.0)
    np.testing.assert_allclose(marginalize(lab).terms[2], unl.terms[2], rtol=1e-12)
    # brute force: sum over ordered label pairs of the labeled density
    for i, j in itertools.product(range(2), repeat=2):
        brute = 0.6 * (va[i] * vb[j] + vb[i] * va[j])
        assert unl.terms[2][i, j] == pytest.approx(brute, rel=1e-12)
    for i in range(2):
        assert unl.terms[1][i] == pytest.approx(0.3 * vc[i], rel=1e-12)
    assert unl.terms[0] == pytest.approx(0.1)


def test_lmb_to_mb_single():
    p = g1(0.0)
    m = lmb_to_mb(LmbDensity({L1: (0.5, p)}))
    assert isinstance(m, MbDensity)
    assert m[L1] == (0.5, p)


def test_empty_densities():
    assert no_object_probability(lmb_to_mb(LmbDensity())) == 1.0
    np.testing.assert_array_equal(cardinality_distribution(LmbDensity()), [1.0])
    assert len(phd(MbDensity(), dim=1)) == 0
    assert np.all(phd(MbDensity(), dim=1).pdf(GRID) == 0)


def test_cardinality_two_halves():
    l = LmbDensity({L1: (0.5, g1(0)), L2: (0.5, g1(3))})
    np.testing.assert_allclose(cardinality_distribution(l), [0.25, 0.5, 0.25])
    np.testing.assert_allclose(cardinality_distribution(lmb_to_mb(l)), [0.25, 0.5, 0.25])
    assert no_object_probability(l) == pytest.approx(0.25)


def test_glmb_to_lmb_fixed_point():
    l = LmbDensity({L1: (0.3, g1(0)), L2: (0.8, g1(4))})
    back = glmb_to_lmb(lmb_to_glmb(l))
    for lab in l.keys():
        assert back[lab][0] == pytest.approx(l[lab][0], rel=1e-12)
        np.testing.assert_allclose(back[lab][1].means, l[lab][1].means)


def test_glmb_to_lmb_arithmetic():
    g = GlmbDensity([L1], [([L1], 0, np.log(0.3)), ([], 0, np.log(0.7))], {0: {L1: g1(0)}})
    assert glmb_to_lmb(g)[L1][0] == pytest.approx(0.3)


def test_no_object_probability_glmb():
    g = GlmbDensity([L1], [([L1], 0, np.log(0.9)), ([], 0, np.log(0.1))], {0: {L1: g1(0)}})
    assert no_object_probability(g) == pytest.approx(0.1)


def test_single_certain_bernoulli_phd():
    p = g1(1.0, 2.0)
    v = phd(LmbDensity({L1: (1.0, p)}))
    np.testing.assert_allclose(v.pdf(GRID), p.pdf(GRID))


@given(st.integers(0, 2**31 - 1))
def test_glmb_to_lmb_preserves_phd(seed):
    rng = np.random.default_rng(seed)
    g = random_glmb(rng, [L1, L2, L3], max_card=3, n_hyp=6)
    np.testing.assert_allclose(phd(glmb_to_lmb(g)).pdf(GRID), phd_by_hypotheses(g, GRID), atol=1e-9)


@given(st.integers(0, 2**31 - 1))
def test_phd_mass_is_expected_cardinality(seed):
    rng = np.random.default_rng(seed)
    g = random_gmb(rng, [0, 1, 2])
    assert phd(g).total_weight == pytest.approx(expected_cardinality(g), rel=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_gmb_cardinality_by_grouping(seed):
    rng = np.random.default_rng(seed)
    g = random_gmb(rng, [0, 1, 2])
    oracle = np.zeros(4)
    for s, _, w in g.hypotheses():
        oracle[len(s)] += w
    np.testing.assert_allclose(cardinality_distribution(g), oracle, atol=1e-15)


def test_hypothesis_validation():
    with pytest.raises(ValueError):
        GlmbDensity([L1], [([L1, L1], 0, 0.0)], {0: {L1: g1(0)}})
    with pytest.raises(ValueError):
        GlmbDensity([L1], [([L1], 0, 0.0)], {0: {}})
    with pytest.raises(ValueError):
        LmbDensity({L1: (1.5, g1(0))})


# --- serialisation -----------------------------------------------------------

def _same_gm(a, b):
    return (np.array_equal(a.weights, b.weights) and np.array_equal(a.means, b.means)
            and np.array_equal(a.covs, b.covs))


@given(st.integers(0, 2**31 - 1))
def test_serialization_round_trip_glmb(seed):
    rng = np.random.default_rng(seed)
    g = random_glmb(rng, [L1, L2, L3])
    back = serialization.loads(serialization.dumps(g))
    assert isinstance(back, GlmbDensity)
    assert back.space == g.space and back.sets == g.sets and back.keys == g.keys
    np.testing.assert_array_equal(back.log_weights, g.log_weights)
    for k in g.densities:
        for e in g.densities[k]:
            assert _same_gm(back.densities[k][e], g.densities[k][e])


def test_serialization_round_trip_lmb(separated_lmb):
    back = serialization.loads(serialization.dumps(separated_lmb))
    assert isinstance(back, LmbDensity)
    for lab in separated_lmb.keys():
        assert back[lab][0] == separated_lmb[lab][0]
        assert _same_gm(back[lab][1], separated_lmb[lab][1])


def test_serialization_round_trip_gmb_with_tuple_keys():
    g = GmbDensity([0, 1], [([0, 1], (0, "a"), -0.5), ([], (0, "a"), -1.0)], {(0, "a"): {0: g1(0), 1: g1(1)}})
    back = serialization.loads(serialization.dumps(g))
    assert back.keys == [(0, "a"), (0, "a")]


def test_serialization_rejects_bad_documents():
    with pytest.raises(serialization.SchemaError):
        serialization.loads('{"components": []}')
    with pytest.raises(serialization.SchemaError):
        serialization.loads('{"kind": "weird"}')
    with pytest.raises(serialization.SchemaError):
        serialization.loads('{"kind": "lmb", "components": [{"key": 1}]}')
