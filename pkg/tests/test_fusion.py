import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfs_fusion import serialization
from rfs_fusion.diagnostics import DiscreteSpace, discretize, gci_fuse_discrete, total_variation
from rfs_fusion.fusion import (
    FusionConfig,
    classical_gci_lmb_fuse,
    construct_labeled_fused,
    enumerate_fusion_maps,
    gci_fuse_gmb_pair,
    gmb_to_mb_moment_match,
    r_gci_glmb_fuse,
)
from rfs_fusion.gaussian import GaussianMixture
from rfs_fusion.labeled_rfs import (
    GlmbDensity,
    GmbDensity,
    Label,
    LmbDensity,
    MbDensity,
    cardinality_distribution,
    glmb_to_lmb,
    lmb_to_glmb,
    mb_to_gmb,
    no_object_probability,
    phd,
)
from rfs_fusion.sim import bundled_fixture
from rfs_fusion.validation import phd_by_hypotheses, random_gmb, random_separated_mb

from conftest import gauss4

HALF = FusionConfig(weights=(0.5, 0.5))
GRID = np.linspace(-10, 10, 201)[:, None]


def g1(mean, var=1.0):
    return GaussianMixture.single(np.array([mean]), np.array([[var]]))


# --- moment matching ---------------------------------------------------------

def test_moment_match_fixed_point():
    mb = MbDensity({0: (0.3, g1(0)), 1: (0.9, g1(5))})
    back = gmb_to_mb_moment_match(mb_to_gmb(mb))
    for i in (0, 1):
        assert back[i][0] == pytest.approx(mb[i][0], rel=1e-12)
        np.testing.assert_allclose(back[i][1].means, mb[i][1].means)


def test_moment_match_arithmetic():
    g = GmbDensity([0], [([0], 0, np.log(0.6)), ([], 0, np.log(0.4))], {0: {0: g1(0)}})
    assert gmb_to_mb_moment_match(g)[0][0] == pytest.approx(0.6)


@given(st.integers(0, 2**31 - 1))
def test_moment_match_preserves_phd(seed):
    g = random_gmb(np.random.default_rng(seed), [0, 1, 2])
    np.testing.assert_allclose(phd(gmb_to_mb_moment_match(g)).pdf(GRID), phd_by_hypotheses(g, GRID), atol=1e-9)


# --- fusion maps -------------------------------------------------------------

def test_fusion_map_counts():
    assert len(enumerate_fusion_maps([], [1, 2])) == 1
    assert len(enumerate_fusion_maps([1, 2], [1, 2, 3])) == 6
    assert len(enumerate_fusion_maps(["a"], ["b"])) == 1
    with pytest.raises(ValueError):
        enumerate_fusion_maps([1, 2], [1])


def test_fusion_maps_are_injective():
    for fm in enumerate_fusion_maps([1, 2], [1, 2, 3]):
        assert len(set(fm.as_dict().values())) == 2


# --- pairwise GMB fusion -----------------------------------------------------

def test_pair_fusion_identical_separated_mb():
    mb = MbDensity({0: (0.7, g1(0.0)), 1: (0.4, g1(100.0)), 2: (0.9, g1(-100.0))})
    fused = gmb_to_mb_moment_match(gci_fuse_gmb_pair(mb, mb, HALF))
    for i in range(3):
        assert fused[i][0] == pytest.approx(mb[i][0], abs=1e-6)
        np.testing.assert_allclose(fused[i][1].means, mb[i][1].means, atol=1e-9)
        np.testing.assert_allclose(fused[i][1].covs, mb[i][1].covs, atol=1e-9)


def test_pair_fusion_empty_first_index_space():
    mb2 = MbDensity({0: (0.6, g1(0.0))})
    fused = gci_fuse_gmb_pair(MbDensity(), mb2, HALF)
    assert fused.sets == [()]
    assert no_object_probability(fused) == 1.0


def test_pair_fusion_two_identical_bernoullis():
    mb = MbDensity({0: (0.8, g1(1.0, 2.0))})
    fused = gci_fuse_gmb_pair(mb, mb, HALF)
    np.testing.assert_allclose(sorted(fused.weights), [0.2, 0.8], rtol=1e-12)
    assert gmb_to_mb_moment_match(fused)[0][0] == pytest.approx(0.8, rel=1e-12)


@settings(max_examples=15)
@given(st.integers(0, 2**31 - 1))
def test_pair_fusion_matches_discrete_oracle(seed):
    rng = np.random.default_rng(seed)
    centres = np.array([-15.0, 15.0])
    mb1 = random_separated_mb(rng, centres[rng.choice(2, int(rng.integers(1, 3)), replace=False)])
    mb2 = random_separated_mb(rng, centres[rng.choice(2, int(rng.integers(1, 3)), replace=False)])
    w = float(rng.uniform(0.2, 0.8))
    fused = gci_fuse_gmb_pair(mb1, mb2, FusionConfig(weights=(w, 1 - w)))
    space = DiscreteSpace.grid_1d(-30.0, 30.0, 300, max_cardinality=2)
    oracle = gci_fuse_discrete([(discretize(mb1, space), w), (discretize(mb2, space), 1 - w)])
    assert total_variation(discretize(fused, space), oracle) < 1e-3


def test_pair_fusion_rejects_bad_weights():
    mb = MbDensity({0: (0.8, g1(1.0))})
    with pytest.raises(ValueError):
        FusionConfig(weights=(0.6, 0.5))
    with pytest.raises(ValueError):
        gci_fuse_gmb_pair(mb, mb, FusionConfig(weights=(1.0, 0.0)))
    with pytest.raises(ValueError):
        gci_fuse_gmb_pair(mb, mb, FusionConfig(weights=(0.2, 0.3, 0.5)))


def test_pair_fusion_respects_hypothesis_cap():
    mb = MbDensity({i: (0.5, g1(0.1 * i, 4.0)) for i in range(6)})
    fused = gci_fuse_gmb_pair(mb, mb, FusionConfig(weights=(0.5, 0.5), max_hypotheses=25))
    assert len(fused) <= 25


# --- labeled reconstruction --------------------------------------------------

@given(st.integers(0, 2**31 - 1))
def test_labeled_reconstruction_keeps_moments(seed):
    labels = [Label(1, 1), Label(1, 2), Label(3, 1)]
    g = random_gmb(np.random.default_rng(seed), labels)
    lab = construct_labeled_fused(g, labels)
    assert isinstance(lab, GlmbDensity)
    np.testing.assert_array_equal(cardinality_distribution(lab), cardinality_distribution(g))
    np.testing.assert_allclose(phd_by_hypotheses(lab, GRID), phd_by_hypotheses(g, GRID), atol=1e-12)
    np.testing.assert_allclose(phd(lab).pdf(GRID), phd_by_hypotheses(g, GRID), atol=1e-9)


def test_labeled_reconstruction_empty():
    g = GmbDensity([], [([], 0, 0.0)], {0: {}})
    assert no_object_probability(construct_labeled_fused(g, [])) == 1.0


def test_labeled_reconstruction_requires_home_labels():
    g = GmbDensity([Label(1, 1)], [([Label(1, 1)], 0, 0.0)], {0: {Label(1, 1): g1(0)}})
    with pytest.raises(ValueError):
        construct_labeled_fused(g, [Label(2, 2)])


# --- R-GCI and classical fusion ----------------------------------------------

def test_rgci_identical_inputs(separated_lmb):
    g = lmb_to_glmb(separated_lmb)
    fused = r_gci_glmb_fuse([g, g], HALF)
    assert 1 - no_object_probability(fused) == pytest.approx(1 - no_object_probability(g), abs=1e-6)
    assert set(fused.space) <= set(g.space)


def _example1():
    return [serialization.load(bundled_fixture(f"example1_sensor{i}")) for i in (1, 2)]


def test_example1_robust_versus_classical():
    g1_, g2_ = _example1()
    # the two sensors keep one label hypothesis each, and they differ
    assert {s for s in g1_.sets if s} != {s for s in g2_.sets if s}
    robust = r_gci_glmb_fuse([g1_, g2_], HALF)
    assert 1 - no_object_probability(robust) > 0.5
    classical = classical_gci_lmb_fuse(glmb_to_lmb(g1_), glmb_to_lmb(g2_), HALF)
    assert 1 - no_object_probability(classical) < 0.01
    assert all(r < 0.5 for r in classical.r)


def test_rgci_three_sensor_order_independence():
    base = [(0.0, 0.0), (300.0, 0.0), (0.0, 300.0)]
    rng = np.random.default_rng(7)
    locs = []
    for s in range(3):
        comps = {Label(1, i + 1): (float(rng.uniform(0.6, 0.95)), gauss4(np.add(p, rng.normal(0, 3, 2)), 100.0))
                 for i, p in enumerate(base)}
        locs.append(lmb_to_glmb(LmbDensity(comps)))
    cfg = FusionConfig.uniform(3)
    a = glmb_to_lmb(r_gci_glmb_fuse([locs[0], locs[1], locs[2]], cfg))
    b = glmb_to_lmb(r_gci_glmb_fuse([locs[0], locs[2], locs[1]], cfg))
    assert a.keys() == b.keys()
    for lab in a.keys():
        assert a[lab][0] == pytest.approx(b[lab][0], abs=1e-6)


def test_rgci_home_sensor_labels():
    l1 = LmbDensity({Label(1, 1): (0.9, gauss4((0.0, 0.0)))})
    l2 = LmbDensity({Label(2, 7): (0.9, gauss4((1.0, 1.0)))})
    fused = r_gci_glmb_fuse([l1, l2], HALF, home_sensor=1)
    assert set(fused.space) == {Label(2, 7)}


def test_rgci_input_validation(separated_lmb):
    with pytest.raises(ValueError):
        r_gci_glmb_fuse([separated_lmb], FusionConfig(weights=(1.0,)))
    with pytest.raises(ValueError):
        r_gci_glmb_fuse([separated_lmb, separated_lmb], FusionConfig.uniform(3))


def test_classical_identical_inputs(separated_lmb):
    fused = classical_gci_lmb_fuse(separated_lmb, separated_lmb, HALF)
    for lab in separated_lmb.keys():
        assert fused[lab][0] == pytest.approx(separated_lmb[lab][0], abs=1e-9)
        np.testing.assert_allclose(fused[lab][1].means, separated_lmb[lab][1].means, atol=1e-9)


def test_classical_unmatched_label_vanishes():
    l1 = LmbDensity({Label(1, 1): (0.9, gauss4((0.0, 0.0)))})
    l2 = LmbDensity({Label(1, 2): (0.9, gauss4((0.0, 0.0)))})
    fused = classical_gci_lmb_fuse(l1, l2, HALF)
    assert fused[Label(1, 1)][0] == 0.0
    assert fused[Label(1, 2)][0] == 0.0
