import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import multivariate_normal

from rfs_fusion.gaussian import GaussianMixture
from rfs_fusion.labeled_rfs import BernoulliComponent, Label, LmbDensity
from rfs_fusion.lmb_filter import (
    BirthModel,
    FilterParams,
    LmbFilter,
    MotionModel,
    SensorModel,
    adaptive_birth,
    extract_estimates,
    lmb_predict,
    lmb_truncate,
    lmb_update,
)

from conftest import gauss4

SENSOR = SensorModel.position_sensor(sigma=25.0, p_D=0.99, clutter_rate=10.0, region=((-500, 500), (-500, 500)))
EXACT = FilterParams(gate_probability=1.0, max_hypotheses=10_000, hypothesis_ratio=0.0)


def test_predict_identity_model():
    motion = MotionModel(np.eye(4), np.zeros((4, 4)), 1.0)
    l = LmbDensity({Label(1, 1): (0.4, gauss4((5.0, 5.0)))})
    out = lmb_predict(l, motion)
    assert out[Label(1, 1)][0] == 0.4
    np.testing.assert_array_equal(out[Label(1, 1)][1].means, l[Label(1, 1)][1].means)


def test_predict_survival_scaling():
    motion = MotionModel.constant_velocity(p_S=0.98)
    out = lmb_predict(LmbDensity({Label(1, 1): (0.5, gauss4((0.0, 0.0)))}), motion)
    assert out[Label(1, 1)][0] == pytest.approx(0.49)


def test_predict_prior_births():
    birth = BirthModel("prior", tuple((0.04, gauss4(p), i + 1) for i, p in enumerate([(0, 0), (100, 0), (0, 100)])))
    out = lmb_predict(LmbDensity(), MotionModel.constant_velocity(), birth.prior_births(3))
    assert sorted(out.keys()) == [Label(3, 1), Label(3, 2), Label(3, 3)]
    np.testing.assert_allclose(out.r, 0.04)


def test_prior_births_respect_times():
    birth = BirthModel("prior", ((0.1, gauss4((0, 0)), 1),), times=(4, 5))
    assert birth.prior_births(3) == []
    assert len(birth.prior_births(4)) == 1


def test_update_missed_detection_formula():
    l = LmbDensity({Label(1, 1): (0.5, gauss4((0.0, 0.0)))})
    post, assoc = lmb_update(l, np.zeros((0, 2)), SENSOR)
    assert post[Label(1, 1)][0] == pytest.approx(0.5 * 0.01 / (1 - 0.5 * 0.99), rel=1e-12)
    assert post[Label(1, 1)][0] == pytest.approx(0.009901, abs=1e-6)
    assert assoc.shape == (0,)


def test_update_blind_sensor_is_identity():
    blind = SensorModel.position_sensor(p_D=0.0)
    l = LmbDensity({Label(1, 1): (0.5, gauss4((0.0, 0.0)))})
    post, assoc = lmb_update(l, np.array([[0.0, 0.0], [100.0, 0.0]]), blind)
    assert post[Label(1, 1)][0] == pytest.approx(0.5)
    np.testing.assert_array_equal(assoc, 0.0)


def test_update_confirming_measurement():
    l = LmbDensity({Label(1, 1): (0.9, gauss4((0.0, 0.0)))})
    post, assoc = lmb_update(l, np.array([[0.0, 0.0]]), SENSOR)
    # two hypotheses (miss / detect) plus the dead one, enumerated by hand
    q = multivariate_normal(np.zeros(2), 100 * np.eye(2) + 625 * np.eye(2)).pdf([0.0, 0.0])
    kappa = 10.0 / 1e6
    det = 0.9 * 0.99 * q / kappa
    miss = 0.9 * 0.01
    dead = 0.1
    assert post[Label(1, 1)][0] == pytest.approx((det + miss) / (det + miss + dead), rel=1e-9)
    assert post[Label(1, 1)][0] > 0.99
    assert assoc[0] == pytest.approx(det / (det + miss + dead), rel=1e-9)
    assert assoc[0] > 0.9


def _brute_update(l, Z, sensor):
    labels = l.labels
    n, m = len(labels), len(Z)
    kappa = sensor.clutter_density
    lik = np.zeros((n, m))
    for i, lab in enumerate(labels):
        r, p = l[lab]
        for j in range(m):
            S = sensor.H @ p.covs[0] @ sensor.H.T + sensor.R
            lik[i, j] = r * sensor.p_D * multivariate_normal(sensor.H @ p.means[0], S).pdf(Z[j]) / kappa
    r = l.r
    r_post = np.zeros(n)
    assoc = np.zeros(m)
    total = 0.0
    # each track is dead (-2), missed (-1) or takes a distinct measurement
    for choice in itertools.product(range(-2, m), repeat=n):
        used = [c for c in choice if c >= 0]
        if len(used) != len(set(used)):
            continue
        w = 1.0
        for i, c in enumerate(choice):
            w *= (1 - r[i]) if c == -2 else r[i] * (1 - sensor.p_D) if c == -1 else lik[i, c]
        total += w
        for i, c in enumerate(choice):
            if c != -2:
                r_post[i] += w
            if c >= 0:
                assoc[c] += w
    return r_post / total, assoc / total


@given(st.integers(0, 2**31 - 1))
def test_update_matches_exhaustive_enumeration(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(1, 4)), int(rng.integers(0, 4))
    l = LmbDensity({Label(1, i + 1): (float(rng.uniform(0.1, 0.95)), gauss4(rng.uniform(-40, 40, 2), 400.0)) for i in range(n)})
    Z = rng.uniform(-60, 60, size=(m, 2))
    post, assoc = lmb_update(l, Z, SENSOR, EXACT)
    r_oracle, a_oracle = _brute_update(l, Z, SENSOR)
    np.testing.assert_allclose([post[lab][0] if lab in post else 0.0 for lab in l.labels], r_oracle, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(assoc, a_oracle, rtol=1e-9, atol=1e-12)


def test_adaptive_birth_single_measurement():
    params = BirthModel("adaptive", expected_births=0.8, r_max=0.3, covariance=np.diag([900.0, 900, 400, 400]))
    out = adaptive_birth(np.array([[10.0, 20.0]]), np.array([0.0]), params, 7)
    assert len(out) == 1
    assert out[0].r == pytest.approx(0.3)
    assert out[0].label.birth_time == 7
    np.testing.assert_allclose(out[0].p.means[0], [10.0, 20.0, 0.0, 0.0])


def test_adaptive_birth_fully_explained():
    params = BirthModel("adaptive", covariance=np.eye(4))
    assert adaptive_birth(np.array([[0.0, 0.0], [5.0, 5.0]]), np.array([1.0, 1.0]), params, 2) == []


def test_adaptive_birth_two_measurements():
    params = BirthModel("adaptive", expected_births=0.8, r_max=0.3, covariance=np.eye(4))
    out = adaptive_birth(np.array([[0.0, 0.0], [100.0, 0.0]]), np.array([0.0, 0.5]), params, 2)
    np.testing.assert_allclose([c.r for c in out], [0.3, 0.8 * 0.5 / 1.5], rtol=1e-12)


def test_truncate():
    l = LmbDensity({Label(1, 1): (1e-5, gauss4((0, 0))), Label(1, 2): (0.5, gauss4((9, 9)))})
    assert lmb_truncate(l, 1e-4).keys() == [Label(1, 2)]
    assert len(lmb_truncate(l, 0.0)) == 2
    assert len(lmb_truncate(l, 1e-6)) == 2


def test_extract_estimates_threshold():
    l = LmbDensity({Label(1, 1): (0.9, gauss4((0, 0))), Label(1, 2): (0.1, gauss4((9, 9)))})
    assert [lab for lab, _ in extract_estimates(l, 0.5)] == [Label(1, 1)]
    assert extract_estimates(LmbDensity({Label(1, 1): (0.3, gauss4((0, 0)))}), 0.5) == []
    assert extract_estimates(LmbDensity({Label(1, 1): (0.5, gauss4((0, 0)))}), 0.5) == []


def test_filter_tracks_a_single_object():
    motion = MotionModel.constant_velocity(p_S=0.99)
    sensor = SensorModel.position_sensor(sigma=5.0, p_D=0.99, clutter_rate=0.0)
    birth = BirthModel("adaptive", covariance=np.diag([100.0, 100, 100, 100]))
    flt = LmbFilter(motion, sensor, birth)
    x = np.array([0.0, 0.0, 3.0, -2.0])
    rng = np.random.default_rng(0)
    for k in range(1, 16):
        flt.step(k, (sensor.H @ x + rng.normal(0, 5, 2))[None, :])
        x = motion.F @ x
    est = flt.estimates()
    assert len(est) == 1
    assert np.linalg.norm(est[0][1][:2] - (np.linalg.inv(motion.F) @ x)[:2]) < 15.0


def test_model_validation():
    with pytest.raises(ValueError):
        MotionModel(np.eye(4), np.eye(4), 1.5)
    with pytest.raises(ValueError):
        SensorModel.position_sensor(p_D=-0.1)
    with pytest.raises(ValueError):
        BirthModel("sometimes")
