"""Gaussian-mixture labeled multi-Bernoulli (LMB) filter for one sensor.

The measurement update forms the exact single-step GLMB posterior of the LMB
prior, keeps a ranked subset of its association hypotheses (Murty's method
on gated, independent track clusters) and projects the result back onto an
LMB by first-moment matching.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import chi2

from .assignment import kbest_assignments
from .gaussian import GaussianMixture, concatenate, gm_kalman_update, gm_prune_merge, kalman_predict
from .labeled_rfs import BernoulliComponent, Label, LmbDensity

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MotionModel:
    F: np.ndarray
    Q: np.ndarray
    p_S: float

    def __post_init__(self):
        if not 0.0 <= self.p_S <= 1.0:
            raise ValueError("survival probability must lie in [0, 1]")
        object.__setattr__(self, "F", np.asarray(self.F, dtype=float))
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float))

    @classmethod
    def constant_velocity(cls, dt: float = 1.0, sigma_v: float = 5.0, p_S: float = 0.98, spatial_dim: int = 2) -> "MotionModel":
        """Nearly-constant-velocity model on ``[position, velocity]`` stacked states."""
        I = np.eye(spatial_dim)
        Z = np.zeros((spatial_dim, spatial_dim))
        F = np.block([[I, dt * I], [Z, I]])
        Q = sigma_v**2 * np.block([[dt**4 / 4 * I, dt**3 / 2 * I], [dt**3 / 2 * I, dt**2 * I]])
        return cls(F, Q, p_S)


@dataclass(frozen=True, eq=False)
class SensorModel:
    """Linear-Gaussian detector with uniform Poisson clutter.

    ``region`` is ``((x_min, x_max), (y_min, y_max), ...)`` in measurement
    coordinates; the clutter intensity is ``clutter_rate / area``.
    """

    H: np.ndarray
    R: np.ndarray
    p_D: float
    clutter_rate: float
    region: tuple

    def __post_init__(self):
        if not 0.0 <= self.p_D <= 1.0:
            raise ValueError("detection probability must lie in [0, 1]")
        if self.clutter_rate < 0:
            raise ValueError("clutter rate must be nonnegative")
        object.__setattr__(self, "H", np.atleast_2d(np.asarray(self.H, dtype=float)))
        object.__setattr__(self, "R", np.atleast_2d(np.asarray(self.R, dtype=float)))
        object.__setattr__(self, "region", tuple(tuple(map(float, b)) for b in self.region))

    @classmethod
    def position_sensor(cls, sigma: float = 25.0, p_D: float = 0.99, clutter_rate: float = 10.0,
                        region=((-500.0, 500.0), (-500.0, 500.0)), spatial_dim: int = 2) -> "SensorModel":
        H = np.hstack([np.eye(spatial_dim), np.zeros((spatial_dim, spatial_dim))])
        return cls(H, sigma**2 * np.eye(spatial_dim), p_D, clutter_rate, region)

    @property
    def area(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.region]))

    @property
    def clutter_density(self) -> float:
        return self.clutter_rate / self.area


@dataclass(frozen=True, eq=False)
class BirthModel:
    """Either a fixed list of birth components or the measurement-driven rule.

    ``prior`` holds ``(r_B, density, index)`` triples; the label at step k
    is ``(k, index)``.  ``times`` optionally restricts prior births to the
    listed steps.
    """

    variant: str
    prior: tuple = ()
    expected_births: float = 0.8
    r_max: float = 0.3
    covariance: np.ndarray | None = None
    times: tuple | None = None

    def __post_init__(self):
        if self.variant not in ("prior", "adaptive"):
            raise ValueError(f"unknown birth variant {self.variant!r}")
        for r, _, _ in self.prior:
            if not 0.0 <= r <= 1.0:
                raise ValueError("birth existence probabilities must lie in [0, 1]")
        if not 0.0 <= self.r_max <= 1.0:
            raise ValueError("r_max must lie in [0, 1]")
        if self.covariance is not None:
            object.__setattr__(self, "covariance", np.asarray(self.covariance, dtype=float))

    def prior_births(self, k: int) -> list[BernoulliComponent]:
        if self.times is not None and k not in self.times:
            return []
        return [BernoulliComponent(Label(k, int(i)), float(r), p) for r, p, i in self.prior]


@dataclass(frozen=True)
class FilterParams:
    truncation: float = 1e-4
    prune: float = 1e-5
    merge: float = 4.0
    max_components: int = 10
    gate_probability: float = 0.9999
    max_hypotheses: int = 200
    # hypotheses less likely than this relative to the best one are not ranked
    hypothesis_ratio: float = 1e-9
    extraction_threshold: float = 0.5


def lmb_predict(posterior: LmbDensity, motion: MotionModel, births: Sequence[BernoulliComponent] = ()) -> LmbDensity:
    """Chapman-Kolmogorov prediction of an LMB plus birth components."""
    out: dict = {}
    for label, (r, p) in posterior.items():
        out[label] = (motion.p_S * r, kalman_predict(p, motion.F, motion.Q))
    for b in births:
        if b.label in out:
            raise ValueError(f"birth label {b.label} collides with a surviving track")
        out[b.label] = (b.r, b.p)
    return LmbDensity(out)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


def lmb_update(predicted: LmbDensity, Z, sensor: SensorModel, params: FilterParams = FilterParams()):
    """Measurement update of an LMB density.

    Returns
    -------
    posterior : LmbDensity
        Moment-matched LMB of the (ranked) GLMB posterior.  Spatial mixtures
        are pruned and merged per ``params``.
    assoc_prob : (m,) array
        Probability that each measurement is assigned to some track.
    """
    Z = np.asarray(Z, dtype=float).reshape(-1, sensor.H.shape[0])
    m = Z.shape[0]
    labels = predicted.labels
    n = len(labels)
    assoc = np.zeros(m)
    if n == 0:
        return LmbDensity(), assoc

    # a clutter-free sensor is treated as having a vanishing clutter intensity
    log_kappa = np.log(max(sensor.clutter_density, 1e-300))
    log_pd, log_qd = _log(sensor.p_D), _log(1.0 - sensor.p_D)
    r = predicted.r
    log_r, log_1mr = _log(r), _log(1.0 - r)

    gate = chi2.ppf(params.gate_probability, Z.shape[1]) if params.gate_probability < 1.0 else np.inf
    updates = []
    # log of r * p_D * q(z) / kappa for each track and measurement
    log_meas = np.full((n, m), -np.inf)
    if m and sensor.p_D > 0:
        for i, lab in enumerate(labels):
            gm = predicted[lab][1]
            upd = gm_kalman_update(gm, Z, sensor.H, sensor.R)
            updates.append(upd)
            gated = (upd.mahalanobis <= gate).any(axis=1)
            lq = logsumexp(upd.log_lik + _log(gm.weights)[None, :], axis=1)
            row = log_r[i] + log_pd + lq - log_kappa
            row[~gated] = -np.inf
            log_meas[i] = row
    else:
        updates = [None] * n
    log_miss = log_r + log_qd
    log_dead = log_1mr

    uf = _UnionFind(n)
    for j in range(m):
        hits = np.flatnonzero(np.isfinite(log_meas[:, j]))
        for a in hits[1:]:
            uf.union(hits[0], a)
    clusters: dict[int, list[int]] = {}
    for i in range(n):
        clusters.setdefault(uf.find(i), []).append(i)

    # W[i] holds the posterior weight of (dead, miss, z_1..z_m) for track i
    W = np.zeros((n, m + 2))
    max_gap = -np.log(params.hypothesis_ratio) if params.hypothesis_ratio > 0 else np.inf
    for rows in clusters.values():
        cols = np.flatnonzero(np.isfinite(log_meas[rows]).any(axis=0))
        if len(rows) == 1:
            i = rows[0]
            lw = np.concatenate([[log_dead[i], log_miss[i]], log_meas[i, cols]])
            if not np.isfinite(lw.max()):
                # the model gives this outcome zero probability; leave the track as predicted
                W[i, 1] = 1.0
                continue
            w = np.exp(lw - logsumexp(lw))
            W[i, 0], W[i, 1] = w[0], w[1]
            W[i, 2 + cols] = w[2:]
            assoc[cols] += w[2:]
            continue
        k = len(rows)
        mc = len(cols)
        # Missed and dead outcomes of an unassigned track do not interact with
        # the other tracks, so they share one column and are split afterwards.
        log_undet = np.logaddexp(log_miss[rows], log_dead[rows])
        with np.errstate(invalid="ignore"):
            p_miss = np.where(np.isfinite(log_undet), np.exp(log_miss[rows] - log_undet), 0.0)
        cost = np.full((k, mc + k), np.inf)
        cost[:, :mc] = -log_meas[np.ix_(rows, cols)]
        cost[np.arange(k), mc + np.arange(k)] = -log_undet
        sols = kbest_assignments(cost, params.max_hypotheses, max_gap)
        if not sols:
            W[rows, 1] = 1.0
            continue
        tot = np.array([c for c, _ in sols])
        w = np.exp(-(tot - tot.min()))
        w /= w.sum()
        A = np.array([a for _, a in sols])  # (h, k)
        for row in range(k):
            i = rows[row]
            a = A[:, row]
            det = a < mc
            np.add.at(W[i], 2 + cols[a[det]], w[det])
            np.add.at(assoc, cols[a[det]], w[det])
            undet = w[~det].sum()
            W[i, 1] += undet * p_miss[row]
            W[i, 0] += undet * (1.0 - p_miss[row])

    out: dict = {}
    for i, lab in enumerate(labels):
        r_post = float(W[i, 1:].sum())
        if r_post <= 0.0:
            continue
        gm = predicted[lab][1]
        parts = []
        if W[i, 1] > 0:
            parts.append(gm.scaled(W[i, 1]))
        upd = updates[i]
        for j in np.flatnonzero(W[i, 2:] > 0):
            post, _ = upd.mixture(gm.weights, j)
            parts.append(post.scaled(W[i, 2 + j]))
        mix = concatenate(parts)
        mix = gm_prune_merge(mix, params.prune, params.merge, params.max_components)
        out[lab] = (min(r_post, 1.0), mix)
    return LmbDensity(out), np.clip(assoc, 0.0, 1.0)


def adaptive_birth(Z, assoc_prob, params: BirthModel, next_time: int) -> list[BernoulliComponent]:
    """Measurement-driven birth components for the next step.

    Each measurement ``z`` with association probability ``r_U(z)`` yields a
    Bernoulli component with existence
    ``min(r_max, (1 - r_U(z)) / sum(1 - r_U) * expected_births)`` centred on
    the measured position with zero velocity.  Labels are
    ``(next_time, i)`` with ``i`` the 1-based position of ``z`` in ``Z``.
    """
    if params.variant != "adaptive":
        raise ValueError("adaptive_birth needs an adaptive birth model")
    Z = np.asarray(Z, dtype=float)
    if Z.size == 0:
        return []
    Z = Z.reshape(len(assoc_prob), -1)
    a = np.asarray(assoc_prob, dtype=float)
    if np.any((a < 0) | (a > 1)):
        raise ValueError("association probabilities must lie in [0, 1]")
    free = 1.0 - a
    total = free.sum()
    if total <= 0:
        return []
    r_b = np.minimum(params.r_max, free / total * params.expected_births)
    P = params.covariance
    d = P.shape[0]
    out = []
    for i, (z, rb) in enumerate(zip(Z, r_b)):
        if rb <= 0:
            continue
        mean = np.zeros(d)
        mean[: z.size] = z
        out.append(BernoulliComponent(Label(next_time, i + 1), float(rb), GaussianMixture.single(mean, P)))
    return out


def lmb_truncate(l: LmbDensity, threshold: float) -> LmbDensity:
    if not 0.0 <= threshold < 1.0:
        raise ValueError("truncation threshold must lie in [0, 1)")
    return LmbDensity({k: v for k, v in l.items() if v[0] >= threshold})


def extract_estimates(l: LmbDensity, threshold: float = 0.5) -> list[tuple]:
    """Labels and states of the components with ``r > threshold`` (strict)."""
    return [(lab, p.largest().mean) for lab, (r, p) in l.items() if r > threshold]


@dataclass
class LmbFilter:
    """Stateful wrapper running predict, update, truncate once per step."""

    motion: MotionModel
    sensor: SensorModel
    birth: BirthModel
    params: FilterParams = field(default_factory=FilterParams)
    posterior: LmbDensity = field(default_factory=LmbDensity)
    _pending_births: list = field(default_factory=list)

    def step(self, k: int, Z) -> LmbDensity:
        births = self.birth.prior_births(k) if self.birth.variant == "prior" else self._pending_births
        predicted = lmb_predict(self.posterior, self.motion, births)
        posterior, assoc = lmb_update(predicted, Z, self.sensor, self.params)
        self.posterior = lmb_truncate(posterior, self.params.truncation)
        if self.birth.variant == "adaptive":
            self._pending_births = adaptive_birth(Z, assoc, self.birth, k + 1)
        return self.posterior

    def estimates(self):
        return extract_estimates(self.posterior, self.params.extraction_threshold)
