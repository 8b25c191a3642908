"""Randomised invariant suites, shared by the test-suite and ``rfs-fusion validate``.

Each ``check_*`` function draws its own instances from a seeded generator and
returns a :class:`SuiteResult` holding the worst deviation seen.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .assignment import kbest_assignments, murty
from .diagnostics import (
    DiscreteSpace,
    corollary2_check,
    discretize,
    expected_label_coefficient,
    gci_fuse_discrete,
    indicator_threshold,
    label_inconsistency_indicator,
    total_variation,
    yes_probability_from_indicator,
)
from .fusion import FusionConfig, construct_labeled_fused, gci_fuse_gmb_pair, gmb_to_mb_moment_match
from .gaussian import GaussianMixture
from .labeled_rfs import (
    GlmbDensity,
    GmbDensity,
    Label,
    MbDensity,
    cardinality_distribution,
    phd,
)
from .ospa import OspaParams, ospa_distance


@dataclass
class SuiteResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    instances: int
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: worst={self.worst:.3g} tol={self.tolerance:.3g} n={self.instances} ({self.seconds:.1f}s)"


# ---------------------------------------------------------------------------
# random instances


def random_gm_1d(rng: np.random.Generator, lo: float = -5.0, hi: float = 5.0, max_components: int = 2) -> GaussianMixture:
    n = int(rng.integers(1, max_components + 1))
    return GaussianMixture(
        rng.dirichlet(np.ones(n)),
        rng.uniform(lo, hi, size=(n, 1)),
        rng.uniform(0.3, 1.5, size=(n, 1, 1)) ** 2,
    )


def random_glmb(rng: np.random.Generator, pool, max_card: int = 2, n_hyp: int = 4, n_keys: int = 2) -> GlmbDensity:
    """A GLMB on a 1-D state space with labels drawn from ``pool``."""
    pool = list(pool)
    keys = list(range(n_keys))
    dens = {key: {lab: random_gm_1d(rng) for lab in pool} for key in keys}
    hyps = []
    for _ in range(n_hyp):
        n = int(rng.integers(0, max_card + 1))
        labs = [pool[i] for i in rng.choice(len(pool), size=min(n, len(pool)), replace=False)]
        hyps.append((labs, keys[int(rng.integers(len(keys)))], float(np.log(rng.uniform(0.05, 1.0)))))
    hyps.append(([], keys[0], float(np.log(rng.uniform(0.01, 0.3)))))
    return GlmbDensity(pool, hyps, dens)


def random_gmb(rng: np.random.Generator, space, max_card: int = 3, n_hyp: int = 6, n_keys: int = 3) -> GmbDensity:
    space = list(space)
    keys = list(range(n_keys))
    dens = {key: {e: random_gm_1d(rng) for e in space} for key in keys}
    hyps = []
    for _ in range(n_hyp):
        n = int(rng.integers(0, min(max_card, len(space)) + 1))
        sub = [space[i] for i in rng.choice(len(space), size=n, replace=False)]
        hyps.append((sub, keys[int(rng.integers(len(keys)))], float(np.log(rng.uniform(0.05, 1.0)))))
    return GmbDensity(space, hyps, dens)


def random_labeled_instance(rng: np.random.Generator, n_sensors: int = 2, n_cells: int = 8):
    """Discretised labeled densities with random fusion weights, ready for the diagnostics."""
    pool = [Label(1, 1), Label(1, 2), Label(2, 1)]
    glmbs = [random_glmb(rng, pool) for _ in range(n_sensors)]
    space = DiscreteSpace.covering(glmbs, axes=(0,), n_cells=n_cells, max_cardinality=2)
    w = rng.dirichlet(np.ones(n_sensors))
    return [(discretize(g, space), float(wi)) for g, wi in zip(glmbs, w)]


def random_separated_mb(rng: np.random.Generator, centres, spread: float = 0.3) -> MbDensity:
    comps = {}
    for i, c in enumerate(centres):
        comps[i] = (
            float(rng.uniform(0.2, 0.95)),
            GaussianMixture.single(np.array([c + rng.normal(0, spread)]), np.array([[rng.uniform(0.5, 1.5) ** 2]])),
        )
    return MbDensity(comps)


# ---------------------------------------------------------------------------
# suites


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def check_yes_probability_identity(n: int = 200, seed: int = 0, tol: float = 1e-9) -> SuiteResult:
    """Labeled yes-object probability versus the one implied by ``d_G``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        rep = label_inconsistency_indicator(random_labeled_instance(rng))
        worst = max(worst, corollary2_check(rep))
    return SuiteResult("yes-object identity", worst < tol, worst, tol, n)


@_timed
def check_divergence_decomposition(n: int = 200, seed: int = 1, tol: float = 1e-9) -> SuiteResult:
    """``G(labeled) - G(unlabeled)`` against ``-log E[mu]`` from the conditional label tables."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        inst = random_labeled_instance(rng)
        rep = label_inconsistency_indicator(inst)
        d_mu = -math.log(expected_label_coefficient(inst))
        worst = max(worst, abs(rep.d_G - d_mu))
    return SuiteResult("divergence decomposition", worst < tol, worst, tol, n)


@_timed
def check_indicator_bounds(n: int = 1000, seed: int = 2, slack: float = 1e-12) -> SuiteResult:
    """``0 <= d_G <= -log pi(empty)``; ``worst`` counts violations."""
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(n):
        rep = label_inconsistency_indicator(random_labeled_instance(rng, n_cells=6))
        if not (-slack <= rep.d_G <= rep.d_G_upper + slack):
            violations += 1
    return SuiteResult("indicator bounds", violations == 0, float(violations), 0.0, n)


@_timed
def check_threshold(tol: float = 1e-6) -> SuiteResult:
    """The ``d_G`` at which the labeled yes-object probability falls to one half."""
    d = indicator_threshold(0.999, 0.5)
    err = max(abs(d - math.log(500.0)), abs(yes_probability_from_indicator(d, 0.999) - 0.5))
    return SuiteResult("indicator threshold", err < tol, err, tol, 1)


@_timed
def check_fusion_oracle(n: int = 20, seed: int = 3, tol: float = 1e-3, n_cells: int = 400) -> SuiteResult:
    """Pairwise GMB fusion against brute-force GCI of the discretised MB inputs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    cfg = FusionConfig(weights=(0.5, 0.5))
    for _ in range(n):
        k1, k2 = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        centres = np.array([-15.0, 15.0])
        mb1 = random_separated_mb(rng, centres[rng.choice(2, k1, replace=False)])
        mb2 = random_separated_mb(rng, centres[rng.choice(2, k2, replace=False)])
        w = float(rng.uniform(0.2, 0.8))
        cfg = FusionConfig(weights=(w, 1.0 - w))
        fused = gci_fuse_gmb_pair(mb1, mb2, cfg)
        space = DiscreteSpace.grid_1d(-30.0, 30.0, n_cells, max_cardinality=2)
        oracle = gci_fuse_discrete([(discretize(mb1, space), w), (discretize(mb2, space), 1.0 - w)])
        worst = max(worst, total_variation(discretize(fused, space), oracle))
    return SuiteResult("fusion oracle", worst < tol, worst, tol, n)


def phd_by_hypotheses(d, x: np.ndarray) -> np.ndarray:
    """Intensity at ``x`` summed hypothesis by hypothesis, ``sum_h w_h sum_{e in S_h} p_e(x)``."""
    v = np.zeros(len(x))
    for s, key, w in d.hypotheses():
        for e in s:
            v += w * d.density(key, e).pdf(x)
    return v


@_timed
def check_moment_preservation(n: int = 100, seed: int = 4, tol_mm: float = 1e-9, tol_lab: float = 1e-12) -> SuiteResult:
    """Moment matching keeps the PHD; labeled reconstruction keeps cardinality and PHD."""
    rng = np.random.default_rng(seed)
    grid = np.linspace(-8.0, 8.0, 161)[:, None]
    worst = 0.0
    ok = True
    for _ in range(n):
        labels = [Label(1, i + 1) for i in range(int(rng.integers(1, 5)))]
        g = random_gmb(rng, labels)
        oracle = phd_by_hypotheses(g, grid)
        mb = gmb_to_mb_moment_match(g)
        err = float(np.max(np.abs(phd(mb, 1).pdf(grid) - oracle)))
        ok &= err < tol_mm
        worst = max(worst, err)
        lab = construct_labeled_fused(g, labels)
        ok &= bool(np.array_equal(cardinality_distribution(lab), cardinality_distribution(g)))
        err = float(np.max(np.abs(phd_by_hypotheses(lab, grid) - oracle)))
        ok &= err < tol_lab
        worst = max(worst, err)
    return SuiteResult("moment preservation", bool(ok), worst, tol_mm, n)


def brute_force_ospa(X, Y, c: float, p: float) -> float:
    X, Y = np.atleast_2d(X), np.atleast_2d(Y)
    m, n = len(X), len(Y)
    if m == 0 and n == 0:
        return 0.0
    if m > n:
        X, Y, m, n = Y, X, n, m
    if m == 0:
        return c
    best = math.inf
    for perm in itertools.permutations(range(n), m):
        d = sum(min(c, float(np.linalg.norm(X[i, :2] - Y[j, :2]))) ** p for i, j in enumerate(perm))
        best = min(best, d)
    return ((best + c**p * (n - m)) / n) ** (1.0 / p)


@_timed
def check_ospa(n: int = 500, seed: int = 5, tol: float = 1e-12) -> SuiteResult:
    """Assignment-based OSPA against permutation enumeration."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        c = float(rng.uniform(20.0, 150.0))
        p = float(rng.choice([1.0, 2.0, 3.0]))
        X = rng.uniform(-100, 100, size=(int(rng.integers(0, 7)), 4))
        Y = rng.uniform(-100, 100, size=(int(rng.integers(0, 7)), 4))
        a = ospa_distance(X, Y, OspaParams(c, p))
        worst = max(worst, abs(a - brute_force_ospa(X.reshape(-1, 4), Y.reshape(-1, 4), c, p)))
    return SuiteResult("ospa oracle", worst < tol, worst, tol, n)


@_timed
def check_ranked_assignment(n: int = 300, seed: int = 6, tol: float = 1e-9) -> SuiteResult:
    """Ranked assignment costs against exhaustive enumeration."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        r = int(rng.integers(1, 5))
        c = int(rng.integers(r, 7))
        C = rng.normal(size=(r, c))
        C[rng.random((r, c)) < 0.3] = np.inf
        costs = sorted(
            v for perm in itertools.permutations(range(c), r) if np.isfinite(v := C[np.arange(r), list(perm)].sum())
        )
        k = int(rng.integers(1, 25))
        for solver in (murty, kbest_assignments):
            got = [t for t, _ in solver(C, k)]
            if len(got) != min(k, len(costs)):
                worst = math.inf
            elif got:
                worst = max(worst, float(np.max(np.abs(np.array(got) - np.array(costs[: len(got)])))))
    return SuiteResult("ranked assignment", worst < tol, worst, tol, n)


SUITES = {
    "assignment": check_ranked_assignment,
    "ospa": check_ospa,
    "threshold": check_threshold,
    "moments": check_moment_preservation,
    "fusion": check_fusion_oracle,
    "identity": check_yes_probability_identity,
    "decomposition": check_divergence_decomposition,
    "bounds": check_indicator_bounds,
}


def run_all(names=None) -> list[SuiteResult]:
    return [SUITES[name]() for name in (names or SUITES)]
