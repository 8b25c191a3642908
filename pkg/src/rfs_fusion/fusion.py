"""Generalized covariance intersection (GCI) fusion of multi-object densities.

Two fusion rules live here:

* the robust pipeline, which forgets labels, fuses the unlabeled marginals
  over all track-matching hypotheses (fusion maps) and then re-attaches the
  home sensor's labels, and
* the classical label-wise rule for LMB densities, which trusts that equal
  labels at different sensors denote the same object.
"""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, replace
from itertools import permutations
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .assignment import kbest_assignments
from .gaussian import (
    GaussianMixture,
    IncompatibleDensitiesError,
    gm_prune_merge,
    log_gci_fuse,
    pairwise_products,
    powered_log_weights,
    same_mixture,
)
from .labeled_rfs import (
    GlmbDensity,
    GmbDensity,
    LmbDensity,
    MbDensity,
    glmb_to_gmb,
    gmb_to_glmb,
    gmb_to_mb,
    lmb_to_glmb,
    lmb_to_mb,
    mb_to_gmb,
)

log = logging.getLogger(__name__)

# logs of probabilities are clipped here when used only for ranking
_LOG_TINY = np.log(1e-300)


@dataclass(frozen=True)
class FusionConfig:
    """Parameters of a fusion call.

    Attributes
    ----------
    weights : tuple of float
        Nonnegative fusion weights, one per density, summing to one.
    max_hypotheses : int
        Cap on the number of fused hypotheses kept.
    weight_floor : float
        Hypotheses lighter than this fraction of the heaviest one are dropped.
    eta_floor : float
        Track pairs whose GCI normaliser is below this cannot be matched.
    prune, merge, max_components : float, float, int
        Mixture reduction applied to each fused single-object density.
    """

    weights: tuple = (0.5, 0.5)
    max_hypotheses: int = 1000
    weight_floor: float = 1e-6
    eta_floor: float = 1e-30
    prune: float = 1e-5
    merge: float = 4.0
    max_components: int = 10

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if any(x < 0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
            raise ValueError(f"fusion weights must be nonnegative and sum to one, got {w}")
        if self.max_hypotheses < 1:
            raise ValueError("max_hypotheses must be positive")
        if not 0.0 <= self.weight_floor < 1.0:
            raise ValueError("weight_floor must lie in [0, 1)")

    @classmethod
    def uniform(cls, n: int, **kwargs) -> "FusionConfig":
        return cls(weights=tuple([1.0 / n] * n), **kwargs)


@dataclass(frozen=True)
class FusionMap:
    """Injective correspondence from indices of one density to indices of another."""

    mapping: tuple  # ((i, j), ...)

    def __post_init__(self):
        targets = [j for _, j in self.mapping]
        if len(set(targets)) != len(targets):
            raise ValueError("fusion map is not injective")

    def __call__(self, i):
        return dict(self.mapping)[i]

    def as_dict(self) -> dict:
        return dict(self.mapping)


def enumerate_fusion_maps(I1: Sequence, I2: Sequence) -> list[FusionMap]:
    """Every injective map from ``I1`` into ``I2``."""
    I1, I2 = list(I1), list(I2)
    if len(I1) > len(I2):
        raise ValueError("the domain of a fusion map cannot be larger than its codomain; swap the operands")
    return [FusionMap(tuple(zip(I1, image))) for image in permutations(I2, len(I1))]


def as_gmb(d) -> GmbDensity:
    """Unlabeled hypothesis-mixture view of any density type."""
    if isinstance(d, GmbDensity):
        return d
    if isinstance(d, GlmbDensity):
        return glmb_to_gmb(d)
    if isinstance(d, LmbDensity):
        return glmb_to_gmb(lmb_to_glmb(d))
    if isinstance(d, MbDensity):
        return mb_to_gmb(d)
    raise TypeError(f"unsupported density type {type(d).__name__}")


def gmb_to_mb_moment_match(g) -> MbDensity:
    """First-moment matched MB of any density (labels are forgotten)."""
    if isinstance(g, MbDensity):
        return g
    if isinstance(g, LmbDensity):
        return lmb_to_mb(g)
    if isinstance(g, GlmbDensity):
        g = glmb_to_gmb(g)
    if isinstance(g, GmbDensity):
        return gmb_to_mb(g)
    raise TypeError(f"unsupported density type {type(g).__name__}")


class _PairTable:
    """GCI of every (i, j) single-object density pair that can be matched.

    ``log_eta[i, j]`` is the log normaliser (``-inf`` where the pair is not
    allowed); the fused densities are built on first request.
    """

    def __init__(self, n1: int, n2: int, cfg: FusionConfig):
        self.log_eta = np.full((n1, n2), -np.inf)
        self.cfg = cfg
        self._cache: dict = {}
        self._parts = None
        # pairs of identical densities: their geometric mean is known exactly
        self._exact: dict = {}

    def density(self, a: int, b: int) -> GaussianMixture:
        if (a, b) in self._exact:
            return self._exact[(a, b)]
        if (a, b) not in self._cache:
            o1, o2, means, covs, logw = self._parts
            rows, cols = o1 == a, o2 == b
            lw = logw[np.ix_(rows, cols)].ravel()
            gm = GaussianMixture(
                np.exp(lw - self.log_eta[a, b]),
                means[np.ix_(rows, cols)].reshape(-1, means.shape[-1]),
                covs[np.ix_(rows, cols)].reshape(-1, covs.shape[-1], covs.shape[-1]),
            )
            cfg = self.cfg
            self._cache[(a, b)] = gm_prune_merge(gm, cfg.prune, cfg.merge, cfg.max_components)
        return self._cache[(a, b)]


def _pair_table(mb1: MbDensity, mb2: MbDensity, w1: float, w2: float, cfg: FusionConfig) -> _PairTable:
    n1, n2 = len(mb1), len(mb2)
    out = _PairTable(n1, n2, cfg)
    if n1 == 0 or n2 == 0:
        return out

    def stack(mb, w):
        gms = [p for _, p in mb._items.values()]
        owner = np.concatenate([np.full(len(p), i) for i, p in enumerate(gms)])
        means = np.concatenate([p.means for p in gms])
        covs = np.concatenate([p.covs for p in gms]) / w
        lw = np.concatenate([powered_log_weights(p, w) for p in gms])
        return owner, means, covs, lw

    o1, m1, P1, lw1 = stack(mb1, w1)
    o2, m2, P2, lw2 = stack(mb2, w2)
    means, covs, logw = pairwise_products(m1, P1, lw1, m2, P2, lw2)
    # segment-wise logsumexp over the components of each density pair
    shift = logw.max() if np.isfinite(logw.max()) else 0.0
    e = np.exp(logw - shift)
    b1 = np.flatnonzero(np.r_[True, o1[1:] != o1[:-1]])
    b2 = np.flatnonzero(np.r_[True, o2[1:] != o2[:-1]])
    sums = np.add.reduceat(np.add.reduceat(e, b1, axis=0), b2, axis=1)
    with np.errstate(divide="ignore"):
        table = np.log(sums) + shift
    if shift - 700.0 > np.log(cfg.eta_floor):
        # a block could have underflowed while still clearing the floor
        for a, b in zip(*np.nonzero(~np.isfinite(table))):
            table[a, b] = logsumexp(logw[np.ix_(o1 == a, o2 == b)])
    gms1 = [p for _, p in mb1._items.values()]
    gms2 = [p for _, p in mb2._items.values()]
    index2 = {_fingerprint(p): b for b, p in enumerate(gms2)}
    for a, p in enumerate(gms1):
        b = index2.get(_fingerprint(p))
        if b is not None and same_mixture(p, gms2[b]) and abs(p.total_weight - 1.0) < 1e-12:
            table[a, b] = 0.0
            out._exact[(a, b)] = p
    allowed = table >= np.log(cfg.eta_floor)
    out.log_eta[allowed] = table[allowed]
    out._parts = (o1, o2, means, covs, logw)
    return out


def _fingerprint(p: GaussianMixture) -> tuple:
    return p.means.shape, p.weights.tobytes(), p.means.tobytes(), p.covs.tobytes()


def _clusters(allowed: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Connected components of the bipartite graph of matchable pairs (rows with any edge)."""
    n1, n2 = allowed.shape
    row_seen = np.zeros(n1, dtype=bool)
    out = []
    for start in range(n1):
        if row_seen[start] or not allowed[start].any():
            continue
        rows = {start}
        cols: set = set()
        frontier = [start]
        while frontier:
            r = frontier.pop()
            for c in np.flatnonzero(allowed[r]):
                if c not in cols:
                    cols.add(int(c))
                    for r2 in np.flatnonzero(allowed[:, c]):
                        if r2 not in rows:
                            rows.add(int(r2))
                            frontier.append(int(r2))
        row_seen[list(rows)] = True
        out.append((np.array(sorted(rows)), np.array(sorted(cols))))
    return out


def _kbest_product(lists: list[list[tuple[float, object]]], k: int, max_gap: float):
    """k lowest total costs over the Cartesian product of cost-sorted lists."""
    if not lists:
        return [(0.0, ())]
    base = sum(lst[0][0] for lst in lists)
    start = (0,) * len(lists)
    heap = [(base, start)]
    seen = {start}
    out = []
    while heap and len(out) < k:
        total, idx = heapq.heappop(heap)
        if total - base > max_gap:
            break
        out.append((total, tuple(lists[c][i][1] for c, i in enumerate(idx))))
        for c in range(len(lists)):
            if idx[c] + 1 < len(lists[c]):
                nxt = idx[:c] + (idx[c] + 1,) + idx[c + 1:]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(heap, (total - lists[c][idx[c]][0] + lists[c][idx[c] + 1][0], nxt))
    return out


def gci_fuse_gmb_pair(pi1, pi2, cfg: FusionConfig) -> GmbDensity:
    """GCI fusion of two unlabeled densities over ranked fusion-map hypotheses.

    Both inputs are reduced to first-moment matched MB densities.  A fused
    hypothesis is a subset ``S`` of the first density's indices together with
    an injective map ``tau`` from ``S`` into the second density's indices; its
    unnormalised weight is

        w1(S)**omega1 * w2(tau(S))**omega2 * prod_{i in S} eta(i, tau(i))

    where ``w_s`` are MB subset weights and ``eta`` the GCI normaliser of the
    matched single-object densities.  Hypotheses are generated best first,
    independently per cluster of mutually matchable tracks, and truncated by
    ``cfg``.

    Returns
    -------
    GmbDensity
        Over the index space of ``pi1``; each hypothesis key is the tuple of
        matched ``(i, j)`` pairs.

    Raises
    ------
    IncompatibleDensitiesError
        When no hypothesis has positive weight or the normaliser underflows.
    """
    if len(cfg.weights) != 2:
        raise ValueError("pairwise fusion needs exactly two weights")
    w1, w2 = cfg.weights
    if not (0.0 < w1 < 1.0):
        raise ValueError("pairwise fusion weights must lie strictly between 0 and 1")
    mb1, mb2 = gmb_to_mb_moment_match(pi1), gmb_to_mb_moment_match(pi2)
    keys1, keys2 = mb1.keys(), mb2.keys()
    r1, r2 = mb1.r, mb2.r
    with np.errstate(divide="ignore"):
        lr1, lq1 = np.log(r1), np.log1p(-r1)
        lr2, lq2 = np.log(r2), np.log1p(-r2)

    table = _pair_table(mb1, mb2, w1, w2, cfg)
    allowed = np.isfinite(table.log_eta)
    c = lambda x: np.maximum(x, _LOG_TINY)  # noqa: E731
    score = (w1 * (c(lr1) - c(lq1)))[:, None] + (w2 * (c(lr2) - c(lq2)))[None, :] + table.log_eta

    max_gap = -np.log(cfg.weight_floor) if cfg.weight_floor > 0 else np.inf
    # The rest of any assignment costs at least the optimum, so a pair whose
    # own cost exceeds the gap only occurs in hypotheses beyond the floor.
    rankable = allowed & (-score <= max_gap)
    lists = []
    for rows, cols in _clusters(rankable):
        k, mc = len(rows), len(cols)
        cost = np.full((k, mc + k), np.inf)
        sub = -score[np.ix_(rows, cols)]
        cost[:, :mc] = np.where(rankable[np.ix_(rows, cols)], sub, np.inf)
        cost[np.arange(k), mc + np.arange(k)] = 0.0
        sols = kbest_assignments(cost, cfg.max_hypotheses, max_gap)
        lists.append([
            (total, tuple((int(rows[i]), int(cols[a])) for i, a in enumerate(assign) if a < mc))
            for total, assign in sols
        ])
    combos = _kbest_product(lists, cfg.max_hypotheses, max_gap)

    hyps, densities = [], {}
    for _, parts in combos:
        pairs = tuple(sorted(p for part in parts for p in part))
        in1 = np.zeros(len(keys1), dtype=bool)
        in2 = np.zeros(len(keys2), dtype=bool)
        for a, b in pairs:
            in1[a] = True
            in2[b] = True
        lw = (
            w1 * (lr1[in1].sum() + lq1[~in1].sum())
            + w2 * (lr2[in2].sum() + lq2[~in2].sum())
            + sum(table.log_eta[a, b] for a, b in pairs)
        )
        if not np.isfinite(lw):
            continue
        phi = tuple((keys1[a], keys2[b]) for a, b in pairs)
        if phi not in densities:
            densities[phi] = {keys1[a]: table.density(a, b) for a, b in pairs}
        hyps.append((tuple(keys1[a] for a, _ in pairs), phi, lw))

    if not hyps:
        raise IncompatibleDensitiesError("no fused hypothesis has positive weight", {"n1": len(keys1), "n2": len(keys2)})
    log_c = logsumexp([h[2] for h in hyps])
    if log_c < np.log(1e-300):
        raise IncompatibleDensitiesError(
            "normaliser of the fused density underflows", {"log_C": float(log_c), "hypotheses": len(hyps)}
        )
    return GmbDensity(keys1, hyps, densities)


def construct_labeled_fused(g_fused: GmbDensity, home_labels) -> GlmbDensity:
    """Attach the home sensor's labels to a fused GMB; parameters are transported unchanged."""
    if not set(g_fused.space) <= set(home_labels):
        raise ValueError("fused index space is not contained in the home label space")
    return gmb_to_glmb(g_fused)


def r_gci_glmb_fuse(locals_: Sequence, cfg: FusionConfig, home_sensor: int = 0) -> GlmbDensity:
    """Robust labeled fusion of several local posteriors.

    Each density is marginalised to its unlabeled form; the marginals are
    fused pairwise starting from the home sensor's (renormalising the
    accumulated weight at every step); finally the home sensor's labels are
    re-attached.  Sensors with zero weight are skipped.
    """
    if len(locals_) < 2:
        raise ValueError("fusion needs at least two densities")
    if len(cfg.weights) != len(locals_):
        raise ValueError("one fusion weight per density is required")
    if cfg.weights[home_sensor] <= 0:
        raise ValueError("the home sensor must carry positive weight")
    home = locals_[home_sensor]
    home_labels = set(home.space) if isinstance(home, (GlmbDensity, GmbDensity)) else set(home.keys())
    fused = home
    acc = cfg.weights[home_sensor]
    for s, dens in enumerate(locals_):
        if s == home_sensor or cfg.weights[s] == 0:
            continue
        ws = cfg.weights[s]
        pair_cfg = replace(cfg, weights=(acc / (acc + ws), ws / (acc + ws)))
        fused = gci_fuse_gmb_pair(fused, dens, pair_cfg)
        acc += ws
    if not isinstance(fused, GmbDensity):
        # every other sensor had zero weight
        fused = as_gmb(fused)
    return construct_labeled_fused(fused, home_labels)


def classical_gci_lmb_fuse(l1: LmbDensity, l2: LmbDensity, cfg: FusionConfig) -> LmbDensity:
    """Label-wise GCI fusion of two LMB densities.

    For a label present in both inputs the fused Bernoulli has existence

        r1**w1 r2**w2 eta / (r1**w1 r2**w2 eta + (1-r1)**w1 (1-r2)**w2)

    and the normalised geometric mean of the two spatial densities.  A label
    present in only one input is fused with an absent (r = 0) counterpart and
    therefore ends with r = 0.
    """
    if len(cfg.weights) != 2:
        raise ValueError("pairwise fusion needs exactly two weights")
    w1, w2 = cfg.weights
    out: dict = {}
    for lab in list(l1.keys()) + [k for k in l2.keys() if k not in l1]:
        if lab not in l1 or lab not in l2:
            _, p = l1[lab] if lab in l1 else l2[lab]
            out[lab] = (0.0, p)
            continue
        ra, pa = l1[lab]
        rb, pb = l2[lab]
        if w1 == 0.0 or w2 == 0.0:
            out[lab] = (ra, pa) if w2 == 0.0 else (rb, pb)
            continue
        p, log_eta = log_gci_fuse(pa, w1, pb, w2)
        with np.errstate(divide="ignore"):
            yes = w1 * np.log(ra) + w2 * np.log(rb) + log_eta
            no = w1 * np.log1p(-ra) + w2 * np.log1p(-rb)
        if p is None or yes == -np.inf:
            out[lab] = (0.0, pa)
            continue
        r = float(np.exp(yes - np.logaddexp(yes, no)))
        out[lab] = (r, gm_prune_merge(p, cfg.prune, cfg.merge, cfg.max_components))
    return LmbDensity(out)
