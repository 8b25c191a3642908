"""Labeled and unlabeled multi-object densities with Gaussian-mixture spatial parts.

Four containers are provided:

* :class:`LmbDensity` and :class:`MbDensity` hold independent Bernoulli
  components keyed by a label or an opaque index.
* :class:`GlmbDensity` and :class:`GmbDensity` hold a mixture over
  hypotheses ``(set, key)``; each key selects one dictionary of per-element
  spatial densities.  Hypothesis weights live in the log domain.

The conversions between them are pure functions at the bottom of the module.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Any, Hashable, Iterable, Mapping, NamedTuple

import numpy as np
from scipy.special import logsumexp

from .gaussian import GaussianMixture, concatenate, gm_normalize


class Label(NamedTuple):
    """Track label: the step at which the track was born and its birth index."""

    birth_time: int
    index: int

    def __str__(self) -> str:
        return f"({self.birth_time},{self.index})"


@dataclass(frozen=True, eq=False)
class BernoulliComponent:
    label: Hashable
    r: float
    p: GaussianMixture

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"existence probability {self.r} outside [0, 1]")


class _BernoulliSet:
    """Shared behaviour of LMB and MB densities: an ordered map key -> (r, p)."""

    def __init__(self, components: Mapping[Hashable, tuple[float, GaussianMixture]] | Iterable[BernoulliComponent] = ()):
        if isinstance(components, Mapping):
            items = list(components.items())
        else:
            items = [(c.label, (c.r, c.p)) for c in components]
        self._items: dict[Hashable, tuple[float, GaussianMixture]] = {}
        for key, (r, p) in items:
            if key in self._items:
                raise ValueError(f"duplicate key {key!r}")
            r = float(r)
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"existence probability {r} outside [0, 1] for {key!r}")
            self._items[key] = (r, p)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __contains__(self, key) -> bool:
        return key in self._items

    def __getitem__(self, key) -> tuple[float, GaussianMixture]:
        return self._items[key]

    def items(self):
        return self._items.items()

    def keys(self) -> list:
        return list(self._items)

    @property
    def r(self) -> np.ndarray:
        return np.array([r for r, _ in self._items.values()], dtype=float)

    @property
    def dim(self) -> int | None:
        for _, p in self._items.values():
            return p.dim
        return None

    def components(self) -> list[BernoulliComponent]:
        return [BernoulliComponent(k, r, p) for k, (r, p) in self._items.items()]

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: r={r:.4g}" for k, (r, _) in self._items.items())
        return f"{type(self).__name__}({body})"


class LmbDensity(_BernoulliSet):
    """Labeled multi-Bernoulli density, one Bernoulli component per label."""

    @property
    def labels(self) -> list:
        return self.keys()


class MbDensity(_BernoulliSet):
    """Unlabeled multi-Bernoulli density keyed by opaque indices."""

    @property
    def indices(self) -> list:
        return self.keys()


class _HypothesisMixture:
    """Mixture over hypotheses ``(element set, key)``.

    Parameters
    ----------
    space : sequence
        The label (or index) space.  Its order fixes the canonical order of
        every hypothesis set.
    hypotheses : iterable of (set, key, log_weight)
        Weights may be unnormalised; they are normalised on construction.
        Hypotheses with ``log_weight == -inf`` are dropped.
    densities : mapping key -> mapping element -> GaussianMixture
        ``densities[key][e]`` is the spatial density of element ``e`` under
        any hypothesis carrying ``key``.
    """

    def __init__(self, space: Iterable, hypotheses: Iterable[tuple[Iterable, Hashable, float]], densities: Mapping):
        self.space: tuple = tuple(space)
        order = {e: i for i, e in enumerate(self.space)}
        if len(order) != len(self.space):
            raise ValueError("space contains duplicates")
        sets, keys, logw = [], [], []
        for elements, key, lw in hypotheses:
            lw = float(lw)
            if lw == -np.inf:
                continue
            if np.isnan(lw):
                raise ValueError("hypothesis log weight is NaN")
            elements = tuple(sorted(elements, key=order.__getitem__))
            if len(set(elements)) != len(elements):
                raise ValueError("hypothesis set contains repeated elements")
            dens = densities[key]
            for e in elements:
                if e not in dens:
                    raise ValueError(f"no density for element {e!r} under key {key!r}")
            sets.append(elements)
            keys.append(key)
            logw.append(lw)
        if not sets:
            raise ValueError("a hypothesis mixture needs at least one hypothesis with positive weight")
        logw = np.asarray(logw)
        self.log_weights: np.ndarray = logw - logsumexp(logw)
        self.sets: list[tuple] = sets
        self.keys: list = keys
        used = set(keys)
        self.densities: dict = {k: dict(v) for k, v in densities.items() if k in used}

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def __len__(self) -> int:
        return len(self.sets)

    def hypotheses(self):
        """Iterate ``(set, key, weight)`` triples."""
        for s, k, lw in zip(self.sets, self.keys, self.log_weights):
            yield s, k, float(np.exp(lw))

    def density(self, key, element) -> GaussianMixture:
        return self.densities[key][element]

    @property
    def dim(self) -> int | None:
        for dens in self.densities.values():
            for p in dens.values():
                return p.dim
        return None

    def __repr__(self) -> str:
        return f"{type(self).__name__}(|space|={len(self.space)}, hypotheses={len(self)})"


class GlmbDensity(_HypothesisMixture):
    """Generalised labeled multi-Bernoulli density.

    Each hypothesis is a label set with a component key ``c``; the key selects
    the per-label densities ``p^{(c)}(., label)``.
    """

    @property
    def label_space(self) -> tuple:
        return self.space


class GmbDensity(_HypothesisMixture):
    """Generalised multi-Bernoulli density: the unlabeled counterpart of a GLMB.

    The hypothesis key plays the role of the density-set tag ``phi``.
    """

    @property
    def index_space(self) -> tuple:
        return self.space


# ---------------------------------------------------------------------------
# conversions


def glmb_to_gmb(g: GlmbDensity) -> GmbDensity:
    """Unlabeled marginal of a GLMB: labels become opaque indices, nothing else changes."""
    out = GmbDensity.__new__(GmbDensity)
    out.space = g.space
    out.sets = list(g.sets)
    out.keys = list(g.keys)
    out.log_weights = g.log_weights.copy()
    out.densities = {k: dict(v) for k, v in g.densities.items()}
    return out


def gmb_to_glmb(g: GmbDensity) -> GlmbDensity:
    """Read a GMB's indices back as labels (used when the indices are labels)."""
    out = GlmbDensity.__new__(GlmbDensity)
    out.space = g.space
    out.sets = list(g.sets)
    out.keys = list(g.keys)
    out.log_weights = g.log_weights.copy()
    out.densities = {k: dict(v) for k, v in g.densities.items()}
    return out


def lmb_to_mb(l: LmbDensity) -> MbDensity:
    return MbDensity(dict(l.items()))


def mb_to_lmb(m: MbDensity) -> LmbDensity:
    return LmbDensity(dict(m.items()))


MAX_ENUMERATED_ELEMENTS = 20


def _bernoulli_set_to_mixture(d: _BernoulliSet, cls, prune_threshold: float | None, max_hypotheses: int | None):
    keys = d.keys()
    r = d.r
    with np.errstate(divide="ignore"):
        log_r = np.log(r)
        log_q = np.log1p(-r)
    n = len(keys)
    if n > MAX_ENUMERATED_ELEMENTS:
        raise ValueError(f"refusing to enumerate 2**{n} hypotheses")
    hyps = []
    for k in range(n + 1):
        for subset in combinations(range(n), k):
            mask = np.zeros(n, dtype=bool)
            mask[list(subset)] = True
            lw = log_r[mask].sum() + log_q[~mask].sum()
            if lw > -np.inf:
                hyps.append((tuple(keys[i] for i in subset), 0, lw))
    if not hyps:
        raise ValueError("density has no hypothesis with positive weight")
    lw = np.array([h[2] for h in hyps])
    lw = lw - logsumexp(lw)
    if prune_threshold is not None:
        keep = lw >= np.log(prune_threshold)
        hyps = [h for h, k in zip(hyps, keep) if k]
    if max_hypotheses is not None and len(hyps) > max_hypotheses:
        hyps = sorted(hyps, key=lambda h: -h[2])[:max_hypotheses]
    dens = {0: {k: p for k, (_, p) in d.items()}}
    return cls(keys, hyps, dens)


def lmb_to_glmb(l: LmbDensity, prune_threshold: float | None = None, max_hypotheses: int | None = None) -> GlmbDensity:
    """Expand an LMB into its GLMB form by enumerating every label subset.

    With ``prune_threshold`` the hypotheses whose normalised weight falls
    below the threshold are discarded and the rest renormalised.
    """
    return _bernoulli_set_to_mixture(l, GlmbDensity, prune_threshold, max_hypotheses)


def mb_to_gmb(m: MbDensity, prune_threshold: float | None = None, max_hypotheses: int | None = None) -> GmbDensity:
    return _bernoulli_set_to_mixture(m, GmbDensity, prune_threshold, max_hypotheses)


# existence probabilities below this carry no usable spatial density
R_FLOOR = 1e-12


def _moment_match(g: _HypothesisMixture) -> dict:
    """Marginal existence probability and weight-mixed density per element."""
    w = g.weights
    mass: dict = {e: 0.0 for e in g.space}
    # many hypotheses share the same density object; accumulate per object
    parts: dict = {e: {} for e in g.space}
    for s, k, wi in zip(g.sets, g.keys, w):
        dens = g.densities[k]
        for e in s:
            mass[e] += wi
            p = dens[e]
            slot = parts[e].setdefault(id(p), [0.0, p])
            slot[0] += wi
    out = {}
    for e in g.space:
        r = mass[e]
        if r < R_FLOOR:
            continue
        gm = concatenate([p.scaled(wi) for wi, p in parts[e].values()])
        out[e] = (min(r, 1.0), gm_normalize(gm))
    return out


def glmb_to_lmb(g: GlmbDensity) -> LmbDensity:
    """First-moment matched LMB approximation of a GLMB.

    Labels whose marginal existence probability is below ``R_FLOOR`` are
    dropped.
    """
    return LmbDensity(_moment_match(g))


def gmb_to_mb(g: GmbDensity) -> MbDensity:
    """First-moment matched MB approximation of a GMB (same rule as :func:`glmb_to_lmb`)."""
    return MbDensity(_moment_match(g))


def cardinality_distribution(d) -> np.ndarray:
    """Probability of each cardinality ``0..max``."""
    if isinstance(d, _BernoulliSet):
        dist = np.array([1.0])
        for r in d.r:
            dist = np.convolve(dist, [1.0 - r, r])
        return dist
    if isinstance(d, _HypothesisMixture):
        n_max = max(len(s) for s in d.sets)
        dist = np.zeros(max(n_max, len(d.space)) + 1)
        np.add.at(dist, [len(s) for s in d.sets], d.weights)
        return dist
    raise TypeError(f"unsupported density type {type(d).__name__}")


def phd(d, dim: int | None = None) -> GaussianMixture:
    """First-moment intensity ``v(x)`` as an unnormalised Gaussian mixture."""
    if isinstance(d, _HypothesisMixture):
        d = MbDensity(_moment_match(d)) if len(d.space) else MbDensity()
    if not isinstance(d, _BernoulliSet):
        raise TypeError(f"unsupported density type {type(d).__name__}")
    parts = [p.scaled(r) for _, (r, p) in d.items()]
    if not parts:
        return GaussianMixture.empty(dim if dim is not None else 0)
    return concatenate(parts)


def no_object_probability(d) -> float:
    if isinstance(d, _BernoulliSet):
        return float(np.prod(1.0 - d.r))
    if isinstance(d, _HypothesisMixture):
        return float(sum(w for s, _, w in d.hypotheses() if len(s) == 0))
    raise TypeError(f"unsupported density type {type(d).__name__}")


def expected_cardinality(d) -> float:
    dist = cardinality_distribution(d)
    return float(np.arange(dist.size) @ dist)


def as_mixture(d: Any):
    """View any density as a hypothesis mixture (LMB->GLMB, MB->GMB)."""
    if isinstance(d, LmbDensity):
        return lmb_to_glmb(d)
    if isinstance(d, MbDensity):
        return mb_to_gmb(d)
    return d
