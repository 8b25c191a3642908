"""Exact multi-object calculus on finite grids.

Continuous densities are evaluated at the centres of a finite set of cells,
after which every set integral becomes a finite sum.  This gives a
brute-force oracle for GCI fusion and for the label-consistency diagnostics:

* the GCI coefficient ``c`` and divergence ``G = -log c`` of weighted
  densities,
* the conditional distribution of labels given states,
* the label inconsistency indicator ``d_G = G(labeled) - G(unlabeled)``,
  computed both directly and as ``-log E[mu(X)]`` under the fused unlabeled
  density,
* the relation between labeled and unlabeled yes-object probabilities.

Storage conventions
-------------------
An unlabeled density keeps, for each cardinality ``n``, a symmetric array of
shape ``(M,)*n`` with the density value at every cell tuple.  A labeled
density keeps, for each sorted tuple ``L`` of distinct labels, an array
``A_L`` whose entry ``[i_1, ..., i_n]`` is the density of the labeled set
``{(c_{i_1}, L[0]), ..., (c_{i_n}, L[n-1])}``.  Label tuples that are
absent carry zero density.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from itertools import permutations
from math import factorial
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .gaussian import GaussianMixture, IncompatibleDensitiesError
from .labeled_rfs import (
    GlmbDensity,
    GmbDensity,
    LmbDensity,
    MbDensity,
    lmb_to_glmb,
    mb_to_gmb,
)

# value returned for the divergence of densities with disjoint supports
INFINITE_DIVERGENCE = math.inf

REPORT_COLUMNS = ("time", "G_labeled", "G_unlabeled", "d_G", "d_G_upper", "p_yes_labeled", "p_yes_unlabeled")


class CoverageError(ValueError):
    """The grid misses too much probability mass of some single-object density."""


class UndefinedConditionalError(ValueError):
    """The conditional label distribution was queried where the marginal vanishes."""


def is_infinite_divergence(value: float) -> bool:
    return value == INFINITE_DIVERGENCE


@dataclass(frozen=True, eq=False)
class DiscreteSpace:
    """Axis-aligned grid of cells on selected state coordinates.

    Attributes
    ----------
    edges : tuple of 1-D arrays
        Cell boundaries along each gridded axis.
    axes : tuple of int
        State coordinates the grid lives on; densities are marginalised onto
        them before evaluation.
    max_cardinality : int
        Largest set size represented.
    """

    edges: tuple
    axes: tuple = (0,)
    max_cardinality: int = 3

    def __post_init__(self):
        edges = tuple(np.asarray(e, dtype=float) for e in self.edges)
        if len(edges) != len(self.axes):
            raise ValueError("one edge array per gridded axis is required")
        for e in edges:
            if e.ndim != 1 or e.size < 2 or np.any(np.diff(e) <= 0):
                raise ValueError("edges must be strictly increasing with at least two entries")
        if self.max_cardinality < 0:
            raise ValueError("max_cardinality must be nonnegative")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "axes", tuple(int(a) for a in self.axes))

    @classmethod
    def grid_1d(cls, lo: float, hi: float, n_cells: int, axis: int = 0, max_cardinality: int = 3) -> "DiscreteSpace":
        return cls((np.linspace(lo, hi, n_cells + 1),), (axis,), max_cardinality)

    @classmethod
    def covering(cls, densities, axes=(0,), n_cells: int = 60, n_sigma: float = 8.0, max_cardinality: int = 3) -> "DiscreteSpace":
        """Grid spanning ``n_sigma`` standard deviations of every component in ``densities``."""
        lo = np.full(len(axes), np.inf)
        hi = np.full(len(axes), -np.inf)
        for gm in _all_mixtures(densities):
            m = gm.means[:, list(axes)]
            s = np.sqrt(np.stack([np.diag(P)[list(axes)] for P in gm.covs]))
            lo = np.minimum(lo, (m - n_sigma * s).min(axis=0))
            hi = np.maximum(hi, (m + n_sigma * s).max(axis=0))
        if not np.all(np.isfinite(lo)):
            lo, hi = np.zeros(len(axes)), np.ones(len(axes))
        edges = tuple(np.linspace(a, b, n_cells + 1) for a, b in zip(lo, hi))
        return cls(edges, tuple(axes), max_cardinality)

    @property
    def centers(self) -> np.ndarray:
        mids = [0.5 * (e[1:] + e[:-1]) for e in self.edges]
        grid = np.meshgrid(*mids, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    @property
    def measures(self) -> np.ndarray:
        widths = np.meshgrid(*[np.diff(e) for e in self.edges], indexing="ij")
        return np.prod(np.stack([w.ravel() for w in widths], axis=1), axis=1)

    @property
    def n_cells(self) -> int:
        return int(np.prod([e.size - 1 for e in self.edges]))

    def evaluate(self, gm: GaussianMixture, coverage: float = 1e-6) -> np.ndarray:
        """Cell-centre values of ``gm`` marginalised onto the grid axes, renormalised to unit mass."""
        marg = gm.marginal(list(self.axes))
        outside = 0.0
        w = marg.weights / marg.weights.sum()
        for k, e in enumerate(self.edges):
            s = np.sqrt(marg.covs[:, k, k])
            inside = norm.cdf(e[-1], marg.means[:, k], s) - norm.cdf(e[0], marg.means[:, k], s)
            outside += float(w @ (1.0 - inside))
        if outside > coverage:
            raise CoverageError(f"grid misses {outside:.3g} of a single-object density's mass")
        vals = marg.pdf(self.centers)
        mass = float(vals @ self.measures)
        if mass <= 0:
            raise CoverageError("single-object density has no mass on the grid")
        return vals / mass


def _all_mixtures(densities):
    for d in densities:
        if isinstance(d, (LmbDensity, MbDensity)):
            for _, (_, p) in d.items():
                yield p
        elif isinstance(d, (GlmbDensity, GmbDensity)):
            for dens in d.densities.values():
                yield from dens.values()
        elif isinstance(d, GaussianMixture):
            yield d


@dataclass(eq=False)
class DiscreteMultiObjectDensity:
    """Multi-object density tabulated on a :class:`DiscreteSpace`.

    ``terms[n]`` is a symmetric ``(M,)*n`` array (unlabeled) or a dict from
    sorted label tuples to ``(M,)*n`` arrays (labeled).  ``raw_mass`` records
    the set integral before renormalisation (mass lost to the cardinality cap).
    """

    space: DiscreteSpace
    labeled: bool
    terms: dict
    raw_mass: float = 1.0

    def arrays(self, n: int):
        """Iterate ``(label_tuple, array)`` pairs of cardinality ``n`` (label tuple None if unlabeled)."""
        t = self.terms.get(n)
        if t is None:
            return
        if self.labeled:
            yield from t.items()
        else:
            yield None, t

    @property
    def max_n(self) -> int:
        return max(self.terms) if self.terms else 0

    def empty_probability(self) -> float:
        if self.labeled:
            return float(self.terms.get(0, {}).get((), 0.0))
        return float(self.terms.get(0, 0.0))

    def scaled(self, factor: float) -> "DiscreteMultiObjectDensity":
        if self.labeled:
            terms = {n: {L: A * factor for L, A in t.items()} for n, t in self.terms.items()}
        else:
            terms = {n: A * factor for n, A in self.terms.items()}
        return DiscreteMultiObjectDensity(self.space, self.labeled, terms, self.raw_mass)


def canonical_labels(labels) -> tuple:
    """Sorted label tuple used as the storage key (falls back to repr order for unorderable labels)."""
    try:
        return tuple(sorted(labels))
    except TypeError:
        return tuple(sorted(labels, key=repr))


def _measure_tensor(space: DiscreteSpace, n: int) -> np.ndarray:
    mu = space.measures
    out = np.array(1.0)
    for _ in range(n):
        out = np.multiply.outer(out, mu)
    return out


def set_integral(d: DiscreteMultiObjectDensity) -> float:
    """``sum_n 1/n! sum_cells pi * measure**n`` (labeled: one term per sorted label tuple)."""
    total = 0.0
    for n in d.terms:
        w = _measure_tensor(d.space, n)
        for _, A in d.arrays(n):
            s = float(np.sum(A * w))
            total += s if d.labeled else s / factorial(n)
    return total


def _outer(vectors) -> np.ndarray:
    out = np.array(1.0)
    for v in vectors:
        out = np.multiply.outer(out, v)
    return out


def _symmetrize(A: np.ndarray) -> np.ndarray:
    n = A.ndim
    if n < 2:
        return A.copy()
    return sum(np.transpose(A, p) for p in permutations(range(n)))


def discretize(d, space: DiscreteSpace, normalize: bool = True, coverage: float = 1e-6) -> DiscreteMultiObjectDensity:
    """Tabulate an LMB/GLMB (labeled) or MB/GMB (unlabeled) density on ``space``.

    Hypotheses with more than ``space.max_cardinality`` elements are
    dropped; with ``normalize`` the table is rescaled to unit set integral
    and the pre-scaling integral is kept in ``raw_mass``.
    """
    labeled = isinstance(d, (LmbDensity, GlmbDensity))
    if isinstance(d, LmbDensity):
        d = lmb_to_glmb(d)
    elif isinstance(d, MbDensity):
        d = mb_to_gmb(d)
    if not isinstance(d, (GlmbDensity, GmbDensity)):
        raise TypeError(f"unsupported density type {type(d).__name__}")
    cache: dict = {}

    def values(key, e):
        p = d.densities[key][e]
        if id(p) not in cache:
            cache[id(p)] = space.evaluate(p, coverage)
        return cache[id(p)]

    terms: dict = {}
    for s, key, w in d.hypotheses():
        n = len(s)
        if n > space.max_cardinality:
            continue
        if labeled:
            s = canonical_labels(s)
        A = w * _outer([values(key, e) for e in s])
        if labeled:
            bucket = terms.setdefault(n, {})
            bucket[s] = bucket.get(s, 0.0) + A
        else:
            terms[n] = terms.get(n, 0.0) + _symmetrize(A)
    out = DiscreteMultiObjectDensity(space, labeled, terms)
    mass = set_integral(out)
    if normalize:
        if mass <= 0:
            raise ValueError("discretised density has zero mass")
        out = out.scaled(1.0 / mass)
    out.raw_mass = mass
    return out


def marginalize(d: DiscreteMultiObjectDensity) -> DiscreteMultiObjectDensity:
    """Unlabeled marginal: sum over all ordered label tuples."""
    if not d.labeled:
        return d
    terms = {}
    for n, bucket in d.terms.items():
        total = 0.0
        for A in bucket.values():
            total = total + _symmetrize(A)
        terms[n] = np.asarray(total, dtype=float)
    return DiscreteMultiObjectDensity(d.space, False, terms, d.raw_mass)


def _check_inputs(ds):
    ds = list(ds)
    if not ds:
        raise ValueError("no densities given")
    weights = np.array([w for _, w in ds], dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("fusion weights must be nonnegative and sum to one")
    labeled = {d.labeled for d, _ in ds}
    if len(labeled) != 1:
        raise ValueError("cannot mix labeled and unlabeled densities")
    spaces = {id(d.space) for d, _ in ds}
    if len(spaces) != 1:
        first = ds[0][0].space
        for d, _ in ds[1:]:
            if d.space.axes != first.axes or any(not np.array_equal(a, b) for a, b in zip(d.space.edges, first.edges)):
                raise ValueError("densities live on different grids")
    return ds


def _geometric_terms(ds) -> dict:
    """Unnormalised pointwise weighted geometric mean (zero-weight densities are ignored)."""
    ds = [(d, w) for d, w in ds if w > 0]
    labeled = ds[0][0].labeled
    ns = set.intersection(*[set(d.terms) for d, _ in ds])
    out: dict = {}
    for n in sorted(ns):
        if labeled:
            keys = set.intersection(*[set(d.terms[n]) for d, _ in ds])
            bucket = {}
            for L in keys:
                prod = 1.0
                for d, w in ds:
                    prod = prod * _power(d.terms[n][L], w)
                bucket[L] = prod
            out[n] = bucket
        else:
            prod = 1.0
            for d, w in ds:
                prod = prod * _power(d.terms[n], w)
            out[n] = prod
    return out


def _power(A, w):
    return np.asarray(A, dtype=float) ** w


def gci_coefficient(ds) -> float:
    ds = _check_inputs(ds)
    first = ds[0][0]
    g = DiscreteMultiObjectDensity(first.space, first.labeled, _geometric_terms(ds))
    return set_integral(g)


def gci_fuse_discrete(ds) -> DiscreteMultiObjectDensity:
    """Normalised weighted geometric mean of densities on a common grid (exact GCI)."""
    ds = _check_inputs(ds)
    first = ds[0][0]
    g = DiscreteMultiObjectDensity(first.space, first.labeled, _geometric_terms(ds))
    c = set_integral(g)
    if not c > 0:
        raise IncompatibleDensitiesError("geometric mean has zero mass", {"c": c})
    return g.scaled(1.0 / c)


def gci_divergence(ds) -> float:
    """``-log c``; :data:`INFINITE_DIVERGENCE` when the coefficient vanishes."""
    c = gci_coefficient(ds)
    if c <= 0.0:
        return INFINITE_DIVERGENCE
    return -math.log(c)


class ConditionalLabelDistribution:
    """Probability of ordered label tuples given the states they are attached to.

    Calling ``cond(labels, cells)`` with an ordered label tuple and the
    matching tuple of cell indices returns ``pi_labeled / pi_unlabeled``.
    """

    def __init__(self, d: DiscreteMultiObjectDensity):
        if not d.labeled:
            raise ValueError("conditional label distribution needs a labeled density")
        self._d = d
        self._marginal = marginalize(d)

    def marginal_value(self, cells: tuple) -> float:
        n = len(cells)
        if n == 0:
            return self._marginal.empty_probability()
        A = self._marginal.terms.get(n)
        return 0.0 if A is None else float(A[tuple(cells)])

    def __call__(self, labels: tuple, cells: tuple) -> float:
        labels, cells = tuple(labels), tuple(cells)
        if len(labels) != len(cells):
            raise ValueError("labels and cells must have the same length")
        if not labels:
            return 1.0
        denom = self.marginal_value(cells)
        if denom <= 0:
            raise UndefinedConditionalError("marginal density is zero at the queried states")
        if len(set(labels)) != len(labels):
            return 0.0
        L = canonical_labels(labels)
        sort = [labels.index(lab) for lab in L]
        A = self._d.terms.get(len(L), {}).get(L)
        if A is None:
            return 0.0
        return float(A[tuple(cells[i] for i in sort)]) / denom

    def tables(self, n: int) -> dict:
        """Array of the conditional for every ordered label tuple of size ``n`` (zero where undefined)."""
        out = {}
        A_marg = self._marginal.terms.get(n)
        if A_marg is None:
            return out
        with np.errstate(divide="ignore", invalid="ignore"):
            for L, A in self._d.terms.get(n, {}).items():
                for perm in permutations(range(n)):
                    t = tuple(L[p] for p in perm)
                    out[t] = np.where(A_marg > 0, np.transpose(A, perm) / A_marg, 0.0)
        return out


def conditional_multilabel(d_labeled: DiscreteMultiObjectDensity) -> ConditionalLabelDistribution:
    return ConditionalLabelDistribution(d_labeled)


def expected_label_coefficient(labeled) -> float:
    """``E[mu(X)]`` under the fused unlabeled density, by full enumeration.

    ``mu(X)`` is the GCI coefficient of the conditional label distributions,
    summed over all ordered label tuples.
    """
    labeled = _check_inputs(labeled)
    unl = [(marginalize(d), w) for d, w in labeled]
    fused = gci_fuse_discrete(unl)
    conds = [(ConditionalLabelDistribution(d), w) for d, w in labeled]
    total = fused.empty_probability()  # mu of the empty set is one
    for n in range(1, fused.max_n + 1):
        if n not in fused.terms:
            continue
        tables = [(c.tables(n), w) for c, w in conds]
        common = set.intersection(*[set(t) for t, _ in tables])
        mu = np.zeros(fused.terms[n].shape)
        for t in common:
            prod = 1.0
            for tab, w in tables:
                prod = prod * _power(tab[t], w)
            mu = mu + prod
        total += float(np.sum(fused.terms[n] * mu * _measure_tensor(fused.space, n))) / factorial(n)
    return total


@dataclass(frozen=True)
class DiagnosticsReport:
    G_labeled: float
    G_unlabeled: float
    d_G: float
    d_G_upper: float
    p_yes_labeled: float
    p_yes_unlabeled: float
    # |G_labeled - G_unlabeled + log E[mu]|, the decomposition check
    decomposition_residual: float = 0.0

    def csv_row(self, time) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([time] + [f"{getattr(self, c):.9g}" for c in REPORT_COLUMNS[1:]])
        return buf.getvalue()

    @staticmethod
    def csv_header() -> str:
        return ",".join(REPORT_COLUMNS) + "\n"


def label_inconsistency_indicator(labeled) -> DiagnosticsReport:
    """GCI divergences of labeled densities and of their unlabeled marginals.

    ``d_G`` is the difference of the two divergences; it is cross-checked
    against ``-log E[mu(X)]`` and the residual is stored in the report.
    """
    labeled = _check_inputs(labeled)
    if not labeled[0][0].labeled:
        raise ValueError("label_inconsistency_indicator needs labeled densities")
    unl = [(marginalize(d), w) for d, w in labeled]
    G_lab = gci_divergence(labeled)
    G_unl = gci_divergence(unl)
    if is_infinite_divergence(G_unl):
        raise IncompatibleDensitiesError("unlabeled densities have disjoint supports", {"G_unlabeled": G_unl})
    fused_unl = gci_fuse_discrete(unl)
    pn_unl = fused_unl.empty_probability()
    upper = -math.log(pn_unl) if pn_unl > 0 else math.inf
    e_mu = expected_label_coefficient(labeled)
    d_mu = -math.log(e_mu) if e_mu > 0 else math.inf
    if is_infinite_divergence(G_lab):
        d_G = math.inf
        p_yes_lab = math.nan
        residual = 0.0 if math.isinf(d_mu) else math.inf
    else:
        d_G = G_lab - G_unl
        fused_lab = gci_fuse_discrete(labeled)
        p_yes_lab = 1.0 - fused_lab.empty_probability()
        residual = abs(d_G - d_mu)
    return DiagnosticsReport(G_lab, G_unl, d_G, upper, p_yes_lab, 1.0 - pn_unl, residual)


def corollary2_check(report: DiagnosticsReport) -> float:
    """``|P_y(labeled) - (1 - exp(d_G) (1 - P_y(unlabeled)))|``."""
    predicted = 1.0 - math.exp(report.d_G) * (1.0 - report.p_yes_unlabeled)
    return abs(report.p_yes_labeled - predicted)


def yes_probability_from_indicator(d_G: float, p_yes_unlabeled: float) -> float:
    """Labeled yes-object probability implied by ``d_G`` and the unlabeled one."""
    return 1.0 - math.exp(d_G) * (1.0 - p_yes_unlabeled)


def indicator_threshold(p_yes_unlabeled: float, p_yes_labeled: float = 0.5) -> float:
    """The ``d_G`` at which the labeled yes-object probability drops to ``p_yes_labeled``."""
    return math.log((1.0 - p_yes_labeled) / (1.0 - p_yes_unlabeled))


def total_variation(a: DiscreteMultiObjectDensity, b: DiscreteMultiObjectDensity) -> float:
    """Half the set integral of ``|a - b|``."""
    if a.labeled != b.labeled:
        raise ValueError("cannot compare labeled with unlabeled densities")
    total = 0.0
    for n in set(a.terms) | set(b.terms):
        w = _measure_tensor(a.space, n)
        if a.labeled:
            ta, tb = a.terms.get(n, {}), b.terms.get(n, {})
            for L in set(ta) | set(tb):
                total += float(np.sum(np.abs(np.asarray(ta.get(L, 0.0)) - np.asarray(tb.get(L, 0.0))) * w))
        else:
            diff = np.asarray(a.terms.get(n, 0.0)) - np.asarray(b.terms.get(n, 0.0))
            total += float(np.sum(np.abs(diff) * w)) / factorial(n)
    return 0.5 * total


def discretize_all(densities: Sequence, space: DiscreteSpace) -> list[DiscreteMultiObjectDensity]:
    return [discretize(d, space) for d in densities]
