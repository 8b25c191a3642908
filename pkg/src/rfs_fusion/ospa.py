"""Optimal sub-pattern assignment (OSPA) distance between finite sets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist


@dataclass(frozen=True)
class OspaParams:
    c: float = 100.0
    p: float = 1.0
    # state coordinates entering the base distance
    position_axes: tuple = (0, 1)

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("cutoff must be positive")
        if self.p < 1:
            raise ValueError("order must be at least one")


def _positions(X, axes) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.size == 0:
        return np.zeros((0, len(axes)))
    X = np.atleast_2d(X)
    return X[:, list(axes)]


def ospa_distance(X, Y, params: OspaParams = OspaParams()) -> float:
    """OSPA distance with cutoff ``c`` and order ``p``.

    The base distance is Euclidean on ``params.position_axes``.  Two empty
    sets are at distance zero.
    """
    A = _positions(X, params.position_axes)
    B = _positions(Y, params.position_axes)
    m, n = len(A), len(B)
    if m == 0 and n == 0:
        return 0.0
    if m == 0 or n == 0:
        return float(params.c)
    if m > n:
        A, B, m, n = B, A, n, m
    D = np.minimum(cdist(A, B), params.c) ** params.p
    rows, cols = linear_sum_assignment(D)
    total = D[rows, cols].sum() + params.c**params.p * (n - m)
    return float((total / n) ** (1.0 / params.p))
