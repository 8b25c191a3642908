"""Gaussian and Gaussian-mixture primitives.

Single-object densities throughout the package are Gaussian mixtures over
the kinematic state.  Everything here is a pure function of its inputs; the
containers are treated as immutable values.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy.special import logsumexp

LOG_2PI = np.log(2.0 * np.pi)

# eta below this is treated as "the two densities share no support"
ETA_FLOOR = 1e-300


class DegenerateMixtureError(ValueError):
    """Raised when a mixture has no positive mass to normalise."""


class IncompatibleDensitiesError(ValueError):
    """Raised when a geometric-mean normaliser vanishes.

    ``payload`` carries whatever diagnostic values the raising routine had at
    hand (e.g. the best log weight or the offending eta).
    """

    def __init__(self, message: str, payload: dict | None = None):
        super().__init__(message)
        self.payload = payload or {}


def _sym(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + np.swapaxes(P, -1, -2))


@dataclass(frozen=True, eq=False)
class Gaussian:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean of size {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        return _batched_logpdf(np.atleast_2d(x), self.mean[None], self.cov[None])[:, 0]

    def pdf(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.logpdf(x))


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Weighted sum of Gaussians stored as stacked arrays.

    Attributes
    ----------
    weights : (n,) array
    means : (n, d) array
    covs : (n, d, d) array
    """

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        m = np.asarray(self.means, dtype=float)
        if m.ndim == 1:
            m = m[None, :]
        P = np.asarray(self.covs, dtype=float)
        if P.ndim == 2:
            P = P[None, :, :]
        if not (w.shape[0] == m.shape[0] == P.shape[0]):
            raise ValueError("weights, means and covs disagree on the number of components")
        if P.shape[1:] != (m.shape[1], m.shape[1]):
            raise ValueError("covariance blocks do not match the state dimension")
        if np.any(w < 0):
            raise ValueError("mixture weights must be nonnegative")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "covs", P)

    @classmethod
    def empty(cls, dim: int) -> "GaussianMixture":
        """The zero intensity on a ``dim``-dimensional space."""
        return cls(np.zeros(0), np.zeros((0, dim)), np.zeros((0, dim, dim)))

    @classmethod
    def single(cls, mean, cov, weight: float = 1.0) -> "GaussianMixture":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        return cls(np.array([weight]), mean[None], np.atleast_2d(np.asarray(cov, dtype=float))[None])

    @classmethod
    def from_components(cls, components) -> "GaussianMixture":
        components = list(components)
        return cls(
            np.array([w for w, _ in components]),
            np.stack([g.mean for _, g in components]),
            np.stack([g.cov for _, g in components]),
        )

    def __len__(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def components(self) -> list[tuple[float, Gaussian]]:
        return list(iter(self))

    def __iter__(self) -> Iterator[tuple[float, Gaussian]]:
        for w, m, P in zip(self.weights, self.means, self.covs):
            yield float(w), Gaussian(m, P)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        """Log of the (possibly unnormalised) mixture at points ``x`` of shape (k, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if len(self) == 0:
            return np.full(x.shape[0], -np.inf)
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return logsumexp(_batched_logpdf(x, self.means, self.covs) + logw[None, :], axis=1)

    def pdf(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.logpdf(x))

    def mean(self) -> np.ndarray:
        w = self.weights / self.weights.sum()
        return w @ self.means

    def covariance(self) -> np.ndarray:
        w = self.weights / self.weights.sum()
        mu = w @ self.means
        d = self.means - mu
        return np.einsum("i,ijk->jk", w, self.covs) + np.einsum("i,ij,ik->jk", w, d, d)

    def marginal(self, axes) -> "GaussianMixture":
        """Mixture of the marginal densities on the state coordinates ``axes``."""
        axes = np.atleast_1d(np.asarray(axes, dtype=int))
        return GaussianMixture(
            self.weights, self.means[:, axes], self.covs[:, axes[:, None], axes[None, :]]
        )

    def scaled(self, factor: float) -> "GaussianMixture":
        return GaussianMixture(self.weights * factor, self.means, self.covs)

    def largest(self) -> Gaussian:
        i = int(np.argmax(self.weights))
        return Gaussian(self.means[i], self.covs[i])


def _batched_logpdf(x: np.ndarray, means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """log N(x_k; m_i, P_i) for all points k and components i, shape (k, i)."""
    d = means.shape[1]
    L = np.linalg.cholesky(covs)
    diff = x[:, None, :] - means[None, :, :]  # (k, i, d)
    # solve L y = diff for each component
    y = np.linalg.solve(L[None, :, :, :], diff[..., None])[..., 0]
    maha = np.sum(y * y, axis=-1)
    logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    return -0.5 * (d * LOG_2PI + logdet[None, :] + maha)


def concatenate(mixtures) -> GaussianMixture:
    mixtures = list(mixtures)
    nonempty = [m for m in mixtures if len(m)]
    if not nonempty:
        if not mixtures:
            raise ValueError("nothing to concatenate")
        return mixtures[0]
    mixtures = nonempty
    return GaussianMixture(
        np.concatenate([m.weights for m in mixtures]),
        np.concatenate([m.means for m in mixtures]),
        np.concatenate([m.covs for m in mixtures]),
    )


def gm_normalize(gm: GaussianMixture) -> GaussianMixture:
    total = gm.weights.sum()
    if not total > 0:
        raise DegenerateMixtureError(f"mixture has total weight {total!r}")
    return GaussianMixture(gm.weights / total, gm.means, gm.covs)


def _log_power_scale(covs: np.ndarray, omega: float) -> np.ndarray:
    d = covs.shape[-1]
    _, logdet = np.linalg.slogdet(covs)
    return 0.5 * (1.0 - omega) * (d * LOG_2PI + logdet) - 0.5 * d * np.log(omega)


def gaussian_power(g: Gaussian, omega: float) -> tuple[Gaussian, float]:
    """Fractional power of a Gaussian density.

    Returns ``(N(m, P/omega), scale)`` such that
    ``N(x; m, P)**omega == scale * N(x; m, P/omega)`` for every x.
    """
    if not 0.0 < omega <= 1.0:
        raise ValueError(f"exponent must lie in (0, 1], got {omega}")
    if omega == 1.0:
        return g, 1.0
    scale = float(np.exp(_log_power_scale(g.cov, omega)))
    return Gaussian(g.mean, g.cov / omega), scale


def gm_power_scale(gm: GaussianMixture, omega: float) -> GaussianMixture:
    """Component-wise approximation of ``gm**omega`` (unnormalised).

    Each weight is raised to ``omega`` and each Gaussian exponentiated
    exactly; the result is accurate when the components barely overlap.
    """
    if not 0.0 < omega <= 1.0:
        raise ValueError(f"exponent must lie in (0, 1], got {omega}")
    if omega == 1.0:
        return gm
    logw = _log_gm_power_weights(gm, omega)
    return GaussianMixture(np.exp(logw), gm.means, gm.covs / omega)


def _log_gm_power_weights(gm: GaussianMixture, omega: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return omega * np.log(gm.weights) + _log_power_scale(gm.covs, omega)


def pairwise_products(means1, covs1, logw1, means2, covs2, logw2):
    """Products of every component of one weighted set with every component of another.

    Uses ``N(x;a,A) N(x;b,B) = N(a; b, A+B) N(x; c, C)``.  Returns
    ``(means, covs, logw)`` of shapes (n1, n2, d), (n1, n2, d, d) and
    (n1, n2), where ``logw`` already includes ``log N(a; b, A+B)``.
    """
    d = means1.shape[-1]
    S = covs1[:, None] + covs2[None, :]
    diff = means1[:, None, :] - means2[None, :, :]
    L = np.linalg.cholesky(S)
    y = np.linalg.solve(L, diff[..., None])[..., 0]
    logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    log_z = -0.5 * (d * LOG_2PI + logdet + np.sum(y * y, axis=-1))
    A = np.broadcast_to(covs1[:, None], S.shape)
    # C = A - A (A+B)^-1 A ; c = a - A (A+B)^-1 (a - b)
    SinvA = np.linalg.solve(S, A)
    covs = _sym(A - A @ SinvA)
    means = means1[:, None, :] - np.einsum("iakj,iak->iaj", SinvA, diff)
    return means, covs, logw1[:, None] + logw2[None, :] + log_z


def powered_log_weights(gm: GaussianMixture, omega: float) -> np.ndarray:
    """Log weights of the component-wise power ``gm**omega`` (covariances become P/omega)."""
    if omega == 1.0:
        with np.errstate(divide="ignore"):
            return np.log(gm.weights)
    return _log_gm_power_weights(gm, omega)


def _log_fuse(p1: GaussianMixture, w1: float, p2: GaussianMixture, w2: float):
    """Unnormalised product of the two powered mixtures.

    Returns ``(means, covs, log_weights)`` of the n1*n2 pairwise products.
    The log of eta is ``logsumexp(log_weights)``.
    """
    n1, n2, d = len(p1), len(p2), p1.dim
    means, covs, logw = pairwise_products(
        p1.means, p1.covs / w1, powered_log_weights(p1, w1),
        p2.means, p2.covs / w2, powered_log_weights(p2, w2),
    )
    return means.reshape(n1 * n2, d), covs.reshape(n1 * n2, d, d), logw.reshape(n1 * n2)


def same_mixture(p1: GaussianMixture, p2: GaussianMixture) -> bool:
    """True when both mixtures have identical parameter arrays."""
    return p1 is p2 or (
        p1.means.shape == p2.means.shape
        and np.array_equal(p1.weights, p2.weights)
        and np.array_equal(p1.means, p2.means)
        and np.array_equal(p1.covs, p2.covs)
    )


def log_gci_fuse(p1: GaussianMixture, w1: float, p2: GaussianMixture, w2: float):
    """Log-domain variant of :func:`gci_fuse_gaussian_mixtures`.

    Returns ``(fused, log_eta)``; ``fused`` is ``None`` when every pairwise
    product underflows.  The component-wise power is exact only for
    non-overlapping components, so identical normalised inputs are handled
    separately: their geometric mean is the input itself with ``eta = 1``.
    """
    if same_mixture(p1, p2) and abs(p1.total_weight - 1.0) < 1e-12:
        return p1, 0.0
    means, covs, logw = _log_fuse(p1, w1, p2, w2)
    log_eta = float(logsumexp(logw)) if logw.size else -np.inf
    if not np.isfinite(log_eta):
        return None, -np.inf
    return GaussianMixture(np.exp(logw - log_eta), means, covs), log_eta


def gci_fuse_gaussian_mixtures(
    p1: GaussianMixture, w1: float, p2: GaussianMixture, w2: float
) -> tuple[GaussianMixture, float]:
    """Normalised geometric mean ``p1**w1 * p2**w2`` of two mixtures.

    Parameters
    ----------
    p1, p2 : GaussianMixture
        Normalised input mixtures on the same state space.
    w1, w2 : float
        Exponents in (0, 1) with ``w1 + w2 == 1``.

    Returns
    -------
    fused : GaussianMixture
        Normalised mixture of all pairwise component products.
    eta : float
        The normaliser, i.e. the integral of ``p1**w1 * p2**w2``.

    Raises
    ------
    IncompatibleDensitiesError
        If eta falls below ``ETA_FLOOR``.
    """
    if not (0.0 < w1 < 1.0 and 0.0 < w2 < 1.0) or abs(w1 + w2 - 1.0) > 1e-12:
        raise ValueError(f"weights must be in (0,1) and sum to one, got {w1}, {w2}")
    fused, log_eta = log_gci_fuse(p1, w1, p2, w2)
    if fused is None or log_eta < np.log(ETA_FLOOR):
        raise IncompatibleDensitiesError(
            "geometric mean of the two mixtures has (numerically) zero mass",
            {"log_eta": log_eta},
        )
    return fused, float(np.exp(log_eta))


def kalman_predict(g, F: np.ndarray, Q: np.ndarray):
    """Linear-Gaussian prediction of a Gaussian or of every mixture component."""
    F = np.asarray(F, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if isinstance(g, GaussianMixture):
        if F.shape != (g.dim, g.dim) or Q.shape != F.shape:
            raise ValueError("transition model does not match the state dimension")
        means = g.means @ F.T
        covs = _sym(F @ g.covs @ F.T + Q)
        return GaussianMixture(g.weights, means, covs)
    if F.shape != (g.dim, g.dim) or Q.shape != F.shape:
        raise ValueError("transition model does not match the state dimension")
    return Gaussian(F @ g.mean, _sym(F @ g.cov @ F.T + Q))


def kalman_update(g: Gaussian, z: np.ndarray, H: np.ndarray, R: np.ndarray) -> tuple[Gaussian, float]:
    """Conjugate update of a Gaussian with one linear-Gaussian measurement.

    Returns the posterior and the measurement likelihood
    ``N(z; H m, H P H' + R)``.  A singular innovation covariance raises
    ``numpy.linalg.LinAlgError``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if H.shape != (z.size, g.dim):
        raise ValueError("observation matrix does not match state/measurement dimensions")
    S = _sym(H @ g.cov @ H.T + R)
    L = np.linalg.cholesky(S)
    nu = z - H @ g.mean
    K = np.linalg.solve(S, H @ g.cov).T
    mean = g.mean + K @ nu
    cov = _sym(g.cov - K @ S @ K.T)
    y = np.linalg.solve(L, nu)
    loglik = -0.5 * (z.size * LOG_2PI + 2.0 * np.sum(np.log(np.diag(L))) + y @ y)
    return Gaussian(mean, cov), float(np.exp(loglik))


@dataclass(frozen=True, eq=False)
class MixtureUpdate:
    """Kalman update of every mixture component against a batch of measurements.

    ``log_lik[j, k]`` is log N(z_j; H m_k, S_k); ``means[j, k]`` the posterior
    mean of component k given z_j; ``covs[k]`` does not depend on z.
    """

    log_lik: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    innov_covs: np.ndarray
    mahalanobis: np.ndarray

    def mixture(self, weights: np.ndarray, j: int) -> tuple[GaussianMixture, float]:
        """Posterior mixture given measurement j, and log q(z_j) = log sum_k w_k N(z_j; ...)."""
        with np.errstate(divide="ignore"):
            lw = np.log(weights) + self.log_lik[j]
        lq = float(logsumexp(lw))
        return GaussianMixture(np.exp(lw - lq), self.means[j], self.covs), lq


def gm_kalman_update(gm: GaussianMixture, Z: np.ndarray, H: np.ndarray, R: np.ndarray) -> MixtureUpdate:
    """Kalman-update every component of ``gm`` against every row of ``Z``."""
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    Z = np.asarray(Z, dtype=float).reshape(-1, H.shape[0])
    S = _sym(H @ gm.covs @ H.T + R)  # (n, dz, dz)
    K = np.swapaxes(np.linalg.solve(S, H @ gm.covs), -1, -2)  # (n, d, dz)
    covs = _sym(gm.covs - K @ S @ np.swapaxes(K, -1, -2))
    pred = gm.means @ H.T  # (n, dz)
    nu = Z[:, None, :] - pred[None, :, :]  # (m, n, dz)
    means = gm.means[None] + np.einsum("kdz,jkz->jkd", K, nu)
    log_lik, maha = _batched_logpdf_multi(nu, S)
    return MixtureUpdate(log_lik, means, covs, S, maha)


def _batched_logpdf_multi(nu: np.ndarray, S: np.ndarray):
    dz = S.shape[-1]
    L = np.linalg.cholesky(S)
    y = np.linalg.solve(L[None], nu[..., None])[..., 0]
    logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    maha = np.sum(y * y, axis=-1)
    return -0.5 * (dz * LOG_2PI + logdet[None, :] + maha), maha


def gm_prune_merge(gm: GaussianMixture, prune_threshold: float, merge_threshold: float, max_components: int) -> GaussianMixture:
    """Prune, merge and cap a mixture, then renormalise.

    Components lighter than ``prune_threshold`` are dropped (if that would
    remove everything, the single heaviest component is kept).  Remaining
    components are greedily grouped around the heaviest one: every component
    whose squared Mahalanobis distance to the group leader is at most
    ``merge_threshold`` is merged moment-preservingly.  Finally only the
    ``max_components`` heaviest survive.
    """
    if prune_threshold < 0 or merge_threshold < 0 or max_components < 1:
        raise ValueError("invalid pruning/merging parameters")
    if len(gm.weights) == 1:
        return GaussianMixture(np.ones(1), gm.means, gm.covs)
    keep = np.flatnonzero(gm.weights >= prune_threshold)
    if keep.size == 0:
        keep = np.array([int(np.argmax(gm.weights))])
    w = gm.weights[keep]
    m = gm.means[keep]
    P = gm.covs[keep]

    if len(w) > 1:
        Pinv = np.linalg.inv(P)
        remaining = np.ones(len(w), dtype=bool)
        out_w, out_m, out_P = [], [], []
        while remaining.any():
            idx = np.flatnonzero(remaining)
            j = idx[np.argmax(w[idx])]
            d = m[idx] - m[j]
            maha = np.einsum("ij,ijk,ik->i", d, Pinv[idx], d)
            group = idx[maha <= merge_threshold]
            wg = w[group]
            wt = wg.sum()
            mu = wg @ m[group] / wt
            dm = m[group] - mu
            cov = (np.einsum("i,ijk->jk", wg, P[group]) + np.einsum("i,ij,ik->jk", wg, dm, dm)) / wt
            out_w.append(wt)
            out_m.append(mu)
            out_P.append(_sym(cov))
            remaining[group] = False
        w, m, P = np.array(out_w), np.stack(out_m), np.stack(out_P)

    if len(w) > max_components:
        top = np.argsort(-w, kind="stable")[:max_components]
        top.sort()
        w, m, P = w[top], m[top], P[top]
    return GaussianMixture(w / w.sum(), m, P)
