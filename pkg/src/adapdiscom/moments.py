"""Initial covariance estimates from block-missing data.

Entries of sigma are pairwise-available products averaged over the samples
where both predictors are observed; the robust variant replaces each average
by a Huber location estimate. Both are partitioned into intra-modality
blocks and a cross-modality remainder.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .datamodel import ModalityLayout, _frozen, observation_counts
from .errors import DegenerateColumn, EmptyOverlap, ShapeError

HUBER_DEFAULT = 1.345
HUBER_TOL = 1e-10


@dataclass(frozen=True)
class PairwiseMoments:
    sigma: np.ndarray
    counts: np.ndarray
    c: np.ndarray
    c_counts: np.ndarray
    robust: bool
    layout: ModalityLayout

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if sigma.shape != (self.layout.p, self.layout.p):
            raise ShapeError(f"sigma shape {sigma.shape} vs p={self.layout.p}")
        if np.max(np.abs(sigma - sigma.T)) > 1e-12:
            raise ShapeError("sigma is not symmetric")
        object.__setattr__(self, "sigma", _frozen(sigma))
        object.__setattr__(self, "counts", _frozen(self.counts, dtype=np.int64))
        object.__setattr__(self, "c", _frozen(self.c))
        object.__setattr__(self, "c_counts", _frozen(self.c_counts, dtype=np.int64))


@dataclass(frozen=True)
class MomentPartition:
    """sigma split into K intra-modality blocks plus the cross remainder."""

    intra: tuple
    cross: np.ndarray
    traces: np.ndarray
    layout: ModalityLayout

    def __post_init__(self):
        object.__setattr__(self, "intra", tuple(_frozen(b) for b in self.intra))
        object.__setattr__(self, "cross", _frozen(self.cross))
        object.__setattr__(self, "traces", _frozen(self.traces))

    def assemble(self):
        """Block-diagonal embedding of the intra blocks plus the cross part."""
        out = self.cross.copy()
        for k in range(self.layout.K):
            sl = self.layout.block_slice(k)
            out[sl, sl] = self.intra[k]
        return out


@dataclass(frozen=True)
class HuberPolicy:
    """Threshold selection for the Huber location estimates.

    ``fixed`` uses ``H_fixed`` everywhere; ``adaptive`` scales thresholds
    with the available sample sizes, H_jt = c_sigma * sqrt(n_jt / log p) for
    covariance entries and H_j = c_c * sqrt(n_j / log p) for the
    cross-covariance vector.
    """

    mode: str = "fixed"
    H_fixed: float = HUBER_DEFAULT
    c_sigma: float = 1.0
    c_c: float = 1.0

    def __post_init__(self):
        if self.mode not in ("fixed", "adaptive"):
            raise ShapeError(f"unknown Huber mode {self.mode!r}")
        if min(self.H_fixed, self.c_sigma, self.c_c) <= 0:
            raise ShapeError("Huber thresholds must be strictly positive")

    def sigma_thresholds(self, counts, p):
        if self.mode == "fixed":
            return np.full(counts.shape, float(self.H_fixed))
        return self.c_sigma * np.sqrt(np.maximum(counts, 1) / math.log(p))

    def c_thresholds(self, c_counts, p):
        if self.mode == "fixed":
            return np.full(c_counts.shape, float(self.H_fixed))
        return self.c_c * np.sqrt(np.maximum(c_counts, 1) / math.log(p))


def _require_overlap(counts):
    bad = np.argwhere(counts < 2)
    if bad.size:
        j, t = bad[0]
        raise EmptyOverlap(int(j), int(t), int(counts[j, t]))


def pairwise_covariance(ds):
    """Sample moments over pairwise-available observations.

    sigma[j, t] averages x_ij * x_it over the samples where both columns are
    observed; c[j] averages y_i * x_ij over the samples where column j is
    observed. Requires every overlap count n_jt >= 2.
    """
    n_j, n_jt = observation_counts(ds)
    _require_overlap(n_jt)
    Z = ds.X  # missing entries are stored as exact zeros
    sigma = (Z.T @ Z) / n_jt
    sigma = (sigma + sigma.T) / 2.0
    c = (Z.T @ ds.y) / n_j
    return PairwiseMoments(sigma=sigma, counts=n_jt, c=c, c_counts=n_j,
                           robust=False, layout=ds.layout)


def huber_location(values, H):
    """Root of sum(psi_H(v_i - mu)) = 0; midpoint of the root interval.

    The estimating function is continuous, piecewise linear and
    non-increasing in mu, so the root set is a closed interval located by
    bracketed bisection on [min(v) - H, max(v) + H].
    """
    v = np.ascontiguousarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ShapeError("huber_location needs a non-empty 1-d sample")
    if H <= 0:
        raise ShapeError("Huber threshold must be positive")
    return float(kernels.huber_location_kernel(v, float(H), HUBER_TOL))


def huber_moments(ds, policy=None):
    """Huber M-estimates of sigma and c, with sigma rescaled to unit diagonal.

    Each entry solves the Huber location equation over the pairwise products;
    afterwards sigma[j, t] is divided by sqrt(sigma[j, j] * sigma[t, t]) so
    the diagonal matches the unit-variance convention.
    """
    policy = policy or HuberPolicy()
    n_j, n_jt = observation_counts(ds)
    _require_overlap(n_jt)
    H_sigma = np.ascontiguousarray(policy.sigma_thresholds(n_jt, ds.p))
    H_c = np.ascontiguousarray(policy.c_thresholds(n_j, ds.p))

    sigma = kernels.huber_sigma_sweep(ds.X, ds.mask, H_sigma, HUBER_TOL)
    diag = np.diag(sigma).copy()
    if np.any(diag <= 0):
        j = int(np.argmin(diag))
        raise DegenerateColumn(f"robust variance of column {j} is {diag[j]:.3g} <= 0")
    d = np.sqrt(diag)
    sigma = sigma / np.outer(d, d)
    np.fill_diagonal(sigma, 1.0)
    sigma = (sigma + sigma.T) / 2.0

    c = kernels.huber_c_sweep(ds.X, ds.mask, ds.y, H_c, HUBER_TOL)
    return PairwiseMoments(sigma=sigma, counts=n_jt, c=c, c_counts=n_j,
                           robust=True, layout=ds.layout)


def partition(m):
    """Split moments into intra-modality blocks and the cross remainder.

    The cross part is sigma with the diagonal blocks zeroed, so embedding
    the intra blocks back on the block diagonal reproduces sigma exactly.
    """
    layout = m.layout
    intra = []
    cross = m.sigma.copy()
    for k in range(layout.K):
        sl = layout.block_slice(k)
        intra.append(m.sigma[sl, sl].copy())
        cross[sl, sl] = 0.0
    traces = np.array([np.trace(b) for b in intra])
    return MomentPartition(intra=tuple(intra), cross=cross, traces=traces,
                           layout=layout)


def gram_moments(X, y, layout):
    """Complete-data Gram moments (1/n) X'X and (1/n) X'y as PairwiseMoments."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if X.shape[1] != layout.p or y.shape != (n,):
        raise ShapeError("gram_moments: shapes disagree with layout")
    sigma = X.T @ X / n
    sigma = (sigma + sigma.T) / 2.0
    counts = np.full((layout.p, layout.p), n, dtype=np.int64)
    return PairwiseMoments(sigma=sigma, counts=counts, c=X.T @ y / n,
                           c_counts=np.full(layout.p, n, dtype=np.int64),
                           robust=False, layout=layout)
