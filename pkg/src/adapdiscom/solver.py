"""Penalized quadratic solver: cyclic coordinate descent over a lambda path.

Minimizes 0.5 * b' S b - c' b + lam * |b|_1 for a positive semi-definite S,
with warm starts along a decreasing log-spaced grid and a KKT residual
recomputed from the final iterate as a convergence certificate.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (AllZeroCovariance, IndefiniteCovariance, OutOfRange,
                     ShapeError, ZeroDiagonal)
from .fusion import CombinedCovariance, min_eigenvalue

PSD_SLACK = 1e-8


@dataclass
class SolverOptions:
    tol: float = 1e-7
    max_sweeps: int = 10000
    active_set: bool = True
    allow_indefinite: bool = False

    def __post_init__(self):
        if self.tol <= 0 or self.max_sweeps < 1:
            raise OutOfRange("tol must be > 0 and max_sweeps >= 1")


@dataclass(frozen=True)
class FitResult:
    beta: np.ndarray
    lam: float
    kkt: float
    sweeps: int
    converged: bool

    def __post_init__(self):
        beta = np.ascontiguousarray(np.asarray(self.beta, dtype=np.float64))
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    def support(self):
        return np.nonzero(self.beta)[0]

    def to_dict(self):
        return {"lambda": self.lam, "beta": self.beta.tolist(),
                "kkt": self.kkt, "sweeps": self.sweeps,
                "converged": self.converged}

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d):
        return cls(beta=np.asarray(d["beta"], dtype=np.float64),
                   lam=float(d["lambda"]), kkt=float(d["kkt"]),
                   sweeps=int(d["sweeps"]), converged=bool(d["converged"]))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class LambdaGrid:
    values: np.ndarray

    def __post_init__(self):
        values = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if values.ndim != 1 or values.size == 0:
            raise ShapeError("lambda grid must be a non-empty vector")
        if values.size > 1 and np.any(np.diff(values) >= 0):
            raise OutOfRange("lambda grid must be strictly decreasing")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_points(self):
        return self.values.size


def lambda_path(c, n_points=30, ratio=1e-2):
    """Log-spaced grid from lambda_max = max|c_j| down to ratio * lambda_max."""
    c = np.asarray(c, dtype=np.float64)
    if n_points < 2:
        raise OutOfRange("need at least two grid points")
    if not 0 < ratio < 1:
        raise OutOfRange("ratio must lie strictly between 0 and 1")
    lam_max = float(np.max(np.abs(c)))
    if lam_max == 0.0:
        raise AllZeroCovariance("cross-covariance vector is identically zero")
    return LambdaGrid(np.geomspace(lam_max, ratio * lam_max, n_points))


def _as_matrix(sigma_hat):
    if isinstance(sigma_hat, CombinedCovariance):
        return sigma_hat.matrix, sigma_hat.min_eig
    mat = np.asarray(sigma_hat, dtype=np.float64)
    return mat, None


def kkt_residual(sigma_hat, c, beta, lam, free=None):
    """Max-norm violation of the stationarity conditions at beta.

    Off the support the gradient |Sb - c|_j may not exceed lam (excess is
    clamped at zero); on the support (Sb - c)_j + lam * sign(b_j) must
    vanish. Returns the largest violation over the free coordinates.
    """
    mat, _ = _as_matrix(sigma_hat)
    beta = np.asarray(beta, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if mat.shape != (c.size, c.size) or beta.shape != c.shape:
        raise ShapeError("kkt_residual: shapes disagree")
    grad = mat @ beta - c
    on = beta != 0.0
    resid = np.maximum(np.abs(grad) - lam, 0.0)
    resid[on] = np.abs(grad[on] + lam * np.sign(beta[on]))
    if free is not None:
        resid = resid[np.asarray(free, dtype=bool)]
    return float(resid.max()) if resid.size else 0.0


def objective(sigma_hat, c, beta, lam):
    """0.5 * b'Sb - c'b + lam * |b|_1 (used by convergence diagnostics)."""
    mat, _ = _as_matrix(sigma_hat)
    beta = np.asarray(beta, dtype=np.float64)
    return float(0.5 * beta @ mat @ beta - np.dot(c, beta)
                 + lam * np.abs(beta).sum())


def cd_lasso(sigma_hat, c, lam, warm=None, opts=None, pinned=None):
    """Cyclic coordinate descent at a single penalty level.

    Updates beta_j <- soft(c_j - sum_{t != j} S_jt beta_t, lam) / S_jj until
    the largest coordinate change in a sweep drops to ``opts.tol``. Pinned
    coordinates are held at zero and skipped. ``sigma_hat`` must be positive
    semi-definite up to a small slack unless ``opts.allow_indefinite``.
    """
    opts = opts or SolverOptions()
    mat, min_eig = _as_matrix(sigma_hat)
    c = np.asarray(c, dtype=np.float64)
    p = c.size
    if mat.shape != (p, p):
        raise ShapeError(f"sigma {mat.shape} vs c of length {p}")
    if lam <= 0:
        raise OutOfRange("lambda must be positive")
    if not opts.allow_indefinite:
        if min_eig is None:
            min_eig = min_eigenvalue(mat)
        if min_eig < -PSD_SLACK:
            raise IndefiniteCovariance(
                f"smallest eigenvalue {min_eig:.3g} < {-PSD_SLACK}; "
                "pass allow_indefinite to override")

    free = np.ones(p, dtype=bool)
    if pinned is not None:
        free &= ~np.asarray(pinned, dtype=bool)
    diag = np.diag(mat)
    bad = np.nonzero(free & (diag <= 0))[0]
    if bad.size:
        raise ZeroDiagonal(int(bad[0]))

    if warm is None:
        beta = np.zeros(p)
        sb = np.zeros(p)
    else:
        beta = np.array(warm, dtype=np.float64).copy()
        if beta.shape != (p,):
            raise ShapeError("warm start has wrong length")
        beta[~free] = 0.0
        sb = mat @ beta
    sweeps, ok = kernels.cd_solve(mat, c, float(lam), beta, sb, free,
                                  float(opts.tol), int(opts.max_sweeps),
                                  opts.active_set)
    kkt = kkt_residual(mat, c, beta, lam, free=free)
    return FitResult(beta=beta, lam=float(lam), kkt=kkt, sweeps=int(sweeps),
                     converged=bool(ok))


def fit_path(sigma_hat, c, grid, opts=None, pinned=None):
    """Warm-started fits over a decreasing lambda grid, in grid order."""
    results = []
    warm = None
    for i, lam in enumerate(grid.values):
        try:
            fit = cd_lasso(sigma_hat, c, float(lam), warm=warm, opts=opts,
                           pinned=pinned)
        except Exception as exc:
            exc.args = (f"lambda[{i}]={lam:.6g}: {exc}",)
            raise
        results.append(fit)
        warm = fit.beta
    return results


def predict(X, beta):
    """Linear predictions X @ beta for a fully observed matrix."""
    X = np.asarray(X, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != beta.size:
        raise ShapeError(f"X {X.shape} does not match beta of length {beta.size}")
    return X @ beta
