"""Hyperparameter selection on a complete held-out validation set.

Enumerates the method's grid (full weight combinations, the fast l0 interval,
or nothing beyond lambda for single-covariance methods), fits the penalty
path for every feasible covariance and returns the combination with the
smallest validation MSE. Ties prefer larger lambda, then larger smallest
eigenvalue.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NoFeasibleCombination, OutOfRange, ShapeError
from .fusion import (cocolasso_correct, combine_adapdiscom, combine_discom,
                     fast_bounds, fast_combine, make_weights)
from .moments import HuberPolicy, gram_moments, huber_moments, pairwise_covariance, partition
from .solver import FitResult, SolverOptions, kkt_residual, lambda_path

WEIGHT_METHODS = ("adapdiscom", "adapdiscom-huber")
DISCOM_METHODS = ("discom", "discom-huber")
FAST_METHODS = ("fast-adapdiscom", "fast-adapdiscom-huber")
BASELINE_METHODS = ("lasso-complete", "lasso-mean", "lasso-svd")
ALL_METHODS = WEIGHT_METHODS + DISCOM_METHODS + FAST_METHODS + ("cocolasso",) + BASELINE_METHODS

DEFAULT_WEIGHT_GRID = tuple(round(0.1 * i, 10) for i in range(1, 11))
PSD_SLACK = 1e-8


def uses_huber(method):
    return method.endswith("-huber")


@dataclass
class TuneSpec:
    method: str
    weight_grid: tuple = DEFAULT_WEIGHT_GRID
    l0_points: int = 10
    lambda_points: int = 30
    lambda_ratio: float = 1e-2
    huber: HuberPolicy = field(default_factory=HuberPolicy)
    tau2: tuple = None
    cocolasso_sign: int = -1
    svd_rank: int = 10
    svd_iters: int = 50
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.method not in ALL_METHODS:
            raise OutOfRange(f"unknown method {self.method!r}; "
                             f"choose from {', '.join(ALL_METHODS)}")
        grid = tuple(float(g) for g in self.weight_grid)
        if not grid or any(g < 0 or g > 1 for g in grid):
            raise OutOfRange("weight grid values must lie in [0, 1]")
        self.weight_grid = grid
        if self.l0_points < 1 or self.lambda_points < 2:
            raise OutOfRange("grids must be non-empty")


@dataclass
class TuneRow:
    params: dict
    lam: float
    val_mse: float
    min_eig: float
    feasible: bool


@dataclass
class TuneResult:
    method: str
    best_params: dict
    best_lambda: float
    validation_mse: float
    n_feasible: int
    table: list
    best_fit: object


def transform_validation(val_X, report):
    """Apply the training centers and scales to a complete matrix."""
    val_X = np.asarray(val_X, dtype=np.float64)
    if val_X.ndim != 2 or val_X.shape[1] != report.scales.size:
        raise ShapeError(f"validation matrix {val_X.shape} does not match "
                         f"{report.scales.size} training columns")
    return (val_X - report.centers[None, :]) * report.scales[None, :]


def _candidates(train, spec):
    """Yield (params, CombinedCovariance, c) for the method's grid."""
    method = spec.method
    layout = train.layout

    if method in BASELINE_METHODS:
        from . import simulation  # deferred: simulation builds on tuning

        if method == "lasso-complete":
            cc = simulation.baseline_complete_case(train)
            m = gram_moments(cc.X, cc.y, layout)
        elif method == "lasso-mean":
            m = gram_moments(simulation.baseline_mean_impute(train), train.y, layout)
        else:
            filled = simulation.baseline_svd_impute(train, rank=spec.svd_rank,
                                                    iters=spec.svd_iters)
            m = gram_moments(filled, train.y, layout)
        part = partition(m)
        cov = combine_adapdiscom(part, make_weights([1.0] * layout.K, 1.0,
                                                    part.traces, layout.p))
        cov.provenance["method"] = method
        yield {}, cov, m.c
        return

    if uses_huber(method):
        m = huber_moments(train, spec.huber)
    else:
        m = pairwise_covariance(train)
    part = partition(m)

    if method == "cocolasso":
        tau2 = spec.tau2 if spec.tau2 is not None else (0.0,) * layout.K
        cov = cocolasso_correct(part, tau2, sign=spec.cocolasso_sign)
        yield {}, cov, m.c
    elif method in FAST_METHODS:
        bounds = fast_bounds(m, part)
        grid = np.unique(np.linspace(bounds.l_min, bounds.l_max, spec.l0_points))
        for l0 in grid:
            yield {"l0": float(l0)}, fast_combine(part, bounds, float(l0)), m.c
    elif method in DISCOM_METHODS:
        for a_i, a_c in itertools.product(spec.weight_grid, spec.weight_grid):
            yield ({"alpha_i": a_i, "alpha_c": a_c},
                   combine_discom(part, a_i, a_c), m.c)
    else:
        for alpha in itertools.product(spec.weight_grid, repeat=layout.K):
            for a_c in spec.weight_grid:
                w = make_weights(alpha, a_c, part.traces, layout.p)
                yield ({"alpha": alpha, "alpha_c": a_c},
                       combine_adapdiscom(part, w), m.c)


def tune(train, val_X, val_y, spec, pinned=None):
    """Grid search returning the combination with the lowest validation MSE.

    ``train`` must be standardized; ``val_X``/``val_y`` must already carry
    the training standardization (see :func:`transform_validation`). The
    penalty path is driven directly on the solver kernel with the running
    ``sigma @ beta`` vector kept alive across warm starts; the winning
    combination's fit is materialized with its KKT certificate at the end.
    """
    if not train.standardized:
        raise ShapeError("tune requires a standardized training set")
    val_X = np.asarray(val_X, dtype=np.float64)
    val_y = np.asarray(val_y, dtype=np.float64)
    if val_X.shape != (val_y.size, train.p):
        raise ShapeError("validation shapes disagree with the training set")
    opts = spec.solver

    n_j = train.column_counts()
    base_pinned = n_j < 2
    if pinned is not None:
        base_pinned = base_pinned | np.asarray(pinned, dtype=bool)

    table = []
    n_feasible = 0
    best = None        # (mse, lam, min_eig, params)
    best_state = None  # (cov, beta copy, sweeps, converged, free)
    n_val = val_y.size
    for params, cov, c in _candidates(train, spec):
        feasible = cov.min_eig >= -PSD_SLACK
        if not feasible:
            table.append(TuneRow(params=params, lam=np.nan, val_mse=np.nan,
                                 min_eig=cov.min_eig, feasible=False))
            continue
        n_feasible += 1
        mat = cov.matrix
        free = ~(base_pinned | (np.diag(mat) <= 0))
        c_free = np.where(free, c, 0.0)
        grid = lambda_path(c_free, spec.lambda_points, spec.lambda_ratio)
        beta = np.zeros(train.p)
        sb = np.zeros(train.p)
        for lam in grid.values:
            lam = float(lam)
            sweeps, ok = kernels.cd_solve(mat, c, lam, beta, sb, free,
                                          float(opts.tol),
                                          int(opts.max_sweeps),
                                          opts.active_set)
            resid = val_y - val_X @ beta
            mse = float(resid @ resid) / n_val
            table.append(TuneRow(params=params, lam=lam, val_mse=mse,
                                 min_eig=cov.min_eig, feasible=True))
            if (best is None or mse < best[0]
                    or (mse == best[0] and (lam > best[1]
                        or (lam == best[1] and cov.min_eig > best[2])))):
                best = (mse, lam, cov.min_eig, params)
                best_state = (cov, c, beta.copy(), int(sweeps), bool(ok), free)

    if best is None:
        raise NoFeasibleCombination(
            f"all {len(table)} candidate combinations were rejected")
    mse, lam, _, params = best
    cov, c_best, beta, sweeps, converged, free = best_state
    kkt = kkt_residual(cov.matrix, c_best, beta, lam, free=free)
    fit = FitResult(beta=beta, lam=lam, kkt=kkt, sweeps=sweeps,
                    converged=converged)
    return TuneResult(method=spec.method, best_params=params, best_lambda=lam,
                      validation_mse=mse, n_feasible=n_feasible, table=table,
                      best_fit=fit)
