"""Scenario generators, baselines, metrics and the replication harness.

Six scenario families cover homogeneous/heterogeneous modality structures,
homogeneous/heterogeneous additive measurement error and heavy tails, plus a
complete-fraction variant. Training data carry the quarter block-missing
pattern; validation and test sets are complete and error-free.
"""

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .datamodel import BlockMissingDataset, ModalityLayout, standardize
from .errors import AdapDiscomError, DimensionError, ShapeError, TooFewCompleteCases
from .solver import predict
from .tuning import TuneSpec, transform_validation, tune

SCENARIOS = ("I", "II", "III", "IV", "V", "VI", "VII")
MIXTURE_RHO = 0.03
RESULT_COLUMNS = ("replicate", "method", "scenario", "tau2", "n",
                  "mse", "r2", "bias", "f1", "wall_time", "failed")


def _normalize_scenario(scenario):
    s = str(scenario).upper()
    if s not in SCENARIOS:
        raise DimensionError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    return s


def even_layout(p, K):
    """Split p predictors into K near-equal contiguous blocks."""
    base, rem = divmod(p, K)
    if base < 1:
        raise DimensionError(f"cannot split p={p} into K={K} modalities")
    return ModalityLayout(tuple(base + (1 if k < rem else 0) for k in range(K)))


def resolve_tau2(scenario, tau2, K):
    """Per-modality error variances from a scalar knob or explicit tuple.

    Scenario III fixes the first two modalities at 0.2 and 0.5; a scalar
    knob sets the third. Elsewhere a scalar applies to every modality.
    """
    scenario = _normalize_scenario(scenario)
    if tau2 is None:
        tau2 = 0.0
    if np.isscalar(tau2):
        if scenario == "III":
            if K != 3:
                raise DimensionError("scenario III requires K=3")
            out = (0.2, 0.5, float(tau2))
        else:
            out = (float(tau2),) * K
    else:
        out = tuple(float(t) for t in tau2)
        if len(out) != K:
            raise DimensionError(f"tau2 needs {K} entries, got {len(out)}")
    if any(t < 0 for t in out):
        raise DimensionError("error variances must be nonnegative")
    return out


@dataclass
class ScenarioSpec:
    scenario: str = "I"
    n: int = 120
    p: int = 300
    K: int = 3
    tau2: tuple = None
    complete_fraction: float = None
    noise: str = None
    seed: int = 0
    val_n: int = 200
    test_n: int = 400

    def __post_init__(self):
        self.scenario = _normalize_scenario(self.scenario)
        self.tau2 = resolve_tau2(self.scenario, self.tau2, self.K)
        if self.noise is None:
            self.noise = "student5" if self.scenario == "VI" else "gaussian"
        if self.noise not in ("gaussian", "student5"):
            raise DimensionError(f"unknown noise {self.noise!r}")
        if self.scenario == "VII":
            if self.complete_fraction is None:
                self.complete_fraction = 0.25
            if not 0 < self.complete_fraction <= 1:
                raise DimensionError("complete_fraction must lie in (0, 1]")
        if self.n < 4 or self.val_n < 2 or self.test_n < 2:
            raise DimensionError("sample sizes too small")

    @property
    def layout(self):
        return even_layout(self.p, self.K)


@dataclass(frozen=True)
class TrueModel:
    beta0: np.ndarray
    support: tuple
    s: int

    def __post_init__(self):
        beta0 = np.ascontiguousarray(np.asarray(self.beta0, dtype=np.float64))
        beta0.setflags(write=False)
        object.__setattr__(self, "beta0", beta0)


def true_model(layout, per_block=5, value=0.5):
    """Coefficient vector with ``per_block`` leading nonzeros per modality."""
    beta0 = np.zeros(layout.p)
    support = []
    for k in range(layout.K):
        size = layout.sizes[k]
        s_k = min(per_block, size)
        if s_k < per_block:
            warnings.warn(f"modality {k + 1} has only {size} predictors; "
                          f"using {s_k} nonzeros instead of {per_block}")
        off = layout.offsets[k]
        beta0[off:off + s_k] = value
        support.extend(range(off, off + s_k))
    return TrueModel(beta0=beta0, support=tuple(support), s=len(support))


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    r2: float
    bias_l2: float
    f1: float


def ar_covariance(p, rho):
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def gen_covariance(scenario, k, p_k):
    """Population covariance of modality ``k`` (0-based) for a scenario.

    Scenario I uses AR(0.6) everywhere; II/III/IV combine AR(0.6), repeated
    5x5 equicorrelated blocks and a truncated Kronecker of AR(0.8) and
    AR(0.3) factors; V/VI use unit-variance mixture components for the first
    two modalities and AR(0.6) as the scale base of the Student modality.
    """
    scenario = _normalize_scenario(scenario)
    if p_k < 1:
        raise DimensionError("empty modality")
    if scenario in ("I", "VII"):
        return ar_covariance(p_k, 0.6)
    if scenario in ("II", "III", "IV"):
        if k == 0:
            return ar_covariance(p_k, 0.6)
        if k == 1:
            if p_k % 5:
                raise DimensionError(
                    f"block-diagonal modality needs p_k divisible by 5, got {p_k}")
            block = 0.15 * np.ones((5, 5)) + 0.85 * np.eye(5)
            return np.kron(np.eye(p_k // 5), block)
        if k == 2:
            if p_k < 3:
                raise DimensionError("Kronecker modality needs p_k >= 3")
            q = -(-p_k // 3)  # ceil; truncated to the leading principal block
            full = np.kron(ar_covariance(3, 0.8), ar_covariance(q, 0.3))
            return full[:p_k, :p_k].copy()
        raise DimensionError(f"scenario {scenario} defines modalities 0..2, got {k}")
    if scenario in ("V", "VI"):
        if k in (0, 1):
            return np.eye(p_k)
        if k == 2:
            return ar_covariance(p_k, 0.6)
        raise DimensionError(f"scenario {scenario} defines modalities 0..2, got {k}")
    raise AssertionError("unreachable")


def _draw_predictors(spec, N, rng):
    layout = spec.layout
    scenario = spec.scenario
    if scenario in ("I", "VII"):
        chol = np.linalg.cholesky(ar_covariance(layout.p, 0.6))
        return rng.standard_normal((N, layout.p)) @ chol.T
    if spec.K != 3:
        raise DimensionError(f"scenario {scenario} requires K=3, got K={spec.K}")
    X = np.empty((N, layout.p))
    for k in range(3):
        sl = layout.block_slice(k)
        p_k = layout.sizes[k]
        if scenario in ("II", "III", "IV"):
            chol = np.linalg.cholesky(gen_covariance(scenario, k, p_k))
            X[:, sl] = rng.standard_normal((N, p_k)) @ chol.T
        elif k in (0, 1):  # V, VI: Gaussian scale mixture, unit variance overall
            wide = rng.random(N) < MIXTURE_RHO
            sd = np.where(wide, 1.0, math.sqrt(0.5))
            X[:, sl] = rng.standard_normal((N, p_k)) * sd[:, None]
        else:  # V, VI: multivariate t5 with scale 0.6 * AR(0.6)
            chol = np.linalg.cholesky(0.6 * gen_covariance(scenario, k, p_k))
            Z = rng.standard_normal((N, p_k)) @ chol.T
            u = rng.chisquare(5, N)
            X[:, sl] = Z * np.sqrt(5.0 / u)[:, None]
    return X


def inject_measurement_error(X, tau2, layout, seed, mask=None):
    """Add independent Gaussian noise with per-modality variances.

    ``seed`` is an integer or a ``numpy.random.Generator``. The draw shape
    is independent of the mask; with a mask given, unobserved cells are left
    untouched.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    X = np.asarray(X, dtype=np.float64)
    tau2 = np.asarray(tau2, dtype=np.float64)
    if tau2.shape != (layout.K,):
        raise ShapeError(f"tau2 needs {layout.K} entries")
    sd_cols = np.repeat(np.sqrt(tau2), layout.sizes)
    W = rng.standard_normal(X.shape) * sd_cols[None, :]
    if mask is not None:
        W = np.where(np.asarray(mask, dtype=bool), W, 0.0)
    return X + W


def _pattern_mask(spec):
    """Observation mask for the training block: quarter design or VII."""
    layout = spec.layout
    n, K = spec.n, spec.K
    mask = np.ones((n, layout.p), dtype=bool)
    if spec.scenario == "IV":
        return mask
    if spec.scenario == "VII":
        n_complete = int(round(spec.complete_fraction * n))
        for i, row in enumerate(range(n_complete, n)):
            k_miss = K - 1 - (i % K)
            mask[row, layout.block_slice(k_miss)] = False
        return mask
    if n % (K + 1):
        raise DimensionError(
            f"n={n} must be divisible by {K + 1} for the block-missing pattern")
    q = n // (K + 1)
    for g in range(1, K + 1):
        k_miss = K - g  # complete rows first, then missing modality K, K-1, ..., 1
        mask[g * q:(g + 1) * q, layout.block_slice(k_miss)] = False
    return mask


@dataclass(frozen=True)
class ScenarioData:
    train: BlockMissingDataset
    val_X: np.ndarray
    val_y: np.ndarray
    test_X: np.ndarray
    test_y: np.ndarray
    truth: TrueModel


def gen_scenario(spec):
    """Draw one replicate: contaminated training set, clean val/test sets."""
    layout = spec.layout
    truth = true_model(layout)
    rng = np.random.default_rng(spec.seed)
    N = spec.n + spec.val_n + spec.test_n
    X = _draw_predictors(spec, N, rng)
    if spec.noise == "student5":
        eps = rng.standard_t(5, N)
    else:
        eps = rng.standard_normal(N)
    y = X @ truth.beta0 + eps

    X_train = X[:spec.n]
    val_X = X[spec.n:spec.n + spec.val_n]
    test_X = X[spec.n + spec.val_n:]
    Z_train = inject_measurement_error(X_train, spec.tau2, layout, rng)
    mask = _pattern_mask(spec)
    train = BlockMissingDataset(X=Z_train, mask=mask, y=y[:spec.n], layout=layout)
    return ScenarioData(train=train, val_X=val_X, val_y=y[spec.n:spec.n + spec.val_n],
                        test_X=test_X, test_y=y[spec.n + spec.val_n:], truth=truth)


def evaluate(beta_hat, truth, test_X, test_y):
    """Prediction MSE, R^2, coefficient l2 error and support-recovery F1."""
    beta_hat = np.asarray(beta_hat, dtype=np.float64)
    test_y = np.asarray(test_y, dtype=np.float64)
    yhat = predict(test_X, beta_hat)
    if yhat.shape != test_y.shape:
        raise ShapeError("test response length mismatch")
    ss_res = float(np.sum((test_y - yhat) ** 2))
    mse = ss_res / test_y.size
    ss_tot = float(np.sum((test_y - test_y.mean()) ** 2))
    if ss_tot > 0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res == 0 else float("-inf")
    bias = float(np.linalg.norm(beta_hat - truth.beta0))
    sel = beta_hat != 0
    sup = np.zeros(beta_hat.size, dtype=bool)
    sup[list(truth.support)] = True
    tp = int(np.sum(sel & sup))
    fp = int(np.sum(sel & ~sup))
    fn = int(np.sum(~sel & sup))
    denom = 2 * tp + fp + fn
    f1 = 1.0 if denom == 0 else 2 * tp / denom
    return MetricsReport(mse=mse, r2=r2, bias_l2=bias, f1=f1)


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

def baseline_mean_impute(ds):
    """Missing cells replaced by the column's observed mean."""
    W = ds.mask.astype(np.float64)
    n_j = W.sum(axis=0)
    means = np.where(n_j > 0, (ds.X * W).sum(axis=0) / np.maximum(n_j, 1.0), 0.0)
    return np.where(ds.mask, ds.X, means[None, :])


def baseline_svd_impute(ds, rank=10, iters=50, tol=1e-6):
    """Iterative hard-rank completion of the missing cells.

    Missing cells start at zero; each round replaces them with the rank-r
    reconstruction of the current filled matrix until the filled cells move
    by less than ``tol`` or the round budget runs out.
    """
    if rank < 1:
        raise ShapeError("rank must be >= 1")
    filled = np.where(ds.mask, ds.X, 0.0)
    missing = ~ds.mask
    if not missing.any():
        return filled
    for _ in range(iters):
        U, s, Vt = np.linalg.svd(filled, full_matrices=False)
        r = min(rank, s.size)
        recon = (U[:, :r] * s[:r]) @ Vt[:r]
        new = np.where(ds.mask, ds.X, recon)
        delta = float(np.max(np.abs(new[missing] - filled[missing])))
        filled = new
        if delta < tol:
            break
    else:
        warnings.warn(f"SVD imputation did not converge in {iters} rounds "
                      f"(last change {delta:.3g}); returning the last iterate")
    return filled


def baseline_complete_case(ds):
    """Subset of fully observed rows."""
    rows = ds.complete_rows()
    if rows.size < 2:
        raise TooFewCompleteCases(f"only {rows.size} complete rows")
    return BlockMissingDataset(X=ds.X[rows], mask=ds.mask[rows], y=ds.y[rows],
                               layout=ds.layout, standardized=ds.standardized)


# ---------------------------------------------------------------------------
# experiment harness
# ---------------------------------------------------------------------------

def default_methods(scenario):
    scenario = _normalize_scenario(scenario)
    methods = ["adapdiscom", "discom", "fast-adapdiscom", "cocolasso"]
    if scenario in ("V", "VI"):
        methods = ["adapdiscom-huber", "fast-adapdiscom-huber"] + methods
    if scenario == "IV":
        methods += ["lasso-complete"]  # imputation adds nothing without missingness
    else:
        methods += ["lasso-complete", "lasso-mean", "lasso-svd"]
    return methods


def make_tune_spec(method, scenario_spec, **overrides):
    """TuneSpec for a method inside the simulation protocol.

    The additive-error correction receives the scenario's true per-modality
    variances, mirroring the known-variance assumption of that estimator.
    """
    kwargs = dict(method=method)
    if method == "cocolasso":
        kwargs["tau2"] = scenario_spec.tau2
    kwargs.update(overrides)
    return TuneSpec(**kwargs)


def _nan_metrics():
    return MetricsReport(mse=float("nan"), r2=float("nan"),
                         bias_l2=float("nan"), f1=float("nan"))


def run_replicate(spec, methods, tune_overrides=None):
    """Generate one replicate and run every method on the same data."""
    data = gen_scenario(spec)
    train_std, report = standardize(data.train)
    val_X = transform_validation(data.val_X, report)
    val_y = data.val_y - report.y_center
    test_X = data.test_X - report.centers[None, :]
    test_y = data.test_y - report.y_center

    rows = []
    for method in methods:
        t0 = time.perf_counter()
        failed = False
        try:
            ts = make_tune_spec(method, spec, **(tune_overrides or {}))
            res = tune(train_std, val_X, val_y, ts)
            beta_orig = res.best_fit.beta * report.scales
            metrics = evaluate(beta_orig, data.truth, test_X, test_y)
        except AdapDiscomError as exc:
            warnings.warn(f"{method} failed on seed {spec.seed}: {exc}")
            metrics = _nan_metrics()
            failed = True
        rows.append({
            "method": method,
            "scenario": spec.scenario,
            "tau2": ";".join(repr(t) for t in spec.tau2),
            "n": spec.n,
            "mse": metrics.mse,
            "r2": metrics.r2,
            "bias": metrics.bias_l2,
            "f1": metrics.f1,
            "wall_time": time.perf_counter() - t0,
            "failed": failed,
        })
    return rows


def run_experiment(spec, methods=None, B=100, seed=0, threads=1,
                   tune_overrides=None):
    """Long-format results over B replicates.

    Replicate r regenerates the scenario with seed ``seed + r`` so every
    method inside a replicate consumes identical data. Failures are recorded
    as flagged rows and do not stop the run.
    """
    methods = list(methods) if methods else default_methods(spec.scenario)

    def one(r):
        rows = run_replicate(replace(spec, seed=seed + r), methods,
                             tune_overrides=tune_overrides)
        for row in rows:
            row["replicate"] = r
        return rows

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(one, range(B)))
    else:
        chunks = [one(r) for r in range(B)]
    return [row for chunk in chunks for row in chunk]


def summarize(rows):
    """Per (scenario, tau2, method) mean and sd of each metric."""
    groups = {}
    for row in rows:
        groups.setdefault((row["scenario"], row["tau2"], row["method"]), []).append(row)
    out = []
    for (scenario, tau2, method), items in sorted(groups.items()):
        ok = [r for r in items if not r["failed"]]
        entry = {"scenario": scenario, "tau2": tau2, "method": method,
                 "n_reps": len(ok), "n_failed": len(items) - len(ok)}
        for metric in ("mse", "r2", "bias", "f1"):
            vals = np.array([r[metric] for r in ok], dtype=np.float64)
            entry[f"{metric}_mean"] = float(vals.mean()) if vals.size else float("nan")
            entry[f"{metric}_sd"] = (float(vals.std(ddof=1))
                                     if vals.size > 1 else 0.0)
        out.append(entry)
    return out


def paired_wins(rows, method_a, method_b, metric="mse"):
    """Replicates where both methods succeeded and ``method_a`` scored lower."""
    per_rep = {}
    for row in rows:
        if row["failed"]:
            continue
        per_rep.setdefault(row["replicate"], {})[row["method"]] = row[metric]
    wins = total = 0
    for rep in sorted(per_rep):
        vals = per_rep[rep]
        if method_a in vals and method_b in vals:
            total += 1
            if vals[method_a] < vals[method_b]:
                wins += 1
    return wins, total
