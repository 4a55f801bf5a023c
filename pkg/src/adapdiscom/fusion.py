"""Fusing partitioned moments into a positive semi-definite covariance.

The weighted combination sums per-modality intra blocks, the cross part and
a trace-matched multiple of the identity. The fast reparametrization ties
all weights to a single parameter l0 whose admissible interval is computed
from two eigendecompositions and guarantees positive semi-definiteness.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (ConvergenceFailure, DegenerateRatio, NonPositiveDenominator,
                     OutOfRange, ShapeError)

EIG_TOL = 1e-8  # eigenvalues in [-EIG_TOL, 0) are treated as zero


def min_eigenvalue(mat):
    """Smallest eigenvalue of a symmetric matrix."""
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ShapeError(f"expected a square matrix, got {mat.shape}")
    try:
        w = np.linalg.eigvalsh(mat)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return float(w[0])


def psd_clip(mat):
    """Nearest symmetric matrix with eigenvalues clipped at zero."""
    try:
        w, V = np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    w = np.maximum(w, 0.0)
    out = (V * w) @ V.T
    return (out + out.T) / 2.0


def gamma_star(alpha, traces, p):
    """Trace-matching identity coefficient for the weighted combination.

    gamma* = (1/p) * sum_k w_k * Tr(sigma_Ik) with w_k proportional to
    (1 - alpha_k)^2; defined as 0 when every alpha_k equals 1.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    traces = np.asarray(traces, dtype=np.float64)
    if alpha.shape != traces.shape:
        raise ShapeError("alpha and traces must have one entry per modality")
    u2 = (1.0 - alpha) ** 2
    total = u2.sum()
    if total == 0.0:
        return 0.0
    return float((u2 / total) @ traces / p)


@dataclass(frozen=True)
class FusionWeights:
    alpha: tuple
    alpha_c: float
    gamma_star: float
    alpha_p: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        eps = 1e-9
        if any(a < -eps or a > 1 + eps for a in self.alpha):
            raise OutOfRange(f"alpha outside [0,1]: {self.alpha}")
        if self.alpha_c < -eps or self.alpha_c > 1 + eps:
            raise OutOfRange(f"alpha_c outside [0,1]: {self.alpha_c}")
        if self.gamma_star < 0 or self.alpha_p < -eps:
            raise OutOfRange("gamma_star and alpha_p must be nonnegative")


def make_weights(alpha, alpha_c, traces, p):
    """FusionWeights with gamma* and alpha_p derived from alpha and traces."""
    g = gamma_star(alpha, traces, p)
    alpha = tuple(float(a) for a in alpha)
    alpha_p = g * sum(1.0 - a for a in alpha)
    return FusionWeights(alpha=alpha, alpha_c=float(alpha_c), gamma_star=g,
                         alpha_p=alpha_p)


class CombinedCovariance:
    """Symmetric fused covariance with provenance and a lazy smallest eigenvalue."""

    def __init__(self, matrix, provenance):
        matrix = np.asarray(matrix, dtype=np.float64)
        if np.max(np.abs(matrix - matrix.T)) > 1e-12:
            raise ShapeError("combined covariance is not symmetric")
        matrix = np.ascontiguousarray(matrix)
        matrix.setflags(write=False)
        self.matrix = matrix
        self.provenance = dict(provenance)
        self._min_eig = None

    @property
    def p(self):
        return self.matrix.shape[0]

    @property
    def min_eig(self):
        if self._min_eig is None:
            self._min_eig = min_eigenvalue(self.matrix)
        return self._min_eig

    def __repr__(self):
        return f"CombinedCovariance(p={self.p}, provenance={self.provenance})"


def combine_adapdiscom(part, weights):
    """sigma_hat = sum_k alpha_k * sigma_Ik + alpha_c * sigma_C + alpha_p * I."""
    layout = part.layout
    if len(weights.alpha) != layout.K:
        raise ShapeError(f"{len(weights.alpha)} weights for K={layout.K}")
    out = weights.alpha_c * part.cross
    for k in range(layout.K):
        sl = layout.block_slice(k)
        out[sl, sl] = weights.alpha[k] * part.intra[k]
    idx = np.arange(layout.p)
    out[idx, idx] += weights.alpha_p
    return CombinedCovariance(out, {"method": "adapdiscom",
                                    "alpha": weights.alpha,
                                    "alpha_c": weights.alpha_c,
                                    "gamma_star": weights.gamma_star,
                                    "alpha_p": weights.alpha_p})


def combine_discom(part, alpha_i, alpha_c):
    """Single intra weight for every modality (the non-adaptive combination)."""
    w = make_weights([alpha_i] * part.layout.K, alpha_c, part.traces, part.layout.p)
    out = combine_adapdiscom(part, w)
    out.provenance["method"] = "discom"
    out.provenance["alpha_i"] = float(alpha_i)
    return out


def cocolasso_correct(part, tau2, sign=-1):
    """Additive-error correction of the diagonal followed by a PSD projection.

    Subtracts (default) the per-modality error variances tau2_k from the
    corresponding diagonal entries, then clips negative eigenvalues at zero.
    ``sign=+1`` reproduces the printed form of the correction instead of the
    unbiased one.
    """
    layout = part.layout
    tau2 = np.asarray(tau2, dtype=np.float64)
    if tau2.shape != (layout.K,):
        raise ShapeError(f"tau2 needs one entry per modality, got {tau2.shape}")
    if np.any(tau2 < 0):
        raise OutOfRange("error variances must be nonnegative")
    if sign not in (-1, 1):
        raise OutOfRange("sign must be -1 or +1")
    mat = part.assemble()
    idx = np.arange(layout.p)
    mat[idx, idx] += sign * np.repeat(tau2, layout.sizes)
    mat = psd_clip(mat)
    return CombinedCovariance(mat, {"method": "cocolasso",
                                    "tau2": tuple(float(t) for t in tau2),
                                    "sign": int(sign)})


def oracle_weights(delta_i2, theta_i2, delta_c2, norm_c2, traces, p):
    """Loss-minimizing weights from the estimation-error second moments.

    alpha_k = theta_Ik^2 / (theta_Ik^2 + delta_Ik^2) and
    alpha_c = ||sigma_C||_F^2 / (||sigma_C||_F^2 + delta_C^2); gamma* and
    alpha_p follow from the supplied traces.
    """
    delta_i2 = np.asarray(delta_i2, dtype=np.float64)
    theta_i2 = np.asarray(theta_i2, dtype=np.float64)
    if delta_i2.shape != theta_i2.shape:
        raise ShapeError("delta and theta need one entry per modality")
    if np.any(delta_i2 < 0) or np.any(theta_i2 < 0) or delta_c2 < 0 or norm_c2 < 0:
        raise OutOfRange("second moments must be nonnegative")
    denom = theta_i2 + delta_i2
    if np.any(denom == 0):
        raise DegenerateRatio("theta^2 + delta^2 vanishes for some modality")
    if norm_c2 + delta_c2 == 0:
        raise DegenerateRatio("||sigma_C||^2 + delta_C^2 vanishes")
    alpha = theta_i2 / denom
    alpha_c = norm_c2 / (norm_c2 + delta_c2)
    return make_weights(alpha, alpha_c, traces, p)


def optimal_loss(delta_i2, theta_i2, delta_c2, norm_c2):
    """Closed-form minimized expected quadratic loss at the optimal weights."""
    delta_i2 = np.asarray(delta_i2, dtype=np.float64)
    theta_i2 = np.asarray(theta_i2, dtype=np.float64)
    return float(np.sum(delta_i2 * theta_i2 / (theta_i2 + delta_i2))
                 + delta_c2 * norm_c2 / (delta_c2 + norm_c2))


@dataclass(frozen=True)
class FastBounds:
    m: tuple
    m_c: float
    l_min: float
    l_max: float

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(float(v) for v in self.m))
        if not 0 <= self.l_min <= self.l_max:
            raise OutOfRange(f"bad l0 interval [{self.l_min}, {self.l_max}]")


def _rate_constants(moments, part):
    layout = part.layout
    p = layout.p
    if p < 2:
        raise ShapeError("need p >= 2 so that log p > 0")
    logp = math.log(p)
    n_j = np.diag(moments.counts)
    m = np.array([math.sqrt(logp / n_j[layout.block_slice(k)].min())
                  for k in range(layout.K)])
    if layout.K == 1:
        m_c = float(m[0])
    else:
        col_mod = layout.column_modalities()
        cross = col_mod[:, None] != col_mod[None, :]
        m_c = math.sqrt(logp / moments.counts[cross].min())
    return m, m_c


def _identity_coefficient(m, m_c, traces, p):
    m = np.asarray(m, dtype=np.float64)
    return float(m.sum() * (m ** 2 @ traces) / (p * (m ** 2).sum()))


def fast_bounds(moments, part):
    """Admissible interval [l_min, l_max] for the one-parameter combination.

    Uses exactly two eigendecompositions: of the assembled sigma and of the
    matrix M = sum_k (m_c - m_k) sigma_Ik + c*I that scales the l0 direction.
    For l0 in the interval, alpha_k = 1 - l0*m_k and alpha_c = 1 - l0*m_c
    give a positive semi-definite combination.
    """
    layout = part.layout
    m, m_c = _rate_constants(moments, part)
    l_max = 1.0 / m_c
    kappa_sigma = min_eigenvalue(part.assemble())
    if kappa_sigma >= 0:
        return FastBounds(m=tuple(m), m_c=m_c, l_min=0.0, l_max=l_max)

    direction = np.zeros((layout.p, layout.p))
    for k in range(layout.K):
        sl = layout.block_slice(k)
        direction[sl, sl] = (m_c - m[k]) * part.intra[k]
    idx = np.arange(layout.p)
    direction[idx, idx] += _identity_coefficient(m, m_c, part.traces, layout.p)
    kappa_dir = min_eigenvalue(direction)
    denom = -m_c * kappa_sigma + kappa_dir
    if denom <= 0:
        raise NonPositiveDenominator(
            f"lower-bound quotient undefined (denominator {denom:.3g})")
    l_min = -kappa_sigma / denom
    if l_min > l_max:
        raise NonPositiveDenominator(
            f"l_min {l_min:.3g} exceeds l_max {l_max:.3g}")
    return FastBounds(m=tuple(m), m_c=m_c, l_min=l_min, l_max=l_max)


def fast_combine(part, bounds, l0):
    """Weighted combination at alpha_k = 1 - l0*m_k, alpha_c = 1 - l0*m_c."""
    if not bounds.l_min - 1e-12 <= l0 <= bounds.l_max + 1e-12:
        raise OutOfRange(
            f"l0={l0} outside [{bounds.l_min}, {bounds.l_max}]")
    alpha = [1.0 - l0 * mk for mk in bounds.m]
    alpha_c = 1.0 - l0 * bounds.m_c
    w = make_weights(alpha, alpha_c, part.traces, part.layout.p)
    out = combine_adapdiscom(part, w)
    out.provenance["method"] = "fast-adapdiscom"
    out.provenance["l0"] = float(l0)
    return out
