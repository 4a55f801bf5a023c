"""Block-missing multimodal datasets: ingestion, validation, standardization.

A dataset couples an n x p predictor matrix with a boolean observation mask
(block-constant within each modality per sample) and a fully observed
response. Missing cells are stored as 0.0 and must always be read through
the mask. All containers are immutable after construction.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import BlockPatternError, ParseError, ShapeError

_MISSING_TOKENS = ("", "NA")


def _frozen(arr, dtype=np.float64):
    out = np.ascontiguousarray(np.asarray(arr, dtype=dtype))
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ModalityLayout:
    """Partition of p predictors into K contiguous modality blocks."""

    sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if len(sizes) < 1 or any(s < 1 for s in sizes):
            raise ShapeError(f"every modality needs at least one predictor: {sizes}")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def from_string(cls, text):
        """Parse comma-separated block sizes, e.g. ``"100,100,100"``."""
        try:
            sizes = tuple(int(tok) for tok in text.split(","))
        except ValueError as exc:
            raise ShapeError(f"bad modality list {text!r}") from exc
        return cls(sizes)

    @property
    def K(self):
        return len(self.sizes)

    @property
    def p(self):
        return sum(self.sizes)

    @property
    def offsets(self):
        out = [0]
        for s in self.sizes:
            out.append(out[-1] + s)
        return tuple(out)

    def block_slice(self, k):
        off = self.offsets
        return slice(off[k], off[k + 1])

    def modality_of(self, j):
        """Modality index (0-based) of predictor column j."""
        if not 0 <= j < self.p:
            raise ShapeError(f"column {j} outside 0..{self.p - 1}")
        off = self.offsets
        for k in range(self.K):
            if j < off[k + 1]:
                return k
        raise AssertionError("unreachable")

    def column_modalities(self):
        """Length-p array mapping each column to its modality."""
        return np.repeat(np.arange(self.K), self.sizes)


@dataclass(frozen=True)
class StandardizationReport:
    """Per-column affine transform applied by :func:`standardize`."""

    scales: np.ndarray
    centers: np.ndarray
    y_center: float
    degenerate_columns: tuple
    centered: bool = True

    def __post_init__(self):
        object.__setattr__(self, "scales", _frozen(self.scales))
        object.__setattr__(self, "centers", _frozen(self.centers))
        object.__setattr__(self, "degenerate_columns",
                           tuple(int(j) for j in self.degenerate_columns))


@dataclass(frozen=True)
class BlockMissingDataset:
    X: np.ndarray
    mask: np.ndarray
    y: np.ndarray
    layout: ModalityLayout
    standardized: bool = False

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or mask.shape != X.shape:
            raise ShapeError(f"X {X.shape} and mask {mask.shape} must be equal 2-d shapes")
        if X.shape[1] != self.layout.p:
            raise ShapeError(f"X has {X.shape[1]} columns, layout declares {self.layout.p}")
        if y.shape != (X.shape[0],):
            raise ShapeError(f"y length {y.shape} does not match {X.shape[0]} rows")
        if not np.all(np.isfinite(y)):
            raise ParseError("response contains non-finite values")
        # block constancy: within each modality a row is all-observed or all-missing
        for k in range(self.layout.K):
            sub = mask[:, self.layout.block_slice(k)]
            bad = np.nonzero(sub.any(axis=1) & ~sub.all(axis=1))[0]
            if bad.size:
                raise BlockPatternError(
                    f"row {bad[0]} is partially observed within modality {k + 1}")
        X = np.where(mask, X, 0.0)
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "mask", _frozen(mask, dtype=bool))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def column_counts(self):
        return self.mask.sum(axis=0).astype(np.int64)

    def complete_rows(self):
        return np.nonzero(self.mask.all(axis=1))[0]


def _parse_cell(tok, where):
    tok = tok.strip()
    if tok in _MISSING_TOKENS:
        return 0.0, False
    try:
        return float(tok), True
    except ValueError as exc:
        raise ParseError(f"malformed number {tok!r} at {where}") from exc


def _read_rows(path):
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if any(tok.strip() for tok in row)]
    return rows


def _looks_like_header(row):
    for tok in row:
        tok = tok.strip()
        if tok in _MISSING_TOKENS:
            continue
        try:
            float(tok)
        except ValueError:
            return True
    return False


def load_dataset(path, layout, response="last"):
    """Load a CSV dataset with ``NA``/empty cells marking missing entries.

    ``response`` is either ``"last"`` (response in the final column) or a
    path to a single-column file holding one response value per sample.
    """
    rows = _read_rows(path)
    if rows and _looks_like_header(rows[0]):
        rows = rows[1:]
    if not rows:
        raise ShapeError(f"{path}: no data rows")

    p = layout.p
    separate = response != "last"
    want = p if separate else p + 1
    X = np.zeros((len(rows), p))
    mask = np.zeros((len(rows), p), dtype=bool)
    y = np.zeros(len(rows))
    for i, row in enumerate(rows):
        if len(row) != want:
            raise ShapeError(f"{path}: row {i + 1} has {len(row)} fields, expected {want}")
        for j in range(p):
            X[i, j], mask[i, j] = _parse_cell(row[j], f"{path}:{i + 1}:{j + 1}")
        if not separate:
            val, ok = _parse_cell(row[p], f"{path}:{i + 1}:{p + 1}")
            if not ok:
                raise ParseError(f"{path}: row {i + 1} has a missing response")
            y[i] = val

    if separate:
        yrows = _read_rows(response)
        if yrows and _looks_like_header(yrows[0]):
            yrows = yrows[1:]
        if len(yrows) != len(rows):
            raise ShapeError(
                f"{response}: {len(yrows)} responses for {len(rows)} samples")
        for i, row in enumerate(yrows):
            if len(row) != 1:
                raise ShapeError(f"{response}: row {i + 1} is not a single column")
            val, ok = _parse_cell(row[0], f"{response}:{i + 1}:1")
            if not ok:
                raise ParseError(f"{response}: row {i + 1} has a missing response")
            y[i] = val

    return BlockMissingDataset(X=X, mask=mask, y=y, layout=layout)


def standardize(ds):
    """Center each column on its observed mean and scale it so that the
    pairwise-available variance (1/n_j) * sum_{i in S_j} x_ij^2 equals 1.

    Columns with fewer than two observations or zero observed variance are
    flagged degenerate and left at scale 1; downstream fitting pins them.
    Returns the transformed dataset and the applied transform.
    """
    if ds.standardized:
        raise ShapeError("dataset is already standardized")
    W = ds.mask.astype(np.float64)
    n_j = W.sum(axis=0)
    centers = np.zeros(ds.p)
    scales = np.ones(ds.p)
    degenerate = []

    safe = np.maximum(n_j, 1.0)
    centers = np.where(n_j > 0, (ds.X * W).sum(axis=0) / safe, 0.0)
    Xc = np.where(ds.mask, ds.X - centers[None, :], 0.0)
    mean_sq = (Xc ** 2 * W).sum(axis=0) / safe
    for j in range(ds.p):
        if n_j[j] < 2 or mean_sq[j] < 1e-24:
            degenerate.append(j)
        else:
            scales[j] = 1.0 / np.sqrt(mean_sq[j])
    Xs = Xc * scales[None, :]

    y_center = float(ds.y.mean())
    report = StandardizationReport(scales=scales, centers=centers,
                                   y_center=y_center,
                                   degenerate_columns=tuple(degenerate))
    out = BlockMissingDataset(X=Xs, mask=ds.mask, y=ds.y - y_center,
                              layout=ds.layout, standardized=True)
    return out, report


def observation_counts(ds):
    """Per-column counts n_j and pairwise overlap counts n_jt."""
    Mf = ds.mask.astype(np.float64)
    n_jt = np.rint(Mf.T @ Mf).astype(np.int64)
    n_j = np.diag(n_jt).copy()
    return n_j, n_jt
