import numpy as np
import pytest

from adapdiscom import BlockMissingDataset, ModalityLayout


def random_layout(rng, p, K):
    """Random contiguous split of p columns into K blocks of size >= 2."""
    cuts = np.sort(rng.choice(np.arange(2, p - 1), size=K - 1, replace=False)) if K > 1 else []
    sizes = np.diff([0, *cuts, p])
    while np.any(sizes < 2):  # degenerate split; retry
        cuts = np.sort(rng.choice(np.arange(2, p - 1), size=K - 1, replace=False))
        sizes = np.diff([0, *cuts, p])
    return ModalityLayout(tuple(int(s) for s in sizes))


def random_block_missing(rng, n, layout, complete_frac=0.35, rho=0.5):
    """Correlated Gaussian data with one randomly missing modality per
    incomplete row; guarantees at least two complete rows."""
    p = layout.p
    idx = np.arange(p)
    cov = rho ** np.abs(idx[:, None] - idx[None, :])
    X = rng.standard_normal((n, p)) @ np.linalg.cholesky(cov).T
    beta = np.zeros(p)
    beta[rng.choice(p, size=min(3, p), replace=False)] = 1.0
    y = X @ beta + rng.standard_normal(n)
    mask = np.ones((n, p), dtype=bool)
    n_complete = max(2, int(round(complete_frac * n)))
    for i in range(n_complete, n):
        k = int(rng.integers(layout.K))
        mask[i, layout.block_slice(k)] = False
    return BlockMissingDataset(X=X, mask=mask, y=y, layout=layout)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
