import numpy as np
import pytest

from hessiansys.sh import SHDecomposition
from hessiansys.tensors import Dims


def random_sh_decomposition(rng, n=2, N=2, lam_range=(0.5, 1.5)):
    """Random decomposition passing the structural checks by construction.

    Each B factor is a positive multiple of a rank-one projector onto one
    column of a random orthogonal frame; the A factors share the random
    smallest-eigenvalue direction abar with the remaining eigenvalues
    strictly above.
    """
    Q, _ = np.linalg.qr(rng.standard_normal((N, N)))
    B = tuple(rng.uniform(0.5, 2.5) * np.outer(Q[:, g], Q[:, g]) for g in range(N))

    abar = rng.standard_normal(n)
    abar /= np.linalg.norm(abar)
    w, V = np.linalg.eigh(np.eye(n) - np.outer(abar, abar))
    comp = V[:, w > 0.5]
    As = []
    for _ in range(N):
        lam1 = rng.uniform(*lam_range)
        rest = lam1 * (1.0 + rng.uniform(0.1, 1.0, size=n - 1))
        As.append(lam1 * np.outer(abar, abar) + comp @ np.diag(rest) @ comp.T)
    return SHDecomposition(Dims(n, N), B, tuple(As))


@pytest.fixture
def rng():
    return np.random.default_rng(20240809)
