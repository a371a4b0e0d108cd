"""Structured decompositions A = sum_g B^g (x) A^g with orthogonal ranges.

A decomposition consists of N symmetric N x N matrices B^g with mutually
orthogonal ranges summing to a positive definite matrix, and N positive
definite n x n matrices A^g whose smallest-eigenvalue eigenspaces share a
common direction.  Such tensors admit a closed-form ellipticity constant
after rescaling the factors to a common smallest eigenvalue.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatchError
from .tensors import Dims, SymTensor4

RANK_TOL = 1e-9
NULLSPACE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SHDecomposition:
    """Lists of factor matrices; B[g] is N x N, A[g] is n x n, g = 0..N-1."""

    dims: Dims
    B: tuple = field(repr=False)
    A: tuple = field(repr=False)

    def __post_init__(self):
        n, N = self.dims.n, self.dims.N
        B = tuple(np.asarray(b, dtype=float) for b in self.B)
        A = tuple(np.asarray(a, dtype=float) for a in self.A)
        if len(B) != N or len(A) != N:
            raise DimensionMismatchError(f"need {N} B and A factors, got {len(B)}, {len(A)}")
        for b in B:
            if b.shape != (N, N):
                raise DimensionMismatchError(f"B factor shape {b.shape} != {(N, N)}")
        for a in A:
            if a.shape != (n, n):
                raise DimensionMismatchError(f"A factor shape {a.shape} != {(n, n)}")
        B = tuple(0.5 * (b + b.T) for b in B)
        A = tuple(0.5 * (a + a.T) for a in A)
        for m in B + A:
            m.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "A", A)

    def to_json(self):
        return json.dumps(
            {
                "n": self.dims.n,
                "N": self.dims.N,
                "B": [b.tolist() for b in self.B],
                "A": [a.tolist() for a in self.A],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        return cls(Dims(n=int(obj["n"]), N=int(obj["N"])), tuple(obj["B"]), tuple(obj["A"]))


@dataclass(frozen=True, eq=False)
class SHReport:
    """Outcome of the four structural checks.

    residuals maps condition name to a signed margin (>= 0 passes):
      range_orthogonality : tol * scale(B) - max_{g != d} |B^g B^d|
      sum_positive        : lambda_min(sum B^g) - tol
      factors_positive    : min_g lambda_min(A^g) - tol
      common_eigendirection : threshold - sigma_min(stacked shifted A^g)
    """

    passed: bool
    residuals: dict
    common_direction: np.ndarray | None
    tolerance: float

    def to_json(self):
        return json.dumps(
            {
                "pass": self.passed,
                "residuals": {k: float(v) for k, v in self.residuals.items()},
                "common_direction": None
                if self.common_direction is None
                else self.common_direction.tolist(),
                "tolerance": self.tolerance,
            },
            sort_keys=True,
        )


def assemble(dec: SHDecomposition) -> SymTensor4:
    """A[a,i,b,j] = sum_g B^g[a,b] A^g[i,j]."""
    n, N = dec.dims.n, dec.dims.N
    entries = np.zeros((N, n, N, n))
    for b, a in zip(dec.B, dec.A):
        entries += np.einsum("ab,ij->aibj", b, a)
    return SymTensor4(dec.dims, entries)


def _stacked_shifted(dec):
    """Stack (A^g - lambda_1(A^g) I) row-wise; its nullspace is the common eigenspace."""
    blocks = []
    for a in dec.A:
        lam1 = np.linalg.eigvalsh(a)[0]
        blocks.append(a - lam1 * np.eye(dec.dims.n))
    return np.vstack(blocks)


def verify_sh(dec: SHDecomposition, tol: float = 1e-10) -> SHReport:
    """Check the four structural conditions; failures are reported, not raised."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    N = dec.dims.N

    ortho = 0.0
    for g in range(N):
        for d in range(g + 1, N):
            ortho = max(ortho, float(np.max(np.abs(dec.B[g] @ dec.B[d]))))
    scale_b = max(1.0, max(float(np.max(np.abs(b), initial=0.0)) for b in dec.B))
    res_ortho = tol * scale_b - ortho

    sum_b = np.sum(dec.B, axis=0)
    res_sum = float(np.linalg.eigvalsh(sum_b)[0]) - tol

    res_factors = min(float(np.linalg.eigvalsh(a)[0]) for a in dec.A) - tol

    stack = _stacked_shifted(dec)
    svals = np.linalg.svd(stack, compute_uv=False)
    norm = max(float(svals[0]), 1e-300)
    sigma_min = float(svals[-1])
    res_null = NULLSPACE_TOL * norm - sigma_min

    common = None
    if res_null >= 0:
        _, _, vt = np.linalg.svd(stack)
        v = vt[-1]
        idx = int(np.argmax(np.abs(v)))
        common = -v if v[idx] < 0 else v
        common.setflags(write=False)

    residuals = {
        "range_orthogonality": res_ortho,
        "sum_positive": res_sum,
        "factors_positive": res_factors,
        "common_eigendirection": res_null,
    }
    passed = all(v >= 0 for v in residuals.values())
    return SHReport(passed=passed, residuals=residuals, common_direction=common, tolerance=tol)


def rescale_common_lambda(dec: SHDecomposition) -> SHDecomposition:
    """Rescale factors {c_g B^g, A^g / c_g} with c_g = lambda_1(A^g).

    Every rescaled A-factor then has smallest eigenvalue 1 while the
    assembled tensor is unchanged.
    """
    cs = [float(np.linalg.eigvalsh(a)[0]) for a in dec.A]
    if min(cs) <= 0:
        raise ValueError(f"all A factors must be positive definite, lambda_1 = {cs}")
    B = tuple(c * b for c, b in zip(cs, dec.B))
    A = tuple(a / c for c, a in zip(cs, dec.A))
    return SHDecomposition(dec.dims, B, A)


def nu_from_sh(dec: SHDecomposition) -> float:
    """Closed-form ellipticity constant of the assembled tensor.

    Valid only after rescale_common_lambda: requires the A factors to share
    their smallest eigenvalue, and equals
    (min_g lambda_min(A^g)) * lambda_min(B^1 + ... + B^N).
    """
    lam1s = [float(np.linalg.eigvalsh(a)[0]) for a in dec.A]
    spread = max(lam1s) - min(lam1s)
    if spread > 1e-9 * max(abs(v) for v in lam1s):
        raise ValueError(
            f"A factors have differing smallest eigenvalues {lam1s}; "
            "apply rescale_common_lambda first"
        )
    sum_b = np.sum(dec.B, axis=0)
    return min(lam1s) * float(np.linalg.eigvalsh(sum_b)[0])


def range_projections(dec: SHDecomposition):
    """Orthogonal projections onto the ranges of the B factors.

    Ranks are read off the eigenvalues at a relative threshold; the ranks
    must sum to N so the projections resolve the identity.
    """
    N = dec.dims.N
    projections = []
    total_rank = 0
    for b in dec.B:
        w, V = np.linalg.eigh(b)
        thr = RANK_TOL * max(float(np.max(np.abs(w), initial=0.0)), 1e-300)
        cols = V[:, np.abs(w) > thr]
        total_rank += cols.shape[1]
        projections.append(cols @ cols.T)
    if total_rank != N:
        raise ValueError(f"B ranges have total rank {total_rank} != N = {N}")
    return projections


def min_range_quadratic_identity(dec: SHDecomposition):
    """lambda_min of the B sum versus the smallest in-range eigenvalue.

    Returns (lhs, rhs) where lhs = lambda_min(sum B^g) and rhs is the
    minimum over g of the smallest nonzero-range eigenvalue of B^g; range
    orthogonality makes the two coincide.
    """
    sum_b = np.sum(dec.B, axis=0)
    lhs = float(np.linalg.eigvalsh(sum_b)[0])
    rhs = np.inf
    for b in dec.B:
        w = np.linalg.eigvalsh(b)
        thr = RANK_TOL * max(float(np.max(np.abs(w), initial=0.0)), 1e-300)
        in_range = w[np.abs(w) > thr]
        if in_range.size:
            rhs = min(rhs, float(np.min(in_range)))
    return lhs, float(rhs)
