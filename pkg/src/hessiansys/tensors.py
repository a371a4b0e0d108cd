"""Dense algebra for fourth-order coefficient tensors and Hessian values.

Coefficient tensors A live in R^{Nn x Nn} with the major symmetry
A[a,i,b,j] = A[b,j,a,i]; Hessian values live in R^{N n^2} with minor
symmetry in the last two indices.  All norms are Euclidean (Frobenius).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .exceptions import AsymmetricTensorError, DimensionMismatchError

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class Dims:
    """Spatial dimension n and number of components N."""

    n: int
    N: int

    def __post_init__(self):
        if self.n < 1 or self.N < 1:
            raise DimensionMismatchError(f"need n >= 1 and N >= 1, got {self}")


def _sym_defect(entries, transpose_axes):
    a = np.asarray(entries, dtype=float)
    return float(np.max(np.abs(a - a.transpose(transpose_axes)), initial=0.0))


@dataclass(frozen=True, eq=False)
class SymTensor4:
    """Coefficient tensor with entries indexed (alpha, i, beta, j).

    Entries are symmetrized on construction; inputs whose asymmetry
    exceeds ``SYMMETRY_TOL`` (relative to the largest entry) are rejected.
    """

    dims: Dims
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        n, N = self.dims.n, self.dims.N
        a = np.asarray(self.entries, dtype=float)
        if a.shape != (N, n, N, n):
            raise DimensionMismatchError(
                f"entries shape {a.shape} != {(N, n, N, n)} for dims {self.dims}"
            )
        scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
        if _sym_defect(a, (2, 3, 0, 1)) > SYMMETRY_TOL * scale:
            raise AsymmetricTensorError("major symmetry A[a,i,b,j] = A[b,j,a,i] violated")
        a = 0.5 * (a + a.transpose(2, 3, 0, 1))
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    def to_json(self):
        return json.dumps(
            {"n": self.dims.n, "N": self.dims.N, "entries": self.entries.ravel().tolist()},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        dims = Dims(n=int(obj["n"]), N=int(obj["N"]))
        entries = np.asarray(obj["entries"], dtype=float).reshape(
            dims.N, dims.n, dims.N, dims.n
        )
        return cls(dims, entries)


@dataclass(frozen=True, eq=False)
class HessianValue:
    """Point value of a Hessian, entries indexed (alpha, i, j), symmetric in (i, j)."""

    dims: Dims
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        n, N = self.dims.n, self.dims.N
        a = np.asarray(self.entries, dtype=float)
        if a.shape != (N, n, n):
            raise DimensionMismatchError(
                f"entries shape {a.shape} != {(N, n, n)} for dims {self.dims}"
            )
        scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
        if _sym_defect(a, (0, 2, 1)) > SYMMETRY_TOL * scale:
            raise AsymmetricTensorError("minor symmetry X[a,i,j] = X[a,j,i] violated")
        a = 0.5 * (a + a.transpose(0, 2, 1))
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)


@dataclass(frozen=True, eq=False)
class EllipticityResult:
    """Minimum of the rank-one quadratic form over unit directions."""

    nu: float
    argmin_eta: np.ndarray
    argmin_a: np.ndarray
    tolerance: float


def identity_tensor(dims: Dims) -> SymTensor4:
    """The tensor delta_{alpha beta} delta_{ij} (component-wise Laplacian)."""
    e = np.einsum("ab,ij->aibj", np.eye(dims.N), np.eye(dims.n))
    return SymTensor4(dims, e)


def monotone_tensor(A: np.ndarray, N: int) -> SymTensor4:
    """The tensor delta_{alpha beta} A_{ij} for a symmetric matrix A."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    e = np.einsum("ab,ij->aibj", np.eye(N), A)
    return SymTensor4(Dims(n=n, N=N), e)


def _check_same_dims(A: SymTensor4, Z: HessianValue):
    if A.dims != Z.dims:
        raise DimensionMismatchError(f"tensor dims {A.dims} != hessian dims {Z.dims}")


def contract_hess(A: SymTensor4, Z: HessianValue) -> np.ndarray:
    """Contraction (A:Z)_alpha = sum_{i,beta,j} A[a,i,b,j] Z[b,i,j]."""
    _check_same_dims(A, Z)
    return np.einsum("aibj,bij->a", A.entries, Z.entries)


def contract_hess_array(A: SymTensor4, Z: np.ndarray) -> np.ndarray:
    """contract_hess over a batch: Z has shape (..., N, n, n), returns (..., N)."""
    return np.einsum("aibj,...bij->...a", A.entries, Z)


def rank_one_form(A: SymTensor4, eta, a) -> float:
    """The quadratic form A : eta (x) a (x) eta (x) a."""
    eta = np.asarray(eta, dtype=float)
    a = np.asarray(a, dtype=float)
    if eta.shape != (A.dims.N,) or a.shape != (A.dims.n,):
        raise DimensionMismatchError(
            f"eta shape {eta.shape} / a shape {a.shape} incompatible with dims {A.dims}"
        )
    return float(np.einsum("aibj,a,i,b,j->", A.entries, eta, a, eta, a))


def frobenius(X: HessianValue) -> float:
    """Euclidean norm of a Hessian value."""
    return float(np.linalg.norm(X.entries))


def frobenius4(A: SymTensor4) -> float:
    """Euclidean norm of a coefficient tensor."""
    return float(np.linalg.norm(A.entries))


def eta_reduced_matrix(A: SymTensor4, a) -> np.ndarray:
    """The N x N matrix M(a)_{alpha beta} = sum_{ij} A[a,i,b,j] a_i a_j.

    For fixed direction a the rank-one form equals eta^T M(a) eta, so the
    inner minimum over unit eta is the smallest eigenvalue of M(a).
    """
    return np.einsum("aibj,i,j->ab", A.entries, a, a)


def _lambda_min_eta(A, a):
    return float(np.linalg.eigvalsh(eta_reduced_matrix(A, a))[0])


def _sign_fix(v):
    # deterministic eigenvector orientation: first entry of largest magnitude positive
    idx = int(np.argmax(np.abs(v)))
    return -v if v[idx] < 0 else v


def _sphere_fibonacci(k):
    """Quasi-uniform points on S^2 (golden-angle spiral)."""
    i = np.arange(k, dtype=float) + 0.5
    z = 1.0 - 2.0 * i / k
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = np.pi * (1.0 + np.sqrt(5.0)) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def ellipticity_constant(A: SymTensor4, tol: float = 1e-8) -> EllipticityResult:
    """Minimum of the rank-one form over unit (eta, a).

    The minimum over eta for fixed a is exact (smallest eigenvalue of the
    reduced N x N matrix); the search over a uses a dense angular scan plus
    local refinement.  The result may be <= 0, which reports failure of
    rank-one positivity rather than an error.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = A.dims.n

    if n == 1:
        a_best = np.array([1.0])
    elif n == 2:
        thetas = np.linspace(0.0, np.pi, 3600, endpoint=False)
        dirs = np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
        M = np.einsum("aibj,ki,kj->kab", A.entries, dirs, dirs)
        vals = np.linalg.eigvalsh(M)[:, 0]
        k = int(np.argmin(vals))
        span = thetas[1] - thetas[0]
        res = minimize_scalar(
            lambda t: _lambda_min_eta(A, np.array([np.cos(t), np.sin(t)])),
            bounds=(thetas[k] - span, thetas[k] + span),
            method="bounded",
            options={"xatol": 1e-12},
        )
        t = float(res.x)
        a_best = np.array([np.cos(t), np.sin(t)])
        if vals[k] < _lambda_min_eta(A, a_best):
            a_best = dirs[k]
    elif n == 3:
        dirs = _sphere_fibonacci(10000)
        M = np.einsum("aibj,ki,kj->kab", A.entries, dirs, dirs)
        vals = np.linalg.eigvalsh(M)[:, 0]
        k = int(np.argmin(vals))
        theta0 = float(np.arccos(np.clip(dirs[k, 2], -1.0, 1.0)))
        phi0 = float(np.arctan2(dirs[k, 1], dirs[k, 0]))

        def objective(tp):
            th, ph = tp
            a = np.array(
                [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]
            )
            return _lambda_min_eta(A, a)

        res = minimize(
            objective,
            x0=np.array([theta0, phi0]),
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 400},
        )
        th, ph = res.x
        a_best = np.array(
            [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)]
        )
        if vals[k] < _lambda_min_eta(A, a_best):
            a_best = dirs[k]
    else:
        # algebra is dimension-generic even though solver paths cap n at 3
        rng = np.random.default_rng(0)
        dirs = rng.standard_normal((20000, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        M = np.einsum("aibj,ki,kj->kab", A.entries, dirs, dirs)
        vals = np.linalg.eigvalsh(M)[:, 0]
        k = int(np.argmin(vals))

        def objective(v):
            return _lambda_min_eta(A, v / np.linalg.norm(v))

        res = minimize(
            objective,
            x0=dirs[k],
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 1000},
        )
        a_best = res.x / np.linalg.norm(res.x)
        if vals[k] < objective(res.x):
            a_best = dirs[k]

    a_best = a_best / np.linalg.norm(a_best)
    w, V = np.linalg.eigh(eta_reduced_matrix(A, a_best))
    nu = float(w[0])
    eta = _sign_fix(V[:, 0])
    a_best = _sign_fix(a_best)
    return EllipticityResult(nu=nu, argmin_eta=eta, argmin_a=a_best, tolerance=tol)


def is_rank_one_positive(A: SymTensor4, tol: float = 1e-8):
    """True when nu(A) > tol; on failure also returns the violating (eta, a)."""
    res = ellipticity_constant(A, tol)
    if res.nu > tol:
        return True, None
    return False, (res.argmin_eta, res.argmin_a)
