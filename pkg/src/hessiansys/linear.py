"""Sparse assembly and solution of constant-coefficient Dirichlet problems.

The system A : D^2 u = f with zero boundary data discretizes to a sparse
matrix acting on component-major, lexicographically ordered node vectors.
Pure second derivatives contribute tridiagonal factors, mixed derivatives
the product of central first differences, assembled via Kronecker products
so the matrix action matches ``contract_hess`` of ``discrete_hessian``
row for row.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import LinearSolveError
from .grid import BoxDomain, DiscreteField, discrete_norms
from .tensors import SymTensor4, ellipticity_constant, identity_tensor

DIRECT_SIZE_LIMIT = 20000


@dataclass(frozen=True)
class LinearSolveReport:
    relative_residual: float
    iterations: int
    norm_l2: float
    norm_h1: float
    norm_h2: float

    def to_json(self):
        return json.dumps(
            {
                "relative_residual": self.relative_residual,
                "iterations": self.iterations,
                "norm_l2": self.norm_l2,
                "norm_h1": self.norm_h1,
                "norm_h2": self.norm_h2,
            },
            sort_keys=True,
        )


def _second_difference(m, h):
    return sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(m, m), format="csr") / h ** 2


def _central_difference(m, h):
    return sp.diags([-1.0, 1.0], [-1, 1], shape=(m, m), format="csr") / (2.0 * h)


def _derivative_blocks(dom: BoxDomain):
    """Sparse matrices for D^2_{ij} on the scalar grid, lexicographic ordering."""
    n, m = dom.n, dom.m
    eye = sp.identity(m, format="csr")
    T = [_second_difference(m, dom.h[k]) for k in range(n)]
    S = [_central_difference(m, dom.h[k]) for k in range(n)]

    def kron_chain(factors):
        out = factors[0]
        for f in factors[1:]:
            out = sp.kron(out, f, format="csr")
        return out

    blocks = {}
    for i in range(n):
        for j in range(i, n):
            factors = []
            for k in range(n):
                if i == j and k == i:
                    factors.append(T[k])
                elif k == i or k == j:
                    factors.append(S[k])
                else:
                    factors.append(eye)
            blocks[(i, j)] = kron_chain(factors)
    return blocks


def assemble_operator(A: SymTensor4, dom: BoxDomain) -> sp.csr_matrix:
    """Sparse matrix of u -> A : D^2 u on the interior grid.

    Row ordering is component-major over lexicographic nodes; assembly
    order is fixed, so the result is deterministic.
    """
    if A.dims.n != dom.n:
        raise ValueError(f"tensor n={A.dims.n} does not match domain n={dom.n}")
    res = ellipticity_constant(A)
    if res.nu <= 0:
        warnings.warn(
            f"coefficient tensor is not rank-one positive (nu={res.nu:.3e}); "
            "the discrete system may be singular",
            stacklevel=2,
        )
    N = A.dims.N
    d2 = _derivative_blocks(dom)
    size = dom.m ** dom.n
    rows = []
    for alpha in range(N):
        row = []
        for beta in range(N):
            block = sp.csr_matrix((size, size))
            for (i, j), op in d2.items():
                c = A.entries[alpha, i, beta, j]
                if i != j:
                    c = c + A.entries[alpha, j, beta, i]
                if c != 0.0:
                    block = block + c * op
            row.append(block)
        rows.append(row)
    return sp.bmat(rows, format="csr")


class DirichletSolver:
    """Factorizes the discrete operator once and solves repeatedly.

    Systems up to ``DIRECT_SIZE_LIMIT`` unknowns use a sparse direct
    factorization; larger ones use GMRES with right preconditioning by the
    component-wise Laplacian.
    """

    def __init__(self, A: SymTensor4, dom: BoxDomain, tol: float = 1e-10, max_iter: int = 2000):
        self.A = A
        self.dom = dom
        self.tol = tol
        self.max_iter = max_iter
        self.N = A.dims.N
        self.matrix = assemble_operator(A, dom)
        self.size = self.matrix.shape[0]
        self._direct = self.size <= DIRECT_SIZE_LIMIT
        try:
            if self._direct:
                self._lu = spla.splu(self.matrix.tocsc())
            else:
                lap = assemble_operator(identity_tensor(A.dims), dom)
                self._precond_lu = spla.splu(lap.tocsc())
        except RuntimeError as exc:
            raise LinearSolveError(
                f"factorization failed (singular discrete operator?): {exc}"
            ) from exc

    def solve(self, f: DiscreteField):
        if f.domain != self.dom or f.N != self.N:
            raise ValueError("right-hand side lives on a different grid")
        b = f.ravel_component_major()
        bnorm = float(np.linalg.norm(b))
        if bnorm == 0.0:
            u = DiscreteField.zero(self.dom, self.N)
            return u, LinearSolveReport(0.0, 0, 0.0, 0.0, 0.0)

        if self._direct:
            x = self._lu.solve(b)
            iterations = 0
        else:
            count = {"k": 0}

            def cb(_):
                count["k"] += 1

            op = spla.LinearOperator(
                (self.size, self.size),
                matvec=lambda y: self.matrix @ self._precond_lu.solve(y),
            )
            y, info = spla.gmres(
                op, b, rtol=self.tol * 0.1, atol=0.0, maxiter=self.max_iter, callback=cb,
                callback_type="pr_norm",
            )
            if info != 0:
                res = float(np.linalg.norm(self.matrix @ self._precond_lu.solve(y) - b)) / bnorm
                raise LinearSolveError(
                    f"iterative solve did not converge after {self.max_iter} iterations "
                    f"(relative residual {res:.3e})"
                )
            x = self._precond_lu.solve(y)
            iterations = count["k"]

        if not np.all(np.isfinite(x)):
            raise LinearSolveError("solver produced non-finite values (singular system?)")
        residual = float(np.linalg.norm(self.matrix @ x - b)) / bnorm
        if residual > self.tol:
            raise LinearSolveError(
                f"relative residual {residual:.3e} exceeds tolerance {self.tol:.3e}"
            )
        u = DiscreteField.from_ravel(self.dom, self.N, x)
        l2, h1, h2 = discrete_norms(u)
        return u, LinearSolveReport(residual, iterations, l2, h1, h2)


def solve_dirichlet(A: SymTensor4, f: DiscreteField, dom: BoxDomain, tol: float = 1e-10):
    """One-shot solve of A : D^2 u = f with zero Dirichlet data."""
    return DirichletSolver(A, dom, tol=tol).solve(f)


def apriori_estimate_check(u: DiscreteField, f: DiscreteField, A: SymTensor4) -> float:
    """Ratio of the solution's second-order norm to the data norm.

    Refinement studies use this to confirm the stability constant stays
    bounded as the mesh is refined.  Returns 0 for f = 0.
    """
    fnorm = float(np.sqrt(np.sum(f.values ** 2) * f.domain.cell_volume))
    if fnorm == 0.0:
        return 0.0
    l2, h1, h2 = discrete_norms(u)
    return (l2 + h1 + h2) / fnorm
