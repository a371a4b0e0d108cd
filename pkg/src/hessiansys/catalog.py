"""Registry of concrete nonlinear operators with manufactured solutions.

Each entry pairs an evaluable nonlinearity with its declared linearization
data and, where available, a closed-form solution on the unit square whose
pointwise image provides exact right-hand sides for solver tests.
Tanh/sine perturbations act on the Frobenius norm of the Hessian value and
are scaled by 1/sqrt(N) along the all-ones component direction, so their
global Lipschitz constant equals the declared coefficient exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import BoxDomain, DiscreteField
from .nonlinear import NonlinearOperator
from .sh import SHDecomposition, assemble
from .tensors import Dims, SymTensor4, identity_tensor


@dataclass(frozen=True)
class ManufacturedSolution:
    """Closed-form field with analytic Hessian, zero on the unit square boundary."""

    N: int
    value: callable = field(repr=False)
    hessian: callable = field(repr=False)

    def exact_field(self, dom: BoxDomain) -> DiscreteField:
        return DiscreteField.from_function(dom, self.N, self.value)


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    dims: Dims
    operator: NonlinearOperator
    u_star: ManufacturedSolution | None
    note: str
    ct_params: dict | None = None
    base_id: str | None = None


def _sine_product_solution(N):
    """u_a(x) = sin(pi x1) sin(pi x2) for every component."""

    def value(x):
        return np.full(N, np.sin(np.pi * x[0]) * np.sin(np.pi * x[1]))

    def hessian(x):
        s1, c1 = np.sin(np.pi * x[0]), np.cos(np.pi * x[0])
        s2, c2 = np.sin(np.pi * x[1]), np.cos(np.pi * x[1])
        h = np.pi ** 2 * np.array([[-s1 * s2, c1 * c2], [c1 * c2, -s1 * s2]])
        return np.broadcast_to(h, (N, 2, 2)).copy()

    return ManufacturedSolution(N=N, value=value, hessian=hessian)


def _linear_evaluator(A: SymTensor4):
    def evaluate(x, X):
        return np.einsum("aibj,bij->a", A.entries, X)

    return evaluate


# argument scale of the tanh/sin waves; keeps them away from saturation at
# the Hessian magnitudes produced by the manufactured solutions
SATURATION_SCALE = 50.0


def _norm_perturbation(A: SymTensor4, coeff, wave, weight=None):
    """A:X + coeff * s * wave(|X| / s) * ones/sqrt(N), optionally weighted by x.

    |wave'| <= 1 makes coeff the exact Lipschitz constant of the
    perturbation in the Hessian argument, tight in the small-|X| limit.
    """
    N = A.dims.N
    direction = np.ones(N) / np.sqrt(N)
    s = SATURATION_SCALE

    def evaluate(x, X):
        w = 1.0 if weight is None else weight(x)
        lin = np.einsum("aibj,bij->a", A.entries, X)
        return w * (lin + coeff * s * wave(np.linalg.norm(X) / s) * direction)

    return evaluate


def sh_diag_example() -> SHDecomposition:
    """The orthogonal-range diagonal decomposition used across the test suite."""
    dims = Dims(n=2, N=2)
    B = (np.diag([1.0, 0.0]), np.diag([0.0, 2.0]))
    A = (np.diag([1.0, 2.0]), np.diag([1.0, 3.0]))
    return SHDecomposition(dims, B, A)


def strictly_convex_tensor(kappa: float = 0.9) -> SymTensor4:
    """Identity plus an off-trace coupling of strength kappa.

    The quadratic form on R^{N x n} has eigenvalues 1 +/- kappa, so it is
    strictly convex for kappa < 1, while the coupling moves the operator
    far from any rescaled component-wise trace.
    """
    dims = Dims(n=2, N=2)
    e = np.einsum("ab,ij->aibj", np.eye(2), np.eye(2))
    coupling = np.zeros((2, 2, 2, 2))
    swap_c = np.array([[0.0, 1.0], [1.0, 0.0]])
    coupling += np.einsum("ab,ij->aibj", swap_c, swap_c)
    return SymTensor4(dims, e + kappa * coupling)


def _one(x):
    return 1.0


def _build_registry():
    dims = Dims(n=2, N=2)
    ident = identity_tensor(dims)
    entries = {}

    op = NonlinearOperator(
        evaluator=_linear_evaluator(ident),
        alpha=_one,
        A=ident,
        beta=1e-9,
        gamma=1e-9,
        name="linear-laplace",
    )
    entries["linear-laplace"] = CatalogEntry(
        id="linear-laplace",
        dims=dims,
        operator=op,
        u_star=_sine_product_solution(2),
        note="component-wise Laplacian; the trivially elliptic baseline",
    )

    op = NonlinearOperator(
        evaluator=_norm_perturbation(ident, 0.2, np.tanh),
        alpha=_one,
        A=ident,
        beta=0.2,
        gamma=1e-9,
        name="identity-tanh-0.2",
    )
    entries["identity-tanh-0.2"] = CatalogEntry(
        id="identity-tanh-0.2",
        dims=dims,
        operator=op,
        u_star=_sine_product_solution(2),
        note="Laplacian plus 0.2-Lipschitz tanh of the Hessian norm",
    )

    sh_tensor = assemble(sh_diag_example())

    def g_weight(x):
        g = 1.0 + 0.5 * np.sin(2.0 * np.pi * x[0])
        return g * g

    op = NonlinearOperator(
        evaluator=_norm_perturbation(sh_tensor, 0.3, np.tanh, weight=g_weight),
        alpha=lambda x: 1.0 / g_weight(x),
        A=sh_tensor,
        beta=0.3,
        gamma=1e-9,
        name="g2A-plus-G",
    )
    entries["g2A-plus-G"] = CatalogEntry(
        id="g2A-plus-G",
        dims=dims,
        operator=op,
        u_star=_sine_product_solution(2),
        note="variable positive weight times a structured tensor plus a "
        "0.3-Lipschitz perturbation; scaling function 1/g^2",
    )

    sc = strictly_convex_tensor(0.9)
    op = NonlinearOperator(
        evaluator=_linear_evaluator(sc),
        alpha=_one,
        A=sc,
        beta=1e-9,
        gamma=1e-9,
        name="strictly-convex-not-CT",
    )
    entries["strictly-convex-not-CT"] = CatalogEntry(
        id="strictly-convex-not-CT",
        dims=dims,
        operator=op,
        u_star=_sine_product_solution(2),
        note="linear, strictly convex on gradients, but the off-trace "
        "coupling defeats the constant-scaling trace comparison",
        ct_params={"alpha": 1.0, "beta": 0.45, "gamma": 0.45},
    )

    base = entries["identity-tanh-0.2"]
    perturbed = sin_perturbation(base.operator, 0.05)
    entries["identity-tanh-0.2+sin-0.05"] = CatalogEntry(
        id="identity-tanh-0.2+sin-0.05",
        dims=dims,
        operator=perturbed,
        u_star=_sine_product_solution(2),
        note="the tanh entry plus a 0.05-Lipschitz sine perturbation; "
        "target of the nested stability solve",
        base_id="identity-tanh-0.2",
    )
    return entries


def sin_perturbation(base: NonlinearOperator, eps: float) -> NonlinearOperator:
    """base plus eps * sin(|X|) * ones/sqrt(N); eps is the exact Lipschitz shift.

    The declared beta grows by eps but is clamped below the admissible
    range; for large eps the declaration is knowingly wrong and the
    sampled stability guard is what catches it.
    """
    N = base.dims.N
    direction = np.ones(N) / np.sqrt(N)
    s = SATURATION_SCALE

    def evaluate(x, X):
        return np.asarray(base.evaluator(x, X), dtype=float) + eps * s * np.sin(
            np.linalg.norm(X) / s
        ) * direction

    beta = min(base.beta + eps, 0.9)
    return NonlinearOperator(
        evaluator=evaluate,
        alpha=base.alpha,
        A=base.A,
        beta=beta,
        gamma=base.gamma,
        name=f"{base.name}+sin-{eps:g}",
    )


_REGISTRY = None


def _registry():
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = _build_registry()
    return _REGISTRY


def get(entry_id: str) -> CatalogEntry:
    reg = _registry()
    if entry_id not in reg:
        raise KeyError(f"unknown catalog id {entry_id!r}; known: {sorted(reg)}")
    return reg[entry_id]


def list_ids():
    return sorted(_registry())


def describe():
    """(id, note) pairs for the CLI listing."""
    return [(e.id, e.note) for e in (_registry()[k] for k in list_ids())]


def manufacture_rhs(entry: CatalogEntry, dom: BoxDomain) -> DiscreteField:
    """f(x) = F(x, D^2 u*(x)) sampled at the grid nodes.

    Solving the entry's problem with this data recovers u* up to the
    discretization error, provided u* vanishes on the domain boundary
    (the catalog solutions vanish on the unit square).
    """
    if entry.u_star is None:
        raise ValueError(f"catalog entry {entry.id!r} has no manufactured solution")

    def f(x):
        return entry.operator.evaluator(x, entry.u_star.hessian(x))

    return DiscreteField.from_function(dom, entry.dims.N, f)
