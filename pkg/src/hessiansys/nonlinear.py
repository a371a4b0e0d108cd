"""Fixed-point solution of F(., D^2 u) = f by nearness to a linear system.

The iteration inverts the constant-coefficient system A : D^2 u at every
step: u_{k+1} solves the linear Dirichlet problem with right-hand side
A : D^2 u_k - (alpha F(., D^2 u_k) - alpha f).  Under the smallness
condition beta + gamma < 1 the step map contracts in the metric
d(u, v) = |A : D^2(u - v)|_L2, and the fixed point solves the nonlinear
problem with data f.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .conditions import SampleCloud, nu_FG
from .exceptions import NonContractionError, StabilityGuardError
from .grid import (
    BoxDomain,
    DiscreteField,
    DiscreteHessian,
    discrete_hessian,
    h2_norm,
    hessian_l2,
    random_zero_boundary_field,
)
from .linear import DirichletSolver
from .tensors import SymTensor4, ellipticity_constant


@dataclass(frozen=True)
class NonlinearOperator:
    """An evaluable nonlinearity with its declared linearization data.

    evaluator(x, X) maps a point x (length n) and a Hessian value X of
    shape (N, n, n) to a length-N vector; alpha(x) is the positive scalar
    weight entering the smallness condition together with the coefficient
    tensor A and the constants beta, gamma.
    """

    evaluator: callable = field(repr=False)
    alpha: callable = field(repr=False)
    A: SymTensor4
    beta: float
    gamma: float
    name: str = ""

    def __post_init__(self):
        if not (self.beta > 0 and self.gamma > 0):
            raise ValueError("declared beta and gamma must be positive")
        if self.beta + self.gamma >= 1:
            raise ValueError(f"need beta + gamma < 1, got {self.beta + self.gamma}")

    @property
    def dims(self):
        return self.A.dims


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 100
    linear_tol: float = 1e-10
    initial: DiscreteField | None = None


@dataclass(frozen=True)
class IterationReport:
    """Per-step distances d_k = |A : D^2(u_{k+1} - u_k)|_L2 and their ratios."""

    iterations: int
    distances: list
    ratios: list
    final_residual: float
    apriori_bound: float
    converged: bool

    def to_json(self):
        return json.dumps(
            {
                "iterations": self.iterations,
                "distances": self.distances,
                "ratios": self.ratios,
                "final_residual": self.final_residual,
                "apriori_bound": self.apriori_bound,
                "converged": self.converged,
            },
            sort_keys=True,
        )

    def convergence_rows(self):
        """Rows (k, d_k, ratio) for the convergence table; ratio blank at k=0."""
        rows = []
        for k, d in enumerate(self.distances):
            ratio = self.ratios[k - 1] if k >= 1 else None
            rows.append((k, d, ratio))
        return rows


def alpha_values(F: NonlinearOperator, dom: BoxDomain) -> np.ndarray:
    """alpha sampled at the interior nodes, shape grid_shape."""
    coords = dom.node_coords().reshape(-1, dom.n)
    vals = np.array([float(F.alpha(x)) for x in coords])
    return vals.reshape(dom.shape)


def operator_values(F: NonlinearOperator, H: DiscreteHessian) -> np.ndarray:
    """F(x, D^2 u(x)) at every node, shape (N,) + grid_shape."""
    dom = H.domain
    N = H.N
    coords = dom.node_coords().reshape(-1, dom.n)
    hess_flat = H.values.reshape(N, dom.n, dom.n, -1)
    out = np.empty((N, hess_flat.shape[-1]))
    for p in range(hess_flat.shape[-1]):
        out[:, p] = F.evaluator(coords[p], hess_flat[:, :, :, p])
    return out.reshape((N,) + dom.shape)


def _contract_field(A: SymTensor4, H: DiscreteHessian) -> np.ndarray:
    return np.einsum("aibj,bij...->a...", A.entries, H.values)


def _l2(dom: BoxDomain, values: np.ndarray) -> float:
    return float(np.sqrt(np.sum(values ** 2) * dom.cell_volume))


def campanato_iterate(F: NonlinearOperator, f: DiscreteField, dom: BoxDomain, cfg: SolverConfig):
    """Solve F(., D^2 u) = f, u = 0 on the boundary, by contraction.

    Raises NonContractionError when the median of the last five step
    ratios exceeds 1, which signals that the smallness condition fails at
    the discrete level.
    """
    N = F.dims.N
    res = ellipticity_constant(F.A)
    if res.nu <= 0:
        raise ValueError(f"declared coefficient tensor is not rank-one positive (nu={res.nu})")
    solver = DirichletSolver(F.A, dom, tol=cfg.linear_tol)
    avals = alpha_values(F, dom)
    g = avals[None, :] * f.values

    u = cfg.initial if cfg.initial is not None else DiscreteField.zero(dom, N)
    distances = []
    ratios = []
    converged = False
    for _ in range(cfg.max_iter):
        H = discrete_hessian(u)
        rhs_vals = _contract_field(F.A, H) - avals[None, :] * operator_values(F, H) + g
        u_next, _ = solver.solve(DiscreteField(dom, N, rhs_vals))
        diff_hess = discrete_hessian(u_next - u)
        d = _l2(dom, _contract_field(F.A, diff_hess))
        distances.append(d)
        if len(distances) >= 2:
            prev = distances[-2]
            ratios.append(d / prev if prev > 0 else 0.0)
        u = u_next
        if d <= cfg.tol:
            converged = True
            break
        if len(ratios) >= 5 and statistics.median(ratios[-5:]) > 1.0:
            raise NonContractionError(
                "iteration is not contracting: median step ratio "
                f"{statistics.median(ratios[-5:]):.3f} > 1 over the last 5 steps"
            )

    residual = _l2(dom, operator_values(F, discrete_hessian(u)) - f.values)
    K = F.beta + F.gamma
    d0 = distances[0] if distances else 0.0
    bound = (K ** len(distances)) / (1.0 - K) * d0
    report = IterationReport(
        iterations=len(distances),
        distances=distances,
        ratios=ratios,
        final_residual=residual,
        apriori_bound=bound,
        converged=converged,
    )
    return u, report


@dataclass(frozen=True)
class QuadraticLift(object):
    """Boundary lift with constant Hessian: g_a(x) = x.Q_a x / 2 + b_a.x + c_a."""

    Q: np.ndarray
    linear: np.ndarray
    const: np.ndarray

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("aij,i,j->a", self.Q, x, x) + self.linear @ x + self.const

    def hessian(self, x):
        return self.Q

    def field(self, dom: BoxDomain) -> DiscreteField:
        return DiscreteField.from_function(dom, self.Q.shape[0], self.value)


def homogenize_bc(G: NonlinearOperator, lift) -> NonlinearOperator:
    """Shift the nonlinearity so the lifted boundary-value problem has zero data.

    The returned operator evaluates G at X + D^2 lift(x); solving it with
    homogeneous data and adding the lift back reproduces the original
    problem with boundary values lift.  The declared (A, beta, gamma)
    carry over unchanged because the smallness condition only sees
    increments of the second argument.
    """

    def shifted(x, X):
        return G.evaluator(x, X + lift.hessian(x))

    return NonlinearOperator(
        evaluator=shifted,
        alpha=G.alpha,
        A=G.A,
        beta=G.beta,
        gamma=G.gamma,
        name=f"{G.name}+lift" if G.name else "lifted",
    )


@lru_cache(maxsize=32)
def mesh_equivalence_constant(dom: BoxDomain, N: int, n_random: int = 16, seed: int = 0) -> float:
    """Largest observed |u|_{H2-full} / |D^2 u|_L2 over probe fields.

    The smoothest fields maximize the ratio, so the probe set always
    includes the lowest product-sine mode alongside seeded random fields.
    """
    probes = []
    coords = dom.node_coords()
    smooth = np.ones(dom.shape)
    for k in range(dom.n):
        width = dom.upper[k] - dom.lower[k]
        smooth = smooth * np.sin(np.pi * (coords[..., k] - dom.lower[k]) / width)
    probes.append(DiscreteField(dom, N, np.broadcast_to(smooth, (N,) + dom.shape).copy()))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        probes.append(random_zero_boundary_field(dom, N, rng))
        probes.append(random_zero_boundary_field(dom, N, rng, smooth=False))
    worst = 0.0
    for u in probes:
        d2 = hessian_l2(discrete_hessian(u))
        if d2 > 0:
            worst = max(worst, h2_norm(u) / d2)
    return worst


@dataclass(frozen=True)
class ComparisonReport:
    lhs: float
    rhs: float
    c_theory: float
    c_mesh: float
    ok: bool


def comparison_check(F: NonlinearOperator, w: DiscreteField, v: DiscreteField) -> ComparisonReport:
    """Distance of two fields against the distance of their operator images.

    lhs = |w - v| in the full second-order norm, rhs = |F[w] - F[v]|_L2,
    and the theoretical factor is |alpha|_inf / (nu(A) (1 - beta - gamma));
    ok records whether lhs <= c_mesh * c_theory * rhs held.
    """
    dom = w.domain
    Fw = operator_values(F, discrete_hessian(w))
    Fv = operator_values(F, discrete_hessian(v))
    lhs = h2_norm(w - v)
    rhs = _l2(dom, Fw - Fv)
    alpha_inf = float(np.max(alpha_values(F, dom)))
    nu = ellipticity_constant(F.A).nu
    c_theory = alpha_inf / (nu * (1.0 - F.beta - F.gamma))
    c_mesh = mesh_equivalence_constant(dom, w.N)
    ok = lhs <= c_mesh * c_theory * rhs * (1.0 + 1e-9) + 1e-300
    return ComparisonReport(lhs=lhs, rhs=rhs, c_theory=c_theory, c_mesh=c_mesh, ok=ok)


def estimate_nu_F(F: NonlinearOperator, dom: BoxDomain, samples: int = 20, seed: int = 0) -> float:
    """Sampled lower-quotient |F[w] - F[v]|_L2 / |D^2(w - v)|_L2.

    This is an upper bound of the true infimum: sampling cannot certify
    an infimum over all field pairs.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    N = F.dims.N
    best = np.inf
    for _ in range(samples):
        w = random_zero_boundary_field(dom, N, rng)
        v = random_zero_boundary_field(dom, N, rng)
        denom = hessian_l2(discrete_hessian(w - v))
        while denom == 0.0:
            v = random_zero_boundary_field(dom, N, rng, smooth=False)
            denom = hessian_l2(discrete_hessian(w - v))
        Fw = operator_values(F, discrete_hessian(w))
        Fv = operator_values(F, discrete_hessian(v))
        best = min(best, _l2(dom, Fw - Fv) / denom)
    return float(best)


@dataclass(frozen=True)
class StabilityReport:
    outer_iterations: int
    distances: list
    ratios: list
    final_residual: float
    nu_F_estimate: float
    nu_FG_estimate: float

    def to_json(self):
        return json.dumps(
            {
                "outer_iterations": self.outer_iterations,
                "distances": self.distances,
                "ratios": self.ratios,
                "final_residual": self.final_residual,
                "nu_F_estimate": self.nu_F_estimate,
                "nu_FG_estimate": self.nu_FG_estimate,
            },
            sort_keys=True,
        )


def stability_solve(
    F: NonlinearOperator,
    G: NonlinearOperator,
    g: DiscreteField,
    dom: BoxDomain,
    cfg: SolverConfig,
    max_outer: int = 50,
    guard_samples: int = 2000,
    guard_seed: int = 0,
):
    """Solve G(., D^2 u) = g through nested inversion of the solvable F.

    Each outer step inverts F at the right-hand side
    F[u_k] - (G[u_k] - g); the outer map contracts with ratio roughly
    nu(F, G) / nu(F).  A sampled guard refuses to iterate when the
    operator distance is not below the sampled modulus of F.
    """
    nu_f = estimate_nu_F(F, dom, seed=guard_seed)
    cloud = SampleCloud(
        seed=guard_seed, dims=F.dims, lower=dom.lower, upper=dom.upper, size=guard_samples
    )
    nu_fg = nu_FG(F, G, cloud)
    if nu_fg >= nu_f:
        raise StabilityGuardError(
            f"sampled operator distance {nu_fg:.4e} is not below the sampled "
            f"modulus {nu_f:.4e}; nested iteration refused"
        )

    N = F.dims.N
    u = DiscreteField.zero(dom, N)
    Fu_prev = operator_values(F, discrete_hessian(u))
    distances = []
    ratios = []
    residual = np.inf
    outer = 0
    for outer in range(1, max_outer + 1):
        Gu = operator_values(G, discrete_hessian(u))
        rhs = DiscreteField(dom, N, Fu_prev - (Gu - g.values))
        u, _ = campanato_iterate(F, rhs, dom, cfg)
        Fu = operator_values(F, discrete_hessian(u))
        d = _l2(dom, Fu - Fu_prev)
        distances.append(d)
        if len(distances) >= 2 and distances[-2] > 0:
            ratios.append(distances[-1] / distances[-2])
        Fu_prev = Fu
        residual = _l2(dom, operator_values(G, discrete_hessian(u)) - g.values)
        if residual <= cfg.tol:
            break
        if len(ratios) >= 5 and statistics.median(ratios[-5:]) > 1.0:
            raise NonContractionError(
                "outer stability iteration is not contracting "
                f"(median ratio {statistics.median(ratios[-5:]):.3f})"
            )
    report = StabilityReport(
        outer_iterations=outer,
        distances=distances,
        ratios=ratios,
        final_residual=residual,
        nu_F_estimate=nu_f,
        nu_FG_estimate=nu_fg,
    )
    return u, report
