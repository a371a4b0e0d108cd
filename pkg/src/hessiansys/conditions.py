"""Sample-based certification of ellipticity conditions.

Pointwise conditions quantified over all Hessian values and increments are
checked on a deterministic random cloud: base points in a box, random
symmetric Hessian bases, and unit increment directions swept over
log-spaced radii so positive homogeneity cannot hide scale effects.
Violations within 1e-12 relative are treated as round-off.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .tensors import Dims, SymTensor4, ellipticity_constant, identity_tensor

ROUNDOFF_REL = 1e-12
RADII = np.logspace(-3.0, 3.0, 13)
ZERO_BASE_EVERY = 10


def _random_symmetric(rng, dims, count):
    """Unit-Frobenius symmetric directions, shape (count, N, n, n)."""
    raw = rng.standard_normal((count, dims.N, dims.n, dims.n))
    sym = 0.5 * (raw + raw.transpose(0, 1, 3, 2))
    norms = np.linalg.norm(sym.reshape(count, -1), axis=1)
    norms[norms == 0] = 1.0
    return sym / norms[:, None, None, None]


@dataclass(frozen=True, eq=False)
class SampleCloud:
    """Deterministic sample set (x, X, Z) for the pointwise conditions."""

    seed: int
    dims: Dims
    lower: tuple = (0.0, 0.0)
    upper: tuple = (1.0, 1.0)
    size: int = 10000
    x: np.ndarray = field(default=None, repr=False)
    X: np.ndarray = field(default=None, repr=False)
    Z: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.lower) != self.dims.n or len(self.upper) != self.dims.n:
            raise ValueError("box corners must have length n")
        if self.size < 1:
            raise ValueError("cloud must contain at least one sample")
        rng = np.random.default_rng(self.seed)
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        x = lo + (hi - lo) * rng.random((self.size, self.dims.n))

        base_dirs = _random_symmetric(rng, self.dims, self.size)
        base_radii = RADII[np.arange(self.size) % len(RADII)]
        X = base_dirs * base_radii[:, None, None, None]
        X[:: ZERO_BASE_EVERY] = 0.0

        z_dirs = _random_symmetric(rng, self.dims, self.size)
        z_radii = RADII[(np.arange(self.size) + 5) % len(RADII)]
        Z = z_dirs * z_radii[:, None, None, None]

        for arr in (x, X, Z):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)

    @classmethod
    def from_domain(cls, seed, dims, dom, size=10000):
        return cls(seed=seed, dims=dims, lower=dom.lower, upper=dom.upper, size=size)


def standard_cloud(dims: Dims, size: int = 10000, seed: int = 2718) -> SampleCloud:
    """The default unit-box cloud used by catalog certification."""
    return SampleCloud(
        seed=seed, dims=dims, lower=(0.0,) * dims.n, upper=(1.0,) * dims.n, size=size
    )


@dataclass(frozen=True)
class ConditionReport:
    condition: str
    passed: bool
    worst_margin: float
    worst_relative: float
    witness_index: int | None
    witness: dict | None
    samples: int

    def to_json(self):
        witness = None
        if self.witness is not None:
            witness = {k: np.asarray(v).tolist() for k, v in self.witness.items()}
        return json.dumps(
            {
                "condition": self.condition,
                "pass": self.passed,
                "worst_margin": self.worst_margin,
                "worst_relative": self.worst_relative,
                "witness_index": self.witness_index,
                "witness": witness,
                "samples": self.samples,
            },
            sort_keys=True,
        )

    def summary_line(self):
        tag = "PASS" if self.passed else "FAIL"
        line = f"{self.condition}: {tag} worst margin {self.worst_margin:.6e}"
        if not self.passed and self.witness_index is not None:
            line += f" (relative {self.worst_relative:.3e} at sample {self.witness_index})"
        return line


def _operator_increments(F, cloud):
    """F(x, X+Z) - F(x, X) for every sample, shape (S, N)."""
    S = cloud.size
    out = np.empty((S, cloud.dims.N))
    for s in range(S):
        out[s] = np.asarray(
            F.evaluator(cloud.x[s], cloud.X[s] + cloud.Z[s]), dtype=float
        ) - np.asarray(F.evaluator(cloud.x[s], cloud.X[s]), dtype=float)
    return out


def _alpha_samples(alpha, cloud):
    return np.array([float(alpha(x)) for x in cloud.x])


def _report(condition, margins, scales, cloud):
    rel = margins / scales
    idx = int(np.argmin(rel))
    passed = bool(rel[idx] >= -ROUNDOFF_REL)
    witness = None
    witness_index = None
    if not passed:
        witness_index = idx
        witness = {"x": cloud.x[idx], "X": cloud.X[idx], "Z": cloud.Z[idx]}
    return ConditionReport(
        condition=condition,
        passed=passed,
        worst_margin=float(np.min(margins)),
        worst_relative=float(rel[idx]),
        witness_index=witness_index,
        witness=witness,
        samples=cloud.size,
    )


def k_condition_margins(F, A: SymTensor4, beta, gamma, cloud: SampleCloud,
                        alpha=None, nu=None):
    """Per-sample margins of the deviation bound, with their scale references.

    margin_s = beta nu |Z| + gamma |A:Z| - |A:Z - alpha(x)(F(x,X+Z) - F(x,X))|;
    returns (margins, scales) where scales normalize round-off comparisons.
    """
    if beta <= 0 or gamma <= 0:
        raise ValueError("beta and gamma must be positive")
    if nu is None:
        nu = ellipticity_constant(A).nu
    alpha_fn = F.alpha if alpha is None else alpha
    av = _alpha_samples(alpha_fn, cloud)
    inc = _operator_increments(F, cloud)
    AZ = np.einsum("aibj,sbij->sa", A.entries, cloud.Z)
    az_norm = np.linalg.norm(AZ, axis=1)
    z_norm = np.linalg.norm(cloud.Z.reshape(cloud.size, -1), axis=1)
    lhs = np.linalg.norm(AZ - av[:, None] * inc, axis=1)
    rhs = beta * nu * z_norm + gamma * az_norm
    return rhs - lhs, np.maximum(rhs + lhs, 1e-300)


def check_k_condition(F, A: SymTensor4, beta, gamma, cloud: SampleCloud,
                      alpha=None, nu=None, condition="k-condition") -> ConditionReport:
    """Margins of |A:Z - alpha (F(x,X+Z) - F(x,X))| <= beta nu |Z| + gamma |A:Z|."""
    margins, scales = k_condition_margins(F, A, beta, gamma, cloud, alpha=alpha, nu=nu)
    return _report(condition, margins, scales, cloud)


def check_campanato_tarsia(F, alpha_const, beta, gamma, cloud: SampleCloud) -> ConditionReport:
    """The monotone-tensor reduction: A is the component-wise trace tensor.

    Delegates to the general kernel with the identity coefficient tensor
    and the constant scaling, so in the reduction case the margins agree
    with check_k_condition sample for sample.
    """
    if alpha_const <= 0:
        raise ValueError("alpha_const must be positive")
    ident = identity_tensor(F.dims)
    return check_k_condition(
        F,
        ident,
        beta,
        gamma,
        cloud,
        alpha=lambda x: alpha_const,
        condition="campanato-tarsia",
    )


def check_def1(F, A: SymTensor4, lam, kappa, cloud: SampleCloud, nu=None) -> ConditionReport:
    """Margins of (A:Z).dF >= (lam/alpha)|A:Z|^2 - (kappa/alpha) nu^2 |Z|^2."""
    if not (lam > kappa > 0):
        raise ValueError("need lam > kappa > 0")
    if nu is None:
        nu = ellipticity_constant(A).nu
    av = _alpha_samples(F.alpha, cloud)
    inc = _operator_increments(F, cloud)
    AZ = np.einsum("aibj,sbij->sa", A.entries, cloud.Z)
    az_sq = np.sum(AZ * AZ, axis=1)
    z_sq = np.sum(cloud.Z.reshape(cloud.size, -1) ** 2, axis=1)
    lhs = np.sum(AZ * inc, axis=1)
    rhs = lam / av * az_sq - kappa / av * nu ** 2 * z_sq
    margins = lhs - rhs
    scales = np.maximum(np.abs(lhs) + lam / av * az_sq + kappa / av * nu ** 2 * z_sq, 1e-300)
    return _report("pseudo-monotonicity", margins, scales, cloud)


@dataclass(frozen=True)
class FitResult:
    beta: float
    gamma: float
    feasible: bool
    anomaly: str | None = None

    def to_json(self):
        return json.dumps(
            {
                "beta": self.beta,
                "gamma": self.gamma,
                "feasible": self.feasible,
                "anomaly": self.anomaly,
            },
            sort_keys=True,
        )


def _upper_envelope(slopes, intercepts):
    """Hull of the lines beta = m * gamma + c seen from above.

    Lines are processed in ascending slope order; the middle of three
    consecutive stack lines is dropped when the outer pair's crossing lies
    left of the crossing of the lower pair, the standard convex-hull-trick
    pruning.  Returns the kept (slope, intercept) pairs, slopes ascending.
    """
    order = np.lexsort((-intercepts, slopes))
    lines = []
    for idx in order:
        m, c = float(slopes[idx]), float(intercepts[idx])
        if lines and lines[-1][0] == m:
            continue  # same slope, smaller intercept
        while len(lines) >= 2:
            m1, c1 = lines[-2]
            m2, c2 = lines[-1]
            # cross-multiplied x_13 <= x_12 test; both slope gaps are negative
            if (c - c1) * (m1 - m2) <= (c2 - c1) * (m1 - m):
                lines.pop()
            else:
                break
        lines.append((m, c))
    return lines


def minimize_l1_over_halfplanes(p, q, L, floor=1e-9):
    """Exact minimizer of beta + gamma over {beta p_s + gamma q_s >= L_s}.

    All p_s must be positive; both variables are floored at ``floor``.  The
    optimum lies on the upper envelope of the binding lines
    beta = (L_s - gamma q_s) / p_s, so it suffices to compare the envelope
    breakpoints and the floor crossings.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    L = np.asarray(L, dtype=float)
    active = L > floor * p + floor * q
    if not np.any(active):
        return floor, floor
    lines = _upper_envelope(-q[active] / p[active], L[active] / p[active])

    def envelope(g):
        return max(m * g + c for m, c in lines)

    candidates = [floor]
    for (m1, c1), (m2, c2) in zip(lines, lines[1:]):
        g = (c2 - c1) / (m1 - m2)
        if g > floor:
            candidates.append(g)
    for m, c in lines:
        # where this line reaches the beta floor; covers the envelope exit
        if m < 0:
            g = (floor - c) / m
            if g > floor:
                candidates.append(g)

    best = None
    for g in candidates:
        b = max(floor, envelope(g))
        cost = b + g
        if best is None or cost < best[0] - 1e-18 or (
            abs(cost - best[0]) <= 1e-18 and g < best[2]
        ):
            best = (cost, b, g)
    return best[1], best[2]


def fit_beta_gamma(F, A: SymTensor4, cloud: SampleCloud, floor: float = 1e-9,
                   nu=None) -> FitResult:
    """Smallest beta + gamma whose half-planes cover every sampled constraint.

    Each sample contributes beta * nu |Z| + gamma |A:Z| >= lhs; the exact
    optimum of the two-variable program is found on the upper envelope of
    the binding lines, with both variables floored at ``floor``.
    """
    if nu is None:
        nu = ellipticity_constant(A).nu
    if not np.isfinite(nu) or nu <= 0:
        return FitResult(np.nan, np.nan, False, anomaly=f"nonpositive ellipticity nu={nu}")
    av = _alpha_samples(F.alpha, cloud)
    inc = _operator_increments(F, cloud)
    AZ = np.einsum("aibj,sbij->sa", A.entries, cloud.Z)
    q = np.linalg.norm(AZ, axis=1)
    p = nu * np.linalg.norm(cloud.Z.reshape(cloud.size, -1), axis=1)
    L = np.linalg.norm(AZ - av[:, None] * inc, axis=1)
    if not np.all(np.isfinite(L)):
        return FitResult(np.nan, np.nan, False, anomaly="non-finite operator increments")

    beta_star, gamma_star = minimize_l1_over_halfplanes(p, q, L, floor)
    feasible = beta_star + gamma_star < 1.0 and beta_star > 0 and gamma_star > 0
    return FitResult(float(beta_star), float(gamma_star), bool(feasible))


def nu_FG(F, G, cloud: SampleCloud) -> float:
    """Sampled sup of |(F(x,Y)-F(x,X)) - (G(x,Y)-G(x,X))| / |Y - X|.

    A lower bound of the true essential supremum.
    """
    inc_f = _operator_increments(F, cloud)
    inc_g = _operator_increments(G, cloud)
    z_norm = np.linalg.norm(cloud.Z.reshape(cloud.size, -1), axis=1)
    return float(np.max(np.linalg.norm(inc_f - inc_g, axis=1) / z_norm))
