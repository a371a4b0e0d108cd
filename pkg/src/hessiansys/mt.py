"""Numerical verification of the Miranda-Talenti identity and its relatives.

The identity int(|D^2 v|^2 - (Delta v)^2) = (n-1) int_boundary |Dv|^2 (H.N)
is checked on smooth convex planar domains (disks and ellipses) with
closed-form signed curvature, Gauss-Legendre radial quadrature and a
periodic trapezoid rule in the angle.  The algebraic lemmas feeding the
generalized inequality (diagonal sandwich bound, spectral pullback) are
verified pointwise, and the generalized inequality itself is probed with
discrete fields on convex boxes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .grid import DiscreteField, discrete_hessian, hessian_l2
from .tensors import SymTensor4, ellipticity_constant


@dataclass(frozen=True)
class SmoothDomain2D:
    """Elliptic domain x^2/a^2 + y^2/b^2 < 1, parametrized X(t) = (a cos t, b sin t)."""

    a: float
    b: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("semi-axes must be positive")

    @classmethod
    def disk(cls, radius):
        return cls(radius, radius)

    @classmethod
    def ellipse(cls, a, b):
        return cls(a, b)

    def boundary_point(self, t):
        return np.stack([self.a * np.cos(t), self.b * np.sin(t)], axis=-1)

    def boundary_speed(self, t):
        """|X'(t)|, the line element of the parametrization."""
        return np.sqrt(self.a ** 2 * np.sin(t) ** 2 + self.b ** 2 * np.cos(t) ** 2)


def mean_curvature_signed(dom: SmoothDomain2D, t):
    """Signed curvature H.N of the boundary; negative on these convex domains."""
    t = np.asarray(t, dtype=float)
    denom = (dom.a ** 2 * np.sin(t) ** 2 + dom.b ** 2 * np.cos(t) ** 2) ** 1.5
    return -dom.a * dom.b / denom


@dataclass(frozen=True)
class TestFunction:
    """Closed-form scalar function with analytic gradient and Hessian.

    The callables take coordinate arrays (x, y) and broadcast: value gives
    the scalar field, grad a pair (v_x, v_y), hess a 2x2 nested pair.
    """

    __test__ = False  # domain type, not a pytest collectible

    name: str
    value: callable = field(repr=False)
    grad: callable = field(repr=False)
    hess: callable = field(repr=False)


def _bump_parts(dom):
    a2, b2 = dom.a ** 2, dom.b ** 2

    def w(x, y):
        return 1.0 - x ** 2 / a2 - y ** 2 / b2

    def dw(x, y):
        return -2.0 * x / a2, -2.0 * y / b2

    wxx, wyy = -2.0 / a2, -2.0 / b2
    return w, dw, wxx, wyy


def bump(dom: SmoothDomain2D) -> TestFunction:
    """1 - x^2/a^2 - y^2/b^2, the quadratic vanishing on the boundary."""
    w, dw, wxx, wyy = _bump_parts(dom)
    return TestFunction(
        name="bump",
        value=w,
        grad=dw,
        hess=lambda x, y: (
            (np.full_like(np.asarray(x, float), wxx), np.zeros_like(np.asarray(x, float))),
            (np.zeros_like(np.asarray(x, float)), np.full_like(np.asarray(x, float), wyy)),
        ),
    )


def bump_squared(dom: SmoothDomain2D) -> TestFunction:
    """Square of the bump; both the function and its gradient vanish on the boundary."""
    w, dw, wxx, wyy = _bump_parts(dom)

    def value(x, y):
        return w(x, y) ** 2

    def grad(x, y):
        wx, wy = dw(x, y)
        return 2.0 * w(x, y) * wx, 2.0 * w(x, y) * wy

    def hess(x, y):
        wv = w(x, y)
        wx, wy = dw(x, y)
        hxx = 2.0 * (wx * wx + wv * wxx)
        hxy = 2.0 * wx * wy
        hyy = 2.0 * (wy * wy + wv * wyy)
        return (hxx, hxy), (hxy, hyy)

    return TestFunction("bump_squared", value, grad, hess)


def bump_xy(dom: SmoothDomain2D) -> TestFunction:
    """Bump times x*y, a degree-4 polynomial vanishing on the boundary."""
    w, dw, wxx, wyy = _bump_parts(dom)

    def value(x, y):
        return w(x, y) * x * y

    def grad(x, y):
        wx, wy = dw(x, y)
        return wx * x * y + w(x, y) * y, wy * x * y + w(x, y) * x

    def hess(x, y):
        wv = w(x, y)
        wx, wy = dw(x, y)
        hxx = wxx * x * y + 2.0 * wx * y
        hyy = wyy * x * y + 2.0 * wy * x
        hxy = wx * x + wy * y + wv
        return (hxx, hxy), (hxy, hyy)

    return TestFunction("bump_xy", value, grad, hess)


def bump_linear(dom: SmoothDomain2D) -> TestFunction:
    """Bump times (x + 2y)."""
    w, dw, wxx, wyy = _bump_parts(dom)

    def p(x, y):
        return x + 2.0 * y

    def value(x, y):
        return w(x, y) * p(x, y)

    def grad(x, y):
        wx, wy = dw(x, y)
        return wx * p(x, y) + w(x, y), wy * p(x, y) + 2.0 * w(x, y)

    def hess(x, y):
        wx, wy = dw(x, y)
        hxx = wxx * p(x, y) + 2.0 * wx
        hyy = wyy * p(x, y) + 4.0 * wy
        hxy = wx * 2.0 + wy
        return (hxx, hxy), (hxy, hyy)

    return TestFunction("bump_linear", value, grad, hess)


TEST_FUNCTIONS = {
    "bump": bump,
    "bump_squared": bump_squared,
    "bump_xy": bump_xy,
    "bump_linear": bump_linear,
}


@dataclass(frozen=True)
class MTIdentityReport:
    lhs: float
    rhs: float
    mismatch: float

    def to_json(self):
        return json.dumps(
            {"lhs": self.lhs, "rhs": self.rhs, "mismatch": self.mismatch}, sort_keys=True
        )


def _hess_arrays(v, x, y):
    (hxx, hxy), (_, hyy) = v.hess(x, y)
    hxx = np.broadcast_to(np.asarray(hxx, float), np.shape(x))
    hxy = np.broadcast_to(np.asarray(hxy, float), np.shape(x))
    hyy = np.broadcast_to(np.asarray(hyy, float), np.shape(x))
    return hxx, hxy, hyy


def mt_identity(v: TestFunction, dom: SmoothDomain2D, quad_order: int = 64) -> MTIdentityReport:
    """Evaluate both sides of the boundary-curvature identity.

    Interior side by Gauss-Legendre x periodic trapezoid in elliptic polar
    coordinates; boundary side by the trapezoid rule against the signed
    curvature.  Raises if v fails to vanish on the boundary, since the
    identity requires zero trace.
    """
    n_ang = max(16, 4 * quad_order)
    t = 2.0 * np.pi * np.arange(n_ang) / n_ang
    bx = dom.a * np.cos(t)
    by = dom.b * np.sin(t)
    vb = np.asarray(v.value(bx, by), dtype=float)
    scale = max(1.0, float(np.max(np.abs(vb))))
    if np.max(np.abs(vb)) > 1e-12 * scale:
        raise ValueError(
            f"test function '{v.name}' does not vanish on the boundary "
            f"(max |v| = {np.max(np.abs(vb)):.3e})"
        )

    rho, wr = np.polynomial.legendre.leggauss(quad_order)
    rho = 0.5 * (rho + 1.0)
    wr = 0.5 * wr
    R, T = np.meshgrid(rho, t, indexing="ij")
    X = dom.a * R * np.cos(T)
    Y = dom.b * R * np.sin(T)
    hxx, hxy, hyy = _hess_arrays(v, X, Y)
    dens = (hxx ** 2 + 2.0 * hxy ** 2 + hyy ** 2) - (hxx + hyy) ** 2
    jac = dom.a * dom.b * R
    lhs = float(np.sum(dens * jac * wr[:, None]) * (2.0 * np.pi / n_ang))

    gx, gy = v.grad(bx, by)
    grad_sq = np.asarray(gx, float) ** 2 + np.asarray(gy, float) ** 2
    sigma = mean_curvature_signed(dom, t)
    rhs = float(np.sum(grad_sq * sigma * dom.boundary_speed(t)) * (2.0 * np.pi / n_ang))

    mismatch = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-14)
    return MTIdentityReport(lhs=lhs, rhs=rhs, mismatch=mismatch)


def lambda_sandwich_inequality(Lambda: np.ndarray, X: np.ndarray):
    """Check |Lambda X Lambda| >= lambda_1 |X| for diagonal positive Lambda.

    Lambda carries the square roots of the eigenvalues lambda_i; the bound
    uses lambda_1 = (min diagonal)^2.  Also verifies the expansion
    |Lambda X Lambda|^2 = sum_ij X_ij^2 lambda_i lambda_j, then returns
    (lhs, rhs).
    """
    Lambda = np.asarray(Lambda, dtype=float)
    X = np.asarray(X, dtype=float)
    if not np.allclose(Lambda, np.diag(np.diag(Lambda)), atol=0.0):
        raise ValueError("Lambda must be diagonal")
    d = np.diag(Lambda)
    if np.any(d <= 0):
        raise ValueError("Lambda must have positive diagonal entries")
    lams = d ** 2
    sandwiched = Lambda @ X @ Lambda
    lhs = float(np.linalg.norm(sandwiched))
    rhs = float(np.min(lams) * np.linalg.norm(X))
    expansion = float(np.einsum("ij,i,j->", X ** 2, lams, lams))
    scale = max(lhs ** 2, expansion, 1e-300)
    if abs(lhs ** 2 - expansion) > 1e-12 * scale:
        raise ValueError(
            f"sandwich expansion identity violated: |LXL|^2={lhs ** 2!r} vs {expansion!r}"
        )
    if lhs < rhs * (1.0 - 1e-12):
        raise ValueError(f"sandwich inequality violated: {lhs!r} < {rhs!r}")
    return lhs, rhs


def spectral_sqrt_factor(A: np.ndarray) -> np.ndarray:
    """K = O Lambda with A = K K^T, from the spectral decomposition of A > 0."""
    A = np.asarray(A, dtype=float)
    w, O = np.linalg.eigh(A)
    if w[0] <= 0:
        raise ValueError("matrix must be positive definite")
    return O @ np.diag(np.sqrt(w))


def pullback_checks(A: np.ndarray, v: TestFunction, points, tol: float = 1e-10):
    """Verify the composition identities behind the scalar pullback step.

    With K = O Lambda and vt(x) = v(Kx): the Laplacian of vt equals the
    A-contraction of the Hessian of v at Kx, and the Hessian norm of vt
    dominates lambda_min(A) times the Hessian norm of v at Kx.  Checked at
    the supplied sample points; returns a dict of worst-case errors.
    """
    A = np.asarray(A, dtype=float)
    K = spectral_sqrt_factor(A)
    nu = float(np.linalg.eigvalsh(A)[0])
    points = np.atleast_2d(np.asarray(points, dtype=float))
    worst_trace = 0.0
    worst_bound = 0.0
    for x in points:
        y = K @ x
        (hxx, hxy), (_, hyy) = v.hess(y[0], y[1])
        H = np.array([[float(hxx), float(hxy)], [float(hxy), float(hyy)]])
        Ht = K.T @ H @ K
        lap_t = float(np.trace(Ht))
        contracted = float(np.sum(A * H))
        scale = max(abs(lap_t), abs(contracted), 1.0)
        worst_trace = max(worst_trace, abs(lap_t - contracted) / scale)
        lhs = float(np.linalg.norm(Ht))
        rhs = nu * float(np.linalg.norm(H))
        worst_bound = max(worst_bound, (rhs - lhs) / max(rhs, 1e-300))
    report = {
        "trace_identity_error": worst_trace,
        "norm_bound_deficit": max(worst_bound, 0.0),
        "pass": worst_trace <= tol and worst_bound <= tol,
    }
    return report


def generalized_mt_inequality(A: SymTensor4, probes, nu: float | None = None) -> float:
    """Worst ratio nu |D^2 u| / |A : D^2 u| in discrete L2 over probe fields.

    Probes with vanishing Hessian are skipped.  The ratio is asserted to
    stay below 1 + 10 h on the probes' grid (h the largest spacing).
    """
    if nu is None:
        nu = ellipticity_constant(A).nu
    worst = 0.0
    h = None
    for u in probes:
        if not isinstance(u, DiscreteField):
            raise TypeError("probes must be DiscreteField instances")
        h = max(u.domain.h)
        H = discrete_hessian(u)
        hess_norm = hessian_l2(H)
        if hess_norm == 0.0:
            continue
        contracted = np.einsum("aibj,bij...->a...", A.entries, H.values)
        cnorm = float(np.sqrt(np.sum(contracted ** 2) * u.domain.cell_volume))
        worst = max(worst, nu * hess_norm / cnorm)
    if h is not None and worst > 1.0 + 10.0 * h:
        raise ValueError(
            f"generalized second-derivative bound violated: ratio {worst:.6f} "
            f"> 1 + 10h = {1.0 + 10.0 * h:.6f}"
        )
    return worst
