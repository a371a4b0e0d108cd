"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; every tolerance is pinned here and nothing is deferred to
calibration.
"""

import statistics
import time

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import random_sh_decomposition
from hessiansys import catalog
from hessiansys.conditions import (
    check_campanato_tarsia,
    check_k_condition,
    fit_beta_gamma,
    k_condition_margins,
    standard_cloud,
)
from hessiansys.exceptions import StabilityGuardError
from hessiansys.grid import (
    BoxDomain,
    DiscreteField,
    field_l2,
    random_zero_boundary_field,
)
from hessiansys.linear import solve_dirichlet
from hessiansys.mt import (
    SmoothDomain2D,
    bump,
    generalized_mt_inequality,
    lambda_sandwich_inequality,
    mean_curvature_signed,
    mt_identity,
)
from hessiansys.nonlinear import SolverConfig, campanato_iterate, comparison_check, stability_solve
from hessiansys.sh import assemble, min_range_quadratic_identity, nu_from_sh, rescale_common_lambda
from hessiansys.tensors import Dims, ellipticity_constant, identity_tensor, monotone_tensor


def _line(num, ok, text):
    print(f"ACCEPTANCE {num:02d} {'PASS' if ok else 'FAIL'} - {text}")
    assert ok, f"criterion {num}: {text}"


def unit_square(m):
    return BoxDomain((0.0, 0.0), (1.0, 1.0), m)


def linear_baseline_error(dom, cfg):
    lin = catalog.get("linear-laplace")
    u, _ = campanato_iterate(lin.operator, catalog.manufacture_rhs(lin, dom), dom, cfg)
    return field_l2(u - lin.u_star.exact_field(dom))


def test_criterion_01_identity_on_disk():
    t0 = time.perf_counter()
    disk = SmoothDomain2D.disk(1.0)
    rep = mt_identity(bump(disk), disk, 64)
    elapsed = time.perf_counter() - t0
    expect = -8.0 * np.pi
    ok = (
        abs(rep.lhs - expect) <= 1e-6 * abs(expect)
        and abs(rep.rhs - expect) <= 1e-6 * abs(expect)
        and elapsed < 1.0
    )
    _line(
        1,
        ok,
        f"disk identity lhs={rep.lhs:.8f} rhs={rep.rhs:.8f} vs -8*pi, {elapsed:.2f}s",
    )


def test_criterion_02_identity_on_ellipse():
    t0 = time.perf_counter()
    dom = SmoothDomain2D.ellipse(2.0, 1.0)
    v = bump(dom)
    rep = mt_identity(v, dom, 64)
    elapsed = time.perf_counter() - t0

    # independent oracle 1: pointwise-constant interior integrand times area
    rng = np.random.default_rng(1)
    pts = rng.uniform(-0.5, 0.5, size=(20, 2))
    (hxx, hxy), (_, hyy) = v.hess(pts[:, 0], pts[:, 1])
    dens = (hxx ** 2 + 2 * hxy ** 2 + hyy ** 2) - (hxx + hyy) ** 2
    assert np.allclose(dens, -2.0, atol=1e-14)
    interior_oracle = -2.0 * np.pi * dom.a * dom.b

    # independent oracle 2: adaptive parametric quadrature of the boundary side
    def integrand(t):
        x, y = dom.a * np.cos(t), dom.b * np.sin(t)
        gx, gy = v.grad(x, y)
        return (gx ** 2 + gy ** 2) * mean_curvature_signed(dom, t) * dom.boundary_speed(t)

    boundary_oracle, _ = quad(integrand, 0.0, 2.0 * np.pi, limit=200)

    expect = -4.0 * np.pi
    ok = (
        abs(interior_oracle - expect) <= 1e-12
        and abs(boundary_oracle - expect) <= 1e-9
        and abs(rep.lhs - expect) <= 1e-6 * abs(expect)
        and abs(rep.rhs - expect) <= 1e-6 * abs(expect)
        and elapsed < 1.0
    )
    _line(2, ok, f"ellipse identity lhs={rep.lhs:.8f} rhs={rep.rhs:.8f} vs -4*pi, {elapsed:.2f}s")


def test_criterion_03_sandwich_suite():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst_identity = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 5))
        lam_sqrt = np.sort(rng.uniform(0.2, 3.0, size=n))
        X = rng.standard_normal((n, n))
        X = 0.5 * (X + X.T)
        lhs, rhs = lambda_sandwich_inequality(np.diag(lam_sqrt), X)
        assert lhs >= rhs * (1.0 - 1e-12)
        expansion = float(np.einsum("ij,i,j->", X ** 2, lam_sqrt ** 2, lam_sqrt ** 2))
        worst_identity = max(
            worst_identity, abs(lhs ** 2 - expansion) / max(lhs ** 2, expansion, 1e-300)
        )
    elapsed = time.perf_counter() - t0
    ok = worst_identity <= 1e-12 and elapsed < 1.0
    _line(3, ok, f"1000 sandwich bounds, worst identity error {worst_identity:.2e}, {elapsed:.2f}s")


def test_criterion_04_closed_form_constant():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst_rel = 0.0
    worst_identity = 0.0
    for _ in range(50):
        dec = rescale_common_lambda(random_sh_decomposition(rng))
        nu_cf = nu_from_sh(dec)
        nu_scan = ellipticity_constant(assemble(dec)).nu
        worst_rel = max(worst_rel, abs(nu_cf - nu_scan) / abs(nu_cf))
        lhs, rhs = min_range_quadratic_identity(dec)
        worst_identity = max(worst_identity, abs(lhs - rhs))
    elapsed = time.perf_counter() - t0
    ok = worst_rel <= 1e-6 and worst_identity <= 1e-10 and elapsed < 10.0
    _line(
        4,
        ok,
        f"50 decompositions: closed form vs scan {worst_rel:.2e}, "
        f"range identity {worst_identity:.2e}, {elapsed:.1f}s",
    )


def test_criterion_05_discrete_second_derivative_bound():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    tensors = [identity_tensor(Dims(2, 2))]
    tensors += [assemble(random_sh_decomposition(rng)) for _ in range(3)]
    worst = 0.0
    bound = np.inf
    for m in (32, 64):
        dom = unit_square(m)
        h = max(dom.h)
        bound = min(bound, 1.0 + 10.0 * h)
        probes = [
            random_zero_boundary_field(dom, 2, rng, smooth=bool(k % 2)) for k in range(100)
        ]
        for A in tensors:
            ratio = generalized_mt_inequality(A, probes)
            worst = max(worst, ratio / (1.0 + 10.0 * h))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1.0 and elapsed < 30.0
    _line(
        5,
        ok,
        f"4 tensors x 2 meshes x 100 probes, worst ratio/bound {worst:.4f}, {elapsed:.1f}s",
    )


def test_criterion_06_linear_solver_convergence():
    t0 = time.perf_counter()
    A = monotone_tensor(np.eye(2), 1)
    errs = []
    worst_resid = 0.0
    for m in (16, 32, 64):
        dom = unit_square(m)
        f = DiscreteField.from_function(
            dom,
            1,
            lambda x: [-2.0 * np.pi ** 2 * np.sin(np.pi * x[0]) * np.sin(np.pi * x[1])],
        )
        u, rep = solve_dirichlet(A, f, dom)
        worst_resid = max(worst_resid, rep.relative_residual)
        exact = DiscreteField.from_function(
            dom, 1, lambda x: [np.sin(np.pi * x[0]) * np.sin(np.pi * x[1])]
        )
        errs.append(field_l2(u - exact))
    r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
    elapsed = time.perf_counter() - t0
    ok = 3.5 <= r1 <= 4.5 and 3.5 <= r2 <= 4.5 and worst_resid <= 1e-10 and elapsed < 30.0
    _line(
        6,
        ok,
        f"error ratios {r1:.2f}, {r2:.2f} (order 2), residual {worst_resid:.1e}, {elapsed:.1f}s",
    )


def test_criterion_07_contraction_solve():
    t0 = time.perf_counter()
    dom = unit_square(32)
    cfg = SolverConfig(tol=1e-8, max_iter=100)
    entry = catalog.get("identity-tanh-0.2")
    u, rep = campanato_iterate(entry.operator, catalog.manufacture_rhs(entry, dom), dom, cfg)
    err = field_l2(u - entry.u_star.exact_field(dom))
    base_err = linear_baseline_error(dom, cfg)
    elapsed = time.perf_counter() - t0
    median_ratio = statistics.median(rep.ratios)
    iter_cap = int(np.ceil(np.log(cfg.tol / rep.distances[0]) / np.log(0.25))) + 5
    ok = (
        rep.converged
        and median_ratio <= 0.25
        and err <= 2.0 * base_err
        and rep.iterations <= iter_cap
        and elapsed < 60.0
    )
    _line(
        7,
        ok,
        f"median ratio {median_ratio:.3f}, error {err:.2e} vs 2x{base_err:.2e}, "
        f"{rep.iterations} <= {iter_cap} iterations, {elapsed:.1f}s",
    )


def test_criterion_08_comparison_estimate():
    t0 = time.perf_counter()
    entry = catalog.get("identity-tanh-0.2")
    dom = unit_square(16)
    rng = np.random.default_rng(8)
    violations = 0
    for k in range(50):
        w = random_zero_boundary_field(dom, 2, rng, smooth=bool(k % 2))
        v = random_zero_boundary_field(dom, 2, rng, smooth=bool(k % 3))
        if not comparison_check(entry.operator, w, v).ok:
            violations += 1
    elapsed = time.perf_counter() - t0
    ok = violations == 0
    _line(8, ok, f"50 field pairs, {violations} violations of the norm comparison, {elapsed:.1f}s")


def test_criterion_09_certification():
    t0 = time.perf_counter()
    g2 = catalog.get("g2A-plus-G")
    cloud = standard_cloud(g2.dims, size=10000, seed=2718)
    fit = fit_beta_gamma(g2.operator, g2.operator.A, cloud)

    sc = catalog.get("strictly-convex-not-CT")
    k_rep = check_k_condition(sc.operator, sc.operator.A, sc.operator.beta, sc.operator.gamma, cloud)
    p = sc.ct_params
    ct_rep = check_campanato_tarsia(sc.operator, p["alpha"], p["beta"], p["gamma"], cloud)

    # determinism under the fixed seed
    cloud_again = standard_cloud(g2.dims, size=10000, seed=2718)
    fit_again = fit_beta_gamma(g2.operator, g2.operator.A, cloud_again)
    ct_again = check_campanato_tarsia(sc.operator, p["alpha"], p["beta"], p["gamma"], cloud_again)

    elapsed = time.perf_counter() - t0
    ok = (
        fit.feasible
        and 0.28 <= fit.beta <= 0.32
        and 0.0 <= fit.gamma <= 0.05
        and k_rep.passed
        and not ct_rep.passed
        and ct_rep.witness is not None
        and fit.to_json() == fit_again.to_json()
        and ct_rep.to_json() == ct_again.to_json()
        and elapsed < 30.0
    )
    _line(
        9,
        ok,
        f"fit beta={fit.beta:.4f} gamma={fit.gamma:.2e}, trace-reduction FAIL with witness "
        f"sample {ct_rep.witness_index}, deterministic, {elapsed:.1f}s",
    )


def test_criterion_10_stability_transfer():
    t0 = time.perf_counter()
    base = catalog.get("identity-tanh-0.2")
    target = catalog.get("identity-tanh-0.2+sin-0.05")
    dom = unit_square(16)
    cfg = SolverConfig(tol=1e-7, max_iter=100)
    g = catalog.manufacture_rhs(target, dom)
    u, rep = stability_solve(base.operator, target.operator, g, dom, cfg)
    err = field_l2(u - target.u_star.exact_field(dom))
    base_err = linear_baseline_error(dom, cfg)

    guard_tripped = False
    try:
        bad = catalog.sin_perturbation(base.operator, 1.5)
        stability_solve(base.operator, bad, DiscreteField.zero(dom, 2), dom, cfg)
    except StabilityGuardError:
        guard_tripped = True
    elapsed = time.perf_counter() - t0
    ok = rep.final_residual <= cfg.tol and err <= 2.0 * base_err and guard_tripped
    _line(
        10,
        ok,
        f"nested solve residual {rep.final_residual:.1e}, error {err:.2e} vs "
        f"2x{base_err:.2e}, guard rejected the oversized perturbation, {elapsed:.1f}s",
    )


def test_criterion_11_reduction_agreement():
    t0 = time.perf_counter()
    entry = catalog.get("linear-laplace")  # constant unit scaling
    op = entry.operator
    cloud = standard_cloud(op.dims, size=10000, seed=1111)
    ident = identity_tensor(op.dims)
    beta, gamma = 0.5, 0.4
    general, _ = k_condition_margins(op, ident, beta, gamma, cloud)
    reduced, _ = k_condition_margins(op, ident, beta, gamma, cloud, alpha=lambda x: 1.0)
    bitwise = np.array_equal(general, reduced)
    rep_general = check_k_condition(op, ident, beta, gamma, cloud)
    rep_reduced = check_campanato_tarsia(op, 1.0, beta, gamma, cloud)
    elapsed = time.perf_counter() - t0
    ok = bitwise and rep_general.worst_margin == rep_reduced.worst_margin
    _line(
        11,
        ok,
        f"10^4-sample margins bitwise equal between the general and trace-reduced "
        f"checks, {elapsed:.1f}s",
    )
