import numpy as np
import pytest

from hessiansys import catalog
from hessiansys.conditions import (
    SampleCloud,
    check_campanato_tarsia,
    check_def1,
    check_k_condition,
    fit_beta_gamma,
    k_condition_margins,
    nu_FG,
    standard_cloud,
)
from hessiansys.nonlinear import NonlinearOperator
from hessiansys.tensors import Dims, SymTensor4, ellipticity_constant, identity_tensor

D22 = Dims(2, 2)


def small_cloud(size=3000, seed=11):
    return standard_cloud(D22, size=size, seed=seed)


def make_operator(evaluator, A, beta=0.5, gamma=0.4, alpha=None):
    return NonlinearOperator(
        evaluator=evaluator,
        alpha=alpha or (lambda x: 1.0),
        A=A,
        beta=beta,
        gamma=gamma,
        name="test",
    )


class TestCloud:
    def test_deterministic_regeneration(self):
        a = SampleCloud(seed=7, dims=D22, size=500)
        b = SampleCloud(seed=7, dims=D22, size=500)
        assert np.array_equal(a.x, b.x)
        assert np.array_equal(a.X, b.X)
        assert np.array_equal(a.Z, b.Z)
        c = SampleCloud(seed=8, dims=D22, size=500)
        assert not np.array_equal(a.Z, c.Z)

    def test_increments_never_zero_and_radii_logspaced(self):
        cloud = small_cloud(1000)
        norms = np.linalg.norm(cloud.Z.reshape(1000, -1), axis=1)
        assert np.all(norms > 0)
        assert norms.min() == pytest.approx(1e-3, rel=1e-9)
        assert norms.max() == pytest.approx(1e3, rel=1e-9)

    def test_points_inside_box(self):
        cloud = SampleCloud(seed=1, dims=D22, lower=(-1.0, 2.0), upper=(0.0, 5.0), size=200)
        assert np.all(cloud.x[:, 0] >= -1.0) and np.all(cloud.x[:, 0] <= 0.0)
        assert np.all(cloud.x[:, 1] >= 2.0) and np.all(cloud.x[:, 1] <= 5.0)


class TestDeviationBound:
    def test_linear_operator_passes_with_positive_margin(self):
        entry = catalog.get("linear-laplace")
        cloud = small_cloud()
        report = check_k_condition(entry.operator, entry.operator.A, 0.3, 0.3, cloud)
        assert report.passed
        assert report.worst_margin > 0
        assert report.witness is None

    def test_weighted_entry_passes_declared_constants(self):
        entry = catalog.get("g2A-plus-G")
        op = entry.operator
        report = check_k_condition(op, op.A, op.beta, op.gamma, small_cloud())
        assert report.passed

    def test_oversized_perturbation_fails_with_witness(self):
        ident = identity_tensor(D22)
        bad = make_operator(catalog._norm_perturbation(ident, 2.0, np.tanh), ident)
        report = check_k_condition(bad, ident, 0.4, 0.4, small_cloud())
        assert not report.passed
        assert report.worst_margin < 0
        assert report.witness is not None
        # recheck the reported witness by hand
        w = report.witness
        nu = ellipticity_constant(ident).nu
        lhs = np.linalg.norm(
            np.einsum("aibj,bij->a", ident.entries, w["Z"])
            - (bad.evaluator(w["x"], w["X"] + w["Z"]) - bad.evaluator(w["x"], w["X"]))
        )
        rhs = 0.4 * nu * np.linalg.norm(w["Z"]) + 0.4 * np.linalg.norm(
            np.einsum("aibj,bij->a", ident.entries, w["Z"])
        )
        assert lhs > rhs

    def test_rejects_nonpositive_constants(self):
        entry = catalog.get("linear-laplace")
        with pytest.raises(ValueError):
            check_k_condition(entry.operator, entry.operator.A, 0.0, 0.1, small_cloud(100))

    def test_deviation_controlled_by_max_of_both_scales(self):
        # any sample passing the two-term bound also obeys the single
        # max-scale bound with constant beta + gamma
        entry = catalog.get("identity-tanh-0.2")
        op = entry.operator
        cloud = small_cloud(2000)
        margins, _ = k_condition_margins(op, op.A, op.beta, op.gamma, cloud)
        nu = ellipticity_constant(op.A).nu
        AZ = np.einsum("aibj,sbij->sa", op.A.entries, cloud.Z)
        inc = np.stack(
            [
                np.asarray(op.evaluator(cloud.x[s], cloud.X[s] + cloud.Z[s]))
                - np.asarray(op.evaluator(cloud.x[s], cloud.X[s]))
                for s in range(cloud.size)
            ]
        )
        lhs = np.linalg.norm(AZ - inc, axis=1)
        z = np.linalg.norm(cloud.Z.reshape(cloud.size, -1), axis=1)
        az = np.linalg.norm(AZ, axis=1)
        cap = (op.beta + op.gamma) * np.maximum(nu * z, az)
        ok = margins >= 0
        assert np.all(lhs[ok] <= cap[ok] * (1.0 + 1e-12))


class TestPseudoMonotonicity:
    def test_linear_passes(self):
        entry = catalog.get("linear-laplace")
        report = check_def1(entry.operator, entry.operator.A, 1.0, 0.5, small_cloud())
        assert report.passed

    def test_tanh_entry_with_derived_constants(self):
        entry = catalog.get("identity-tanh-0.2")
        # lam = 1 - beta/2, kappa = beta/2 from the Cauchy-Schwarz split
        report = check_def1(entry.operator, entry.operator.A, 0.9, 0.1, small_cloud())
        assert report.passed

    def test_sign_flip_fails(self):
        ident = identity_tensor(D22)
        flipped = make_operator(
            lambda x, X: -np.einsum("aibj,bij->a", ident.entries, X), ident
        )
        report = check_def1(flipped, ident, 0.5, 0.25, small_cloud())
        assert not report.passed

    def test_parameter_ordering_enforced(self):
        entry = catalog.get("linear-laplace")
        with pytest.raises(ValueError):
            check_def1(entry.operator, entry.operator.A, 0.1, 0.5, small_cloud(100))


class TestTraceReduction:
    def test_identity_operator_passes(self):
        entry = catalog.get("linear-laplace")
        report = check_campanato_tarsia(entry.operator, 1.0, 0.5, 0.4, small_cloud())
        assert report.passed

    def test_strictly_convex_entry_fails_while_deviation_passes(self):
        entry = catalog.get("strictly-convex-not-CT")
        op = entry.operator
        cloud = small_cloud()
        p = entry.ct_params
        ct = check_campanato_tarsia(op, p["alpha"], p["beta"], p["gamma"], cloud)
        k = check_k_condition(op, op.A, op.beta, op.gamma, cloud)
        assert k.passed
        assert not ct.passed
        assert ct.witness is not None

    def test_scaling_homogeneity_bitwise(self):
        base = catalog.get("linear-laplace").operator
        doubled = make_operator(
            lambda x, X: 2.0 * np.asarray(base.evaluator(x, X)), base.A
        )
        cloud = small_cloud(1000)
        ident = identity_tensor(D22)
        m1, _ = k_condition_margins(base, ident, 0.5, 0.4, cloud, alpha=lambda x: 1.0)
        m2, _ = k_condition_margins(doubled, ident, 0.5, 0.4, cloud, alpha=lambda x: 0.5)
        assert np.array_equal(m1, m2)

    def test_reduction_matches_general_kernel_bitwise(self):
        entry = catalog.get("linear-laplace")
        op = entry.operator
        cloud = small_cloud(2000)
        ident = identity_tensor(op.dims)
        general, _ = k_condition_margins(op, ident, 0.5, 0.4, cloud)
        nu_id = ellipticity_constant(ident).nu
        reduced, _ = k_condition_margins(
            op, ident, 0.5, 0.4, cloud, alpha=lambda x: 1.0, nu=nu_id
        )
        assert np.array_equal(general, reduced)
        rep_general = check_k_condition(op, ident, 0.5, 0.4, cloud)
        rep_reduced = check_campanato_tarsia(op, 1.0, 0.5, 0.4, cloud)
        assert rep_general.worst_margin == rep_reduced.worst_margin

    def test_alpha_must_be_positive(self):
        entry = catalog.get("linear-laplace")
        with pytest.raises(ValueError):
            check_campanato_tarsia(entry.operator, 0.0, 0.5, 0.4, small_cloud(100))


class TestConstantFitting:
    def test_linear_hits_the_floor(self):
        entry = catalog.get("linear-laplace")
        fit = fit_beta_gamma(entry.operator, entry.operator.A, small_cloud())
        assert fit.feasible
        assert fit.beta == pytest.approx(1e-9, abs=1e-12)
        assert fit.gamma == pytest.approx(1e-9, abs=1e-12)

    def test_tanh_entry_recovers_lipschitz_constant(self):
        entry = catalog.get("identity-tanh-0.2")
        fit = fit_beta_gamma(entry.operator, entry.operator.A, small_cloud())
        assert fit.feasible
        assert 0.18 <= fit.beta <= 0.21
        assert fit.gamma <= 0.05

    def test_oversized_perturbation_infeasible(self):
        ident = identity_tensor(D22)
        bad = make_operator(catalog._norm_perturbation(ident, 2.0, np.tanh), ident)
        fit = fit_beta_gamma(bad, ident, small_cloud())
        assert not fit.feasible
        assert fit.beta + fit.gamma >= 1.0

    def test_fit_generalizes_to_fresh_cloud(self):
        entry = catalog.get("g2A-plus-G")
        op = entry.operator
        fit = fit_beta_gamma(op, op.A, small_cloud(seed=11))
        fresh = small_cloud(seed=12)
        margins, scales = k_condition_margins(op, op.A, fit.beta, fit.gamma, fresh)
        assert np.min(margins / scales) >= -1e-6

    def test_nonpositive_tensor_reported_as_anomaly(self):
        from hessiansys.tensors import monotone_tensor

        indefinite = monotone_tensor(np.diag([1.0, -1.0]), 2)
        entry = catalog.get("linear-laplace")
        fit = fit_beta_gamma(entry.operator, indefinite, small_cloud(200))
        assert not fit.feasible
        assert fit.anomaly is not None

    def test_envelope_program_matches_reference_solver(self, rng):
        from scipy.optimize import linprog

        from hessiansys.conditions import minimize_l1_over_halfplanes

        floor = 1e-9
        for _ in range(100):
            S = int(rng.integers(1, 60))
            p = rng.uniform(0.01, 3.0, S)
            q = rng.uniform(0.0, 3.0, S) * (rng.random(S) > 0.2)
            L = rng.uniform(0.0, 2.0, S) * (rng.random(S) > 0.1)
            beta, gamma = minimize_l1_over_halfplanes(p, q, L, floor)
            assert np.all(beta * p + gamma * q >= L * (1.0 - 1e-12))
            ref = linprog(
                c=[1.0, 1.0],
                A_ub=np.column_stack([-p, -q]),
                b_ub=-L,
                bounds=[(floor, None), (floor, None)],
                method="highs",
            )
            assert ref.success
            assert beta + gamma <= ref.fun + 1e-12


class TestOperatorDistance:
    def test_identical_operators(self):
        op = catalog.get("identity-tanh-0.2").operator
        assert nu_FG(op, op, small_cloud(500)) == 0.0

    def test_linear_perturbation_bounded_by_spectral_norm(self, rng):
        base = catalog.get("linear-laplace").operator
        P = rng.standard_normal((2, 2, 2, 2))
        P = 0.5 * (P + P.transpose(2, 3, 0, 1))
        P_tensor = SymTensor4(D22, P)
        eps = 0.3

        perturbed = make_operator(
            lambda x, X: np.asarray(base.evaluator(x, X))
            + eps * np.einsum("aibj,bij->a", P_tensor.entries, X),
            base.A,
        )
        # exact supremum: spectral norm of the linear map on symmetric values
        basis = []
        for a in range(2):
            for i in range(2):
                for j in range(i, 2):
                    E = np.zeros((2, 2, 2))
                    if i == j:
                        E[a, i, j] = 1.0
                    else:
                        E[a, i, j] = E[a, j, i] = 1.0 / np.sqrt(2.0)
                    basis.append(E)
        M = np.stack(
            [np.einsum("aibj,bij->a", P_tensor.entries, E) for E in basis], axis=1
        )
        sigma = np.linalg.svd(M, compute_uv=False)[0]
        est = nu_FG(base, perturbed, small_cloud(4000))
        assert est <= eps * sigma * (1.0 + 1e-12)
        assert est >= 0.5 * eps * sigma

    def test_symmetry(self):
        F = catalog.get("identity-tanh-0.2").operator
        G = catalog.get("identity-tanh-0.2+sin-0.05").operator
        cloud = small_cloud(500)
        assert nu_FG(F, G, cloud) == nu_FG(G, F, cloud)


class TestReportDeterminism:
    def test_reports_reproducible(self):
        entry = catalog.get("g2A-plus-G")
        op = entry.operator
        r1 = check_k_condition(op, op.A, op.beta, op.gamma, small_cloud(seed=3))
        r2 = check_k_condition(op, op.A, op.beta, op.gamma, small_cloud(seed=3))
        assert r1.to_json() == r2.to_json()

    def test_witness_tie_break_is_lowest_index(self):
        ident = identity_tensor(D22)
        bad = make_operator(catalog._norm_perturbation(ident, 2.0, np.tanh), ident)
        cloud = small_cloud(1000)
        r = check_k_condition(bad, ident, 0.4, 0.4, cloud)
        margins, scales = k_condition_margins(bad, ident, 0.4, 0.4, cloud)
        assert r.witness_index == int(np.argmin(margins / scales))
