import numpy as np
import pytest

from hessiansys import catalog
from hessiansys.conditions import check_k_condition, standard_cloud
from hessiansys.grid import BoxDomain, field_l2
from hessiansys.nonlinear import SolverConfig, campanato_iterate
from hessiansys.sh import verify_sh
from hessiansys.tensors import ellipticity_constant


def unit_square(m):
    return BoxDomain((0.0, 0.0), (1.0, 1.0), m)


class TestRegistry:
    def test_known_ids(self):
        ids = catalog.list_ids()
        for expected in (
            "linear-laplace",
            "identity-tanh-0.2",
            "g2A-plus-G",
            "strictly-convex-not-CT",
            "identity-tanh-0.2+sin-0.05",
        ):
            assert expected in ids

    def test_unknown_id_raises(self):
        with pytest.raises(KeyError):
            catalog.get("does-not-exist")

    def test_describe_matches_ids(self):
        assert [i for i, _ in catalog.describe()] == catalog.list_ids()

    def test_lookup_is_stable(self):
        assert catalog.get("linear-laplace") is catalog.get("linear-laplace")


class TestManufacturedData:
    def test_linear_laplace_rhs_is_scaled_solution(self):
        entry = catalog.get("linear-laplace")
        dom = unit_square(12)
        f = catalog.manufacture_rhs(entry, dom)
        expected = -2.0 * np.pi ** 2 * entry.u_star.exact_field(dom).values
        assert np.max(np.abs(f.values - expected)) <= 1e-12 * np.max(np.abs(expected))

    def test_zero_solution_reduces_to_operator_at_zero(self):
        base = catalog.get("identity-tanh-0.2")
        zero_star = catalog.ManufacturedSolution(
            N=2, value=lambda x: np.zeros(2), hessian=lambda x: np.zeros((2, 2, 2))
        )
        entry = catalog.CatalogEntry(
            id="zero", dims=base.dims, operator=base.operator, u_star=zero_star, note=""
        )
        dom = unit_square(6)
        f = catalog.manufacture_rhs(entry, dom)
        coords = dom.node_coords().reshape(-1, 2)
        direct = np.stack(
            [base.operator.evaluator(x, np.zeros((2, 2, 2))) for x in coords]
        ).T.reshape(2, 6, 6)
        assert np.array_equal(f.values, direct)

    def test_pointwise_definition(self, rng):
        entry = catalog.get("identity-tanh-0.2")
        dom = unit_square(5)
        f = catalog.manufacture_rhs(entry, dom)
        coords = dom.node_coords()
        i, j = 2, 3
        x = coords[i, j]
        direct = entry.operator.evaluator(x, entry.u_star.hessian(x))
        assert np.allclose(f.values[:, i, j], direct, atol=0.0)

    def test_missing_solution_rejected(self):
        base = catalog.get("linear-laplace")
        entry = catalog.CatalogEntry(
            id="nosol", dims=base.dims, operator=base.operator, u_star=None, note=""
        )
        with pytest.raises(ValueError):
            catalog.manufacture_rhs(entry, unit_square(5))


class TestDeclaredMetadata:
    def test_every_entry_passes_declared_deviation_bound(self):
        cloud = standard_cloud(catalog.get("linear-laplace").dims)
        for entry_id in catalog.list_ids():
            op = catalog.get(entry_id).operator
            report = check_k_condition(op, op.A, op.beta, op.gamma, cloud)
            assert report.passed, (entry_id, report.worst_margin)

    def test_structured_entry_tensor_verifies(self):
        assert verify_sh(catalog.sh_diag_example()).passed

    def test_strictly_convex_tensor_is_rank_one_positive(self):
        A = catalog.strictly_convex_tensor(0.9)
        assert ellipticity_constant(A).nu == pytest.approx(0.1, rel=1e-6)

    def test_solver_roundtrip_within_five_times_baseline(self):
        dom = unit_square(32)
        cfg = SolverConfig(tol=1e-8, max_iter=60)
        lin = catalog.get("linear-laplace")
        u_lin, _ = campanato_iterate(lin.operator, catalog.manufacture_rhs(lin, dom), dom, cfg)
        base_err = field_l2(u_lin - lin.u_star.exact_field(dom))
        for entry_id in catalog.list_ids():
            entry = catalog.get(entry_id)
            if entry.u_star is None:
                continue
            u, report = campanato_iterate(
                entry.operator, catalog.manufacture_rhs(entry, dom), dom, cfg
            )
            assert report.converged, entry_id
            err = field_l2(u - entry.u_star.exact_field(dom))
            assert err <= 5.0 * base_err, (entry_id, err, base_err)
