import numpy as np
import pytest

from bisimp.fea import (
    GridModel,
    LinearSolveError,
    Material,
    apply_stiffness,
    compliance_energy,
    element_stiffness,
    estimate_rho_max,
    exact_solve,
    stiffness_diagonal,
)
from oracles import assemble_dense, dense_solve, make_grid


def classic_quad_stiffness(e, nu):
    # textbook closed form for the unit bilinear plane-stress quad
    k = np.array([
        0.5 - nu / 6, 0.125 + nu / 8, -0.25 - nu / 12, -0.125 + 3 * nu / 8,
        -0.25 + nu / 12, -0.125 - nu / 8, nu / 6, 0.125 - 3 * nu / 8,
    ])
    idx = np.array([
        [0, 1, 2, 3, 4, 5, 6, 7],
        [1, 0, 7, 6, 5, 4, 3, 2],
        [2, 7, 0, 5, 6, 3, 4, 1],
        [3, 6, 5, 0, 7, 2, 1, 4],
        [4, 5, 6, 7, 0, 1, 2, 3],
        [5, 4, 3, 2, 1, 0, 7, 6],
        [6, 3, 4, 1, 2, 7, 0, 5],
        [7, 2, 1, 4, 3, 6, 5, 0],
    ])
    return e / (1 - nu**2) * k[idx]


class TestMaterial:
    def test_defaults(self):
        m = Material()
        assert m.young_modulus == 1.0
        assert m.poisson_ratio == 0.3

    @pytest.mark.parametrize("e,nu", [(0.0, 0.3), (-1.0, 0.3), (1.0, 0.5), (1.0, -0.1)])
    def test_rejects_invalid(self, e, nu):
        with pytest.raises(ValueError):
            Material(e, nu)


class TestElementStiffness:
    def test_symmetric(self):
        ke = element_stiffness(Material(1.0, 0.3))
        assert np.array_equal(ke, ke.T) or np.allclose(ke, ke.T, atol=1e-15)

    def test_rigid_translations_in_nullspace(self):
        ke = element_stiffness(Material(1.0, 0.3))
        tx = np.array([1.0, 0, 1, 0, 1, 0, 1, 0])
        ty = np.array([0.0, 1, 0, 1, 0, 1, 0, 1])
        assert np.abs(ke @ tx).max() < 1e-14
        assert np.abs(ke @ ty).max() < 1e-14

    def test_eigenvalues_three_zero_five_positive(self):
        ke = element_stiffness(Material(1.0, 0.3))
        lam = np.linalg.eigvalsh(ke)
        assert np.sum(np.abs(lam) < 1e-12) == 3
        assert np.sum(lam > 1e-12) == 5

    @pytest.mark.parametrize("nu", [0.0, 0.2, 0.3, 0.45])
    def test_matches_classic_closed_form(self, nu):
        ke = element_stiffness(Material(1.0, nu))
        assert np.allclose(ke, classic_quad_stiffness(1.0, nu), atol=1e-13)


class TestGridModel:
    def test_rejects_too_few_fixed_dofs(self):
        n_dofs = 2 * 3 * 2
        fixed = np.zeros(n_dofs, dtype=bool)
        fixed[:2] = True
        with pytest.raises(ValueError, match="3 DOFs"):
            GridModel(2, 1, element_stiffness(Material()), fixed, np.zeros(n_dofs))

    def test_rejects_load_on_fixed_dof(self):
        n_dofs = 2 * 3 * 2
        fixed = np.zeros(n_dofs, dtype=bool)
        fixed[:4] = True
        load = np.zeros(n_dofs)
        load[0] = 1.0
        with pytest.raises(ValueError, match="zero on fixed"):
            GridModel(2, 1, element_stiffness(Material()), fixed, load)

    def test_counts(self):
        g = make_grid(3, 2)
        assert g.num_elements == 6
        assert g.num_nodes == 12
        assert g.num_dofs == 24


class TestApplyStiffness:
    def test_zero_displacement(self):
        g = make_grid(2, 2)
        y = apply_stiffness(g, np.ones(4), np.zeros(g.num_dofs))
        assert np.array_equal(y, np.zeros(g.num_dofs))

    def test_x_translation_with_only_y_fixtures(self):
        # fixing only y DOFs keeps the x-translation in the operator nullspace
        nx = ny = 2
        n_dofs = 2 * (nx + 1) * (ny + 1)
        fixed = np.zeros(n_dofs, dtype=bool)
        fixed[[1, 3, 5]] = True
        g = make_grid(nx, ny, fixed_dofs=fixed, load=np.zeros(n_dofs))
        u = np.zeros(n_dofs)
        u[0::2] = 1.0
        y = apply_stiffness(g, np.full(4, 0.7), u)
        assert np.abs(y).max() < 1e-13

    def test_matches_dense_assembly(self):
        rng = np.random.default_rng(7)
        g = make_grid(2, 1)
        a = rng.uniform(0.1, 1.0, g.num_elements)
        u = rng.standard_normal(g.num_dofs)
        k = assemble_dense(g, a)
        assert np.allclose(apply_stiffness(g, a, u), k @ u, atol=1e-12)

    def test_linear_in_u_and_a(self):
        rng = np.random.default_rng(8)
        g = make_grid(3, 2)
        a1 = rng.uniform(0.1, 1.0, g.num_elements)
        a2 = rng.uniform(0.1, 1.0, g.num_elements)
        u1 = rng.standard_normal(g.num_dofs)
        u2 = rng.standard_normal(g.num_dofs)
        lhs = apply_stiffness(g, a1, 2.0 * u1 - 3.0 * u2)
        rhs = 2.0 * apply_stiffness(g, a1, u1) - 3.0 * apply_stiffness(g, a1, u2)
        assert np.allclose(lhs, rhs, atol=1e-12)
        lhs = apply_stiffness(g, a1 + 0.5 * a2, u1)
        rhs = apply_stiffness(g, a1, u1) + 0.5 * apply_stiffness(g, a2, u1)
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_symmetric_operator(self):
        rng = np.random.default_rng(9)
        g = make_grid(4, 3)
        a = rng.uniform(0.1, 1.0, g.num_elements)
        for _ in range(5):
            u = rng.standard_normal(g.num_dofs)
            w = rng.standard_normal(g.num_dofs)
            lhs = apply_stiffness(g, a, u) @ w
            rhs = u @ apply_stiffness(g, a, w)
            assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))

    def test_positive_definite_on_free_dofs(self):
        rng = np.random.default_rng(10)
        g = make_grid(3, 3)
        a = np.full(g.num_elements, 0.1**3)
        for _ in range(10):
            u = rng.standard_normal(g.num_dofs)
            u[g.fixed_dofs] = 0.0
            assert u @ apply_stiffness(g, a, u) > 0.0

    def test_dimension_mismatch(self):
        g = make_grid(2, 2)
        with pytest.raises(ValueError):
            apply_stiffness(g, np.ones(4), np.zeros(3))
        with pytest.raises(ValueError):
            apply_stiffness(g, np.ones(5), np.zeros(g.num_dofs))

    def test_threaded_matches_serial_and_is_deterministic(self):
        rng = np.random.default_rng(11)
        g = make_grid(8, 6)
        a = rng.uniform(0.1, 1.0, g.num_elements)
        u = rng.standard_normal(g.num_dofs)
        serial = apply_stiffness(g, a, u)
        t1 = apply_stiffness(g, a, u, threads=3)
        t2 = apply_stiffness(g, a, u, threads=3)
        assert np.allclose(serial, t1, atol=1e-12)
        assert np.array_equal(t1, t2)


class TestComplianceEnergy:
    def test_zero(self):
        g = make_grid(2, 2)
        assert compliance_energy(g, np.ones(4), np.zeros(g.num_dofs)) == 0.0

    def test_quadratic_scaling(self):
        rng = np.random.default_rng(12)
        g = make_grid(3, 2)
        a = rng.uniform(0.1, 1.0, g.num_elements)
        u = rng.standard_normal(g.num_dofs)
        c1 = compliance_energy(g, a, u)
        c2 = compliance_energy(g, a, 2.0 * u)
        assert np.isclose(c2, 4.0 * c1, rtol=1e-12)

    def test_equals_half_f_dot_u_at_equilibrium(self):
        g = make_grid(2, 2)
        a = np.full(g.num_elements, 0.6)
        u = dense_solve(g, a)
        c = compliance_energy(g, a, u)
        assert np.isclose(c, 0.5 * g.load @ u, rtol=1e-10)


class TestExactSolve:
    def test_zero_load(self):
        g = make_grid(2, 2, load=np.zeros(2 * 9))
        u = exact_solve(g, np.ones(4), tol=1e-10)
        assert np.array_equal(u, np.zeros(g.num_dofs))

    def test_residual_postcondition(self):
        rng = np.random.default_rng(13)
        g = make_grid(5, 4)
        a = rng.uniform(0.001, 1.0, g.num_elements)
        u = exact_solve(g, a, tol=1e-10)
        r = apply_stiffness(g, a, u) - g.load
        assert np.abs(r).max() <= 1e-10

    def test_single_element_cantilever_matches_dense(self):
        g = make_grid(1, 1)
        a = np.ones(1)
        u = exact_solve(g, a, tol=1e-12)
        assert np.allclose(u, dense_solve(g, a), atol=1e-10)

    def test_energy_identity(self):
        rng = np.random.default_rng(14)
        g = make_grid(4, 4)
        a = rng.uniform(0.1, 1.0, g.num_elements)
        u = exact_solve(g, a, tol=1e-11)
        lhs = 0.5 * g.load @ u
        rhs = compliance_energy(g, a, u)
        assert np.isclose(lhs, rhs, rtol=1e-8)

    def test_warm_start_converges(self):
        g = make_grid(4, 3)
        a = np.full(g.num_elements, 0.5)
        u0 = exact_solve(g, a, tol=1e-6)
        u = exact_solve(g, a, tol=1e-12, x0=u0)
        assert np.abs(apply_stiffness(g, a, u) - g.load).max() <= 1e-12

    def test_unreachable_tolerance_reported(self):
        g = make_grid(6, 6)
        a = np.full(g.num_elements, 0.5)
        with pytest.raises(LinearSolveError):
            exact_solve(g, a, tol=1e-40, max_iters=2)


class TestStiffnessDiagonal:
    def test_matches_dense(self):
        rng = np.random.default_rng(15)
        g = make_grid(3, 2)
        a = rng.uniform(0.1, 1.0, g.num_elements)
        k = assemble_dense(g, a, masked=False)
        d = stiffness_diagonal(g, a)
        free = ~g.fixed_dofs
        assert np.allclose(d[free], np.diag(k)[free], atol=1e-13)
        assert np.all(d[g.fixed_dofs] == 1.0)


class TestEstimateRhoMax:
    def test_matches_dense_eigensolver(self):
        g = make_grid(1, 1)
        a = np.ones(1)
        est = estimate_rho_max(g, a, iters=200)
        k = assemble_dense(g, a)
        free = ~g.fixed_dofs
        lam_max = np.linalg.eigvalsh(k[np.ix_(free, free)]).max()
        assert abs(est.rho_max - lam_max) <= 0.01 * lam_max

    def test_scales_linearly_with_activation(self):
        g = make_grid(3, 2)
        a = np.full(g.num_elements, 0.4)
        e1 = estimate_rho_max(g, a, iters=50, seed=3)
        e2 = estimate_rho_max(g, 2.0 * a, iters=50, seed=3)
        assert abs(e2.rho_max - 2.0 * e1.rho_max) <= 0.01 * e2.rho_max

    def test_monotone_in_iterations(self):
        g = make_grid(4, 3)
        a = np.full(g.num_elements, 0.7)
        estimates = [estimate_rho_max(g, a, iters=i, seed=5).rho_max for i in (5, 10, 20, 40, 80)]
        assert all(b >= a_ - 1e-12 for a_, b in zip(estimates, estimates[1:]))

    def test_rejects_few_iterations(self):
        g = make_grid(2, 2)
        with pytest.raises(ValueError):
            estimate_rho_max(g, np.ones(4), iters=4)
