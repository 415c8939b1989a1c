import numpy as np
import pytest
import scipy.sparse as sp

from graphfem.fem import (
    CoefficientError,
    ConfigError,
    NonSPDError,
    assemble,
    build_dofmap,
    build_mesh,
    direct_solve,
    error_norms,
    interpolate,
    make_problem,
    solve_direct,
)
from graphfem.graphs import barabasi_albert, build_graph, dgm

UNIT_EDGE = [(0, 1, 1.0)]
TWO_PATH = [(0, 1, 1.0), (1, 2, 1.0)]
THREE_STAR = [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]


class TestMesh:
    def test_unit_edge_half(self):
        mesh = build_mesh(build_graph(UNIT_EDGE), 0.5)
        assert mesh.n_intervals[0] == 2
        assert mesh.spacing[0] == 0.5

    def test_unit_edge_level6(self):
        mesh = build_mesh(build_graph(UNIT_EDGE), 2.0**-6)
        assert mesh.n_intervals[0] == 64

    def test_ceiling(self):
        mesh = build_mesh(build_graph([(0, 1, 2.0)]), 0.3)
        assert mesh.n_intervals[0] == 7
        assert mesh.spacing[0] == pytest.approx(2.0 / 7.0)

    def test_floor_at_two(self):
        mesh = build_mesh(build_graph(UNIT_EDGE), 10.0)
        assert mesh.n_intervals[0] == 2

    def test_per_edge_counts(self):
        g = build_graph(TWO_PATH)
        mesh = build_mesh(g, [4, 8])
        assert list(mesh.n_intervals) == [4, 8]
        assert mesh.h_max == 0.25

    def test_counts_below_two_rejected(self):
        with pytest.raises(ConfigError):
            build_mesh(build_graph(TWO_PATH), [4, 1])

    def test_dof_counts(self):
        g = build_graph(THREE_STAR)
        dm = build_dofmap(g, build_mesh(g, 0.25))
        assert dm.ndof == 3 * 3 + 4
        assert dm.vertex_block_start == 9


class TestAssembly:
    """Closed-form hat integrals on the unit edge with n_e = 2, c = p = 1:
    interior diagonal 2/h + 2h/3 = 13/3, coupling -1/h + h/6 = -23/12,
    degree-one vertex diagonal 1/h + h/3 = 13/6."""

    @pytest.fixture()
    def single_edge_system(self):
        problem = make_problem(build_graph(UNIT_EDGE), 0.5)
        return assemble(problem)

    def test_entry_values(self, single_edge_system):
        a = single_edge_system.matrix.toarray()
        # dof order: [interior x1, vertex 0, vertex 1]
        assert a[0, 0] == pytest.approx(13.0 / 3.0, abs=1e-14)
        assert a[0, 1] == pytest.approx(-23.0 / 12.0, abs=1e-14)
        assert a[0, 2] == pytest.approx(-23.0 / 12.0, abs=1e-14)
        assert a[1, 1] == pytest.approx(13.0 / 6.0, abs=1e-14)
        assert a[1, 2] == 0.0

    def test_load_values(self, single_edge_system):
        np.testing.assert_allclose(single_edge_system.rhs, [0.5, 0.25, 0.25], atol=1e-15)

    def test_degree2_vertex_diagonal(self):
        system = assemble(make_problem(build_graph(TWO_PATH), 0.5))
        a = system.matrix.toarray()
        v1 = system.dofmap.vertex_dof(1)
        assert a[v1, v1] == pytest.approx(2 * 13.0 / 6.0, abs=1e-14)

    def test_exact_symmetry(self):
        problem = make_problem(dgm(2), 0.25, c="1+x/2", p="1+x^2", f="sin(pi*x)")
        a = assemble(problem).matrix
        diff = (a - a.T).tocoo()
        assert diff.nnz == 0 or np.abs(diff.data).max() == 0.0

    def test_positive_definite_probes(self):
        problem = make_problem(dgm(2), 0.25, c="1+x/2", p="1+x^2")
        a = assemble(problem).matrix
        rng = np.random.default_rng(0)
        for _ in range(20):
            v = rng.standard_normal(a.shape[0])
            assert v @ (a @ v) > 0.0

    def test_sparsity_bounds(self):
        g = barabasi_albert(30, 2, seed=1)
        system = assemble(make_problem(g, 0.25))
        nnz_per_row = np.diff(system.matrix.indptr)
        vb = system.vertex_block_start
        assert (nnz_per_row[:vb] <= 3).all()
        for v in range(g.n):
            assert nnz_per_row[vb + v] <= 2 * g.degrees[v] + 1

    def test_coefficient_positivity_enforced(self):
        with pytest.raises(CoefficientError):
            assemble(make_problem(build_graph(UNIT_EDGE), 0.25, p="x-1"))
        with pytest.raises(CoefficientError):
            assemble(make_problem(build_graph(UNIT_EDGE), 0.25, c="cos(pi*x)"))

    def test_nan_coefficient_rejected(self):
        with pytest.raises(CoefficientError):
            assemble(make_problem(build_graph(UNIT_EDGE), 0.25, f="x/(x-x)"))

    def test_per_edge_coefficients(self):
        problem = make_problem(
            build_graph(TWO_PATH), 0.5, c={"default": "1", "1": "2"}
        )
        a = assemble(problem).matrix.toarray()
        b = assemble(make_problem(build_graph(TWO_PATH), 0.5)).matrix.toarray()
        # stiffness doubled on edge 1 only: its interior diagonal gains 2/h
        assert a[1, 1] == pytest.approx(b[1, 1] + 2.0 / 0.5, abs=1e-13)
        assert a[0, 0] == pytest.approx(b[0, 0], abs=1e-14)


class TestDirectSolve:
    def test_hand_inverse_2x2(self):
        a = sp.csr_matrix(np.array([[4.0, 1.0], [1.0, 3.0]]))
        x = direct_solve(a, np.array([1.0, 0.0]))
        np.testing.assert_allclose(x, [3.0 / 11.0, -1.0 / 11.0], atol=1e-14)

    def test_constants_reproduced(self):
        for edges in (UNIT_EDGE, TWO_PATH, THREE_STAR):
            system = assemble(make_problem(build_graph(edges), 0.25, p="3", f="3"))
            u = solve_direct(system)
            np.testing.assert_allclose(u, 1.0, atol=1e-12)

    def test_constants_on_generated_graphs(self):
        for g in (dgm(3), barabasi_albert(40, 2, seed=2)):
            u = solve_direct(assemble(make_problem(g, 0.25)))
            np.testing.assert_allclose(u, 1.0, atol=1e-12)

    def test_single_edge_against_dense_oracle(self):
        # hand-assembled 3x3 (dofs [x1, v0, v1]) with f(x) = x:
        # interior load h*x1 = 1/4, origin half-hat h^2/6 = 1/24,
        # terminal half-hat = 5/24
        a = np.array(
            [
                [13.0 / 3.0, -23.0 / 12.0, -23.0 / 12.0],
                [-23.0 / 12.0, 13.0 / 6.0, 0.0],
                [-23.0 / 12.0, 0.0, 13.0 / 6.0],
            ]
        )
        f = np.array([0.25, 1.0 / 24.0, 5.0 / 24.0])
        expected = np.linalg.solve(a, f)
        system = assemble(make_problem(build_graph(UNIT_EDGE), 0.5, f="x"))
        np.testing.assert_allclose(system.rhs, f, atol=1e-15)
        np.testing.assert_allclose(solve_direct(system), expected, atol=1e-13)

    def test_residual_small(self):
        system = assemble(make_problem(dgm(3), 2.0**-4, f="sin(pi*x)"))
        u = solve_direct(system)
        r = system.rhs - system.matrix @ u
        assert np.linalg.norm(r) <= 1e-12 * np.linalg.norm(system.rhs)

    def test_singular_matrix_reported(self):
        a = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
        with pytest.raises(NonSPDError):
            direct_solve(a, np.array([1.0, 0.0]))


class TestErrorNorms:
    def test_interpolant_of_itself(self):
        problem = make_problem(build_graph(THREE_STAR), 0.25)
        u = interpolate(problem, "x")
        l2, h1 = error_norms(problem, u, "x")
        assert l2 < 1e-14
        assert h1 < 1e-14

    def test_constant_exact(self):
        problem = make_problem(build_graph(TWO_PATH), 0.25, f="1")
        u = solve_direct(assemble(problem))
        l2, h1 = error_norms(problem, u, "1")
        assert l2 < 1e-12 and h1 < 1e-12

    def test_halving_ratios_on_star(self):
        # u = cos(pi x) outward from the hub satisfies the vertex conditions;
        # the matching load under c = p = 1 is (pi^2+1) cos(pi x)
        g = build_graph(THREE_STAR)
        errs = []
        for level in (4, 5):
            problem = make_problem(g, 2.0**-level, f="(pi^2+1)*cos(pi*x)")
            u = solve_direct(assemble(problem))
            errs.append(error_norms(problem, u, "cos(pi*x)"))
        l2_ratio = errs[0][0] / errs[1][0]
        h1_ratio = errs[0][1] / errs[1][1]
        assert l2_ratio == pytest.approx(4.0, rel=0.15)
        assert h1_ratio == pytest.approx(2.0, rel=0.15)

    def test_single_edge_neumann_interval(self):
        g = build_graph(UNIT_EDGE)
        errs = []
        for level in (4, 5):
            problem = make_problem(g, 2.0**-level, f="(pi^2+1)*cos(pi*x)")
            u = solve_direct(assemble(problem))
            errs.append(error_norms(problem, u, "cos(pi*x)"))
        assert errs[0][0] / errs[1][0] == pytest.approx(4.0, rel=0.15)
        assert errs[0][1] / errs[1][1] == pytest.approx(2.0, rel=0.15)

    def test_abs_falls_back_to_finite_differences(self):
        problem = make_problem(build_graph(UNIT_EDGE), 0.25)
        u = interpolate(problem, "abs(x)")
        l2, h1 = error_norms(problem, u, "abs(x)")
        assert l2 < 1e-12
        assert h1 < 1e-5  # finite differences limit the achievable accuracy
