"""Acceptance suite: one test per release criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
PASS/FAIL lines.  Criteria 5 and 6 compare BiCGSTAB iteration counts against
reference values for the per-edge decomposition; those references were
tabulated with a nondegenerate load and an effectively near-machine-precision
stopping threshold, so the experiments here use a seeded per-edge random
constant load and tolerance 1e-13 (a constant load makes the interface
solution constant, which collapses the counts).
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest
import scipy.linalg as sla

import graphfem.preconditioners as pc
from graphfem import krylov
from graphfem.driver import fit_order, solve_problem
from graphfem.fem import assemble, error_norms, make_problem, solve_direct
from graphfem.graphs import barabasi_albert, build_graph, dgm
from graphfem.krylov import StoppingRule, bicgstab, cond_estimate, richardson
from graphfem.substructuring import SchurOperator, dense_schur_oracle

UNIT_EDGE = [(0, 1, 1.0)]
TWO_PATH = [(0, 1, 1.0), (1, 2, 1.0)]
THREE_STAR = [(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]


def acceptance_graphs():
    return [
        ("single-edge", build_graph(UNIT_EDGE)),
        ("two-path", build_graph(TWO_PATH)),
        ("three-star", build_graph(THREE_STAR)),
        ("dgm(3)", dgm(3)),
        ("ba(50,2)", barabasi_albert(50, 2, seed=11)),
    ]


def edge_random_load(g, seed=0, lo=0.5, hi=1.5):
    """Per-edge constant load with seeded amplitudes; breaks the symmetry
    that a globally constant load would impose on the interface solution."""
    rng = np.random.default_rng(seed)
    return {str(e): repr(round(float(w), 6)) for e, w in enumerate(rng.uniform(lo, hi, g.m))}


@contextmanager
def criterion(num: int, label: str):
    started = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"criterion {num:02d} FAIL  {label}")
        raise
    print(f"criterion {num:02d} PASS  {label}  ({time.perf_counter() - started:.1f}s)")


def test_criterion_01_schur_path_matches_direct_solve():
    with criterion(1, "interface path equals direct solve to 1e-8 on five graphs"):
        started = time.perf_counter()
        for name, g in acceptance_graphs():
            problem = make_problem(g, 2.0**-4, c="1+x/2", p="1+x^2", f="sin(pi*x)+x")
            direct = solve_direct(assemble(problem))
            res = solve_problem(problem, method="schur", prec="nn", tol=1e-11)
            assert res.report.converged, name
            err = np.linalg.norm(res.u - direct) / np.linalg.norm(direct)
            assert err <= 1e-8, f"{name}: relative gap {err:.2e}"
        assert time.perf_counter() - started < 10.0


def test_criterion_02_constant_reproduction_all_preconditioners():
    with criterion(2, "p=1, f=1 reproduces u=1 to 1e-10 under every preconditioner"):
        for name, g in acceptance_graphs():
            problem = make_problem(g, 2.0**-4)
            for prec in pc.VARIANTS:
                res = solve_problem(problem, prec=prec, tol=1e-13, maxit=2000)
                assert res.report.converged, (name, prec)
                gap = np.abs(res.u - 1.0).max()
                assert gap <= 1e-10, f"{name}/{prec}: max deviation {gap:.2e}"


def test_criterion_03_convergence_orders():
    with criterion(3, "L2 order in [1.9, 2.1] and H1 order in [0.9, 1.1] on the star"):
        started = time.perf_counter()
        g = build_graph(THREE_STAR)
        hs, l2s, h1s = [], [], []
        for level in range(3, 9):
            problem = make_problem(g, 2.0**-level, f="(pi^2+1)*cos(pi*x)")
            u = solve_direct(assemble(problem))
            l2, h1 = error_norms(problem, u, "cos(pi*x)")
            hs.append(problem.mesh.h_max)
            l2s.append(l2)
            h1s.append(h1)
        l2_order = fit_order(hs, l2s)
        h1_order = fit_order(hs, h1s)
        assert 1.9 <= l2_order <= 2.1, f"L2 order {l2_order:.3f}"
        assert 0.9 <= h1_order <= 1.1, f"H1 order {h1_order:.3f}"
        assert time.perf_counter() - started < 30.0


def test_criterion_04_interface_conditioning_mesh_independent():
    with criterion(4, "kappa(S) varies by < 1.5x across mesh levels 4..10"):
        started = time.perf_counter()
        for name, g in (("dgm(4)", dgm(4)), ("ba(100,2)", barabasi_albert(100, 2, seed=0))):
            kappas = []
            for level in (4, 6, 8, 10):
                op = SchurOperator(make_problem(g, 2.0**-level))
                s = op.dense()
                cho = sla.cho_factor(s)
                _, _, kappa = cond_estimate(
                    s, lambda v: sla.cho_solve(cho, v), op.d, tol=1e-3
                )
                kappas.append(kappa)
            spread = max(kappas) / min(kappas)
            assert spread < 1.5, f"{name}: kappa spread {spread:.3f} over {kappas}"
        assert time.perf_counter() - started < 120.0


def test_criterion_05_nn_iterations_mesh_independent():
    with criterion(5, "NN-preconditioned iteration count constant under refinement"):
        started = time.perf_counter()
        g = dgm(5)
        load = edge_random_load(g)
        counts = []
        for level in (4, 6, 8, 10):
            op = SchurOperator(make_problem(g, 2.0**-level, f=load))
            prec = pc.setup("nn", op)
            _, rep = bicgstab(op, op.rhs(), prec=prec, rule=StoppingRule(1e-13, 10000))
            assert rep.converged
            counts.append(rep.iterations)
        assert max(counts) - min(counts) <= 2, f"counts {counts}"
        assert time.perf_counter() - started < 120.0


# reference BiCGSTAB iteration counts (none, diag, poly, nn) for the
# per-edge decomposition at mesh level 6; matched within +-50%
EXPECTED_ITERATIONS = {
    5: (25, 8, 7, 7),
    6: (42, 11, 9, 9),
    7: (86, 15, 11, 11),
}


def test_criterion_06_preconditioner_ranking_and_counts():
    with criterion(6, "iteration ranking none > diag >= poly >= nn, counts within 50%"):
        started = time.perf_counter()
        for level_g, expected in EXPECTED_ITERATIONS.items():
            g = dgm(level_g)
            problem = make_problem(g, 2.0**-6, f=edge_random_load(g))
            op = SchurOperator(problem)
            rhs = op.rhs()
            counts = []
            for variant in ("none", "diag", "poly", "nn"):
                prec = pc.setup(variant, op)
                _, rep = bicgstab(op, rhs, prec=prec, rule=StoppingRule(1e-13, 10000))
                assert rep.converged, (level_g, variant)
                counts.append(rep.iterations)
            none_it, diag_it, poly_it, nn_it = counts
            assert none_it > diag_it >= poly_it >= nn_it, f"dgm({level_g}): {counts}"
            for got, ref in zip(counts, expected):
                assert abs(got - ref) <= 0.5 * ref, (
                    f"dgm({level_g}): got {counts}, expected {expected} within 50%"
                )
        assert time.perf_counter() - started < 300.0


def test_criterion_07_subassembly_identities():
    with criterion(7, "S and the reduced rhs subassemble from local contributions"):
        cases = [
            (build_graph(TWO_PATH), {}),
            (build_graph(THREE_STAR), {"c": "1+x/2"}),
            (dgm(2), {}),
            (dgm(3), {"f": "x"}),
            (barabasi_albert(30, 2, seed=4), {"p": "2"}),
        ]
        for g, coeffs in cases:
            problem = make_problem(g, 2.0**-3, **coeffs)
            system = assemble(problem)
            op = SchurOperator(problem, system=system)
            assert op.d <= 200
            s_oracle, g_oracle = dense_schur_oracle(system, op.gamma_dofs)
            assert np.abs(op.dense() - s_oracle).max() <= 1e-12
            assert np.abs(op.rhs() - g_oracle).max() <= 1e-12


def test_criterion_08_energy_identity_and_minimization():
    with criterion(8, "harmonic extension energy equals the interface quadratic form"):
        op = SchurOperator(make_problem(dgm(3), 2.0**-3))
        rng = np.random.default_rng(123)
        for _ in range(100):
            ug = rng.standard_normal(op.d)
            u = op.extend(ug)
            energy = op.energy(u)
            s_form = float(ug @ op.apply(ug))
            assert abs(energy - s_form) <= 1e-10 * max(1.0, abs(s_form))
            w = rng.standard_normal(op.system.ndof) * rng.choice([1e-6, 1.0])
            w[op.gamma_dofs] = 0.0
            assert op.energy(u + w) >= energy - 1e-12 * max(1.0, energy)


def test_criterion_09_exact_preconditioner_one_step():
    with criterion(9, "scaled NN Richardson solves the symmetric path in one step"):
        op = SchurOperator(make_problem(build_graph(TWO_PATH), 2.0**-4))
        prec = pc.setup("nn", op)
        _, rep = richardson(op, op.rhs(), prec=prec, theta=1.0)
        assert rep.converged
        assert rep.iterations == 1


def test_criterion_10_cost_profile_at_scale():
    with criterion(10, "NN iteration cost <= 3x plain, diag probing dominates NN setup"):
        op = SchurOperator(make_problem(dgm(8), 2.0**-6))
        rng = np.random.default_rng(5)
        x = rng.standard_normal(op.d)

        def median_seconds(fn, repeats=5):
            times = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                fn(x)
                times.append(time.perf_counter() - t0)
            return float(np.median(times))

        t_matvec = median_seconds(op.apply)
        nn = pc.setup("nn", op)
        t_apply = median_seconds(nn.apply)
        # one plain iteration: 2 matvecs; one NN iteration: 2 matvecs + 2 applies
        ratio = (t_matvec + t_apply) / t_matvec
        assert ratio <= 3.0, f"per-iteration cost ratio {ratio:.2f}"

        diag = pc.setup("diag", op)
        assert diag.setup_seconds > nn.setup_seconds, (
            f"diag probing {diag.setup_seconds:.4f}s vs nn {nn.setup_seconds:.6f}s"
        )
