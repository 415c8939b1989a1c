"""Benchmark sweeps, convergence studies, and conditioning studies.

Every function returns plain row dicts so callers (HTTP service, CLI) can
render CSV or tables.  Benchmark rows follow the fixed schema

    family,param,n_vertices,n_edges,log2_inv_h,prec,solver,iters,converged,seconds,matvecs

where ``seconds`` covers preconditioner setup plus the iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from . import krylov
from .driver import fit_order, solve_problem
from .fem import ConfigError, build_mesh, make_problem, error_norms
from .graphs import MetricGraph
from .configio import generate_graph
from .krylov import cond_estimate
from .substructuring import SchurOperator

BENCH_COLUMNS = (
    "family", "param", "n_vertices", "n_edges", "log2_inv_h",
    "prec", "solver", "iters", "converged", "seconds", "matvecs",
)

CONVERGENCE_COLUMNS = ("log2_inv_h", "h_max", "l2_error", "h1_error")

COND_COLUMNS = ("log2_inv_h", "interface_dim", "lam_min", "lam_max", "kappa")


@dataclass
class BenchSpec:
    """Experiment grid: graphs x mesh levels x preconditioners."""

    families: list[tuple[str, list[int]]]  # ("dgm", [5, 6]) or ("ba", [100, 500])
    levels: list[int]
    precs: list[str] = field(default_factory=lambda: ["none", "diag", "poly", "nn"])
    solver: str = "bicgstab"
    c: str = "1"
    p: str = "1"
    f: str = "1"
    seed: int = 0
    tol: float = krylov.DEFAULT_TOL
    maxit: int = 10000
    theta: float = 0.5

    def validate(self) -> None:
        if not self.families or any(not params for _, params in self.families):
            raise ConfigError("bench spec needs at least one graph family with parameters")
        if not self.levels:
            raise ConfigError("bench spec needs at least one mesh level")
        if not self.precs:
            raise ConfigError("bench spec needs at least one preconditioner")


def _bench_graph(family: str, param: int, seed: int) -> MetricGraph:
    if family == "dgm":
        return generate_graph("dgm", level=param)
    if family == "ba":
        return generate_graph("ba", n=param, m_attach=2, seed=seed)
    raise ConfigError(f"unknown bench family {family!r}")


def run_bench(spec: BenchSpec) -> list[dict]:
    spec.validate()
    rows: list[dict] = []
    for family, params in spec.families:
        for param in params:
            g = _bench_graph(family, param, spec.seed)
            for level in spec.levels:
                problem = make_problem(g, build_mesh(g, 2.0 ** (-level)),
                                       c=spec.c, p=spec.p, f=spec.f)
                operator = SchurOperator(problem)
                for prec in spec.precs:
                    row = {
                        "family": family, "param": param,
                        "n_vertices": g.n, "n_edges": g.m, "log2_inv_h": level,
                        "prec": prec, "solver": spec.solver,
                    }
                    try:
                        res = solve_problem(
                            problem, method="schur", prec=prec, solver=spec.solver,
                            tol=spec.tol, maxit=spec.maxit, theta=spec.theta,
                            operator=operator,
                        )
                        row.update(
                            iters=res.report.iterations,
                            converged=res.report.converged,
                            seconds=round(res.setup_seconds + res.report.wall_seconds, 4),
                            matvecs=res.report.matvec_count,
                        )
                    except krylov.IterationError:
                        row.update(iters=-1, converged=False, seconds=-1.0, matvecs=-1)
                    rows.append(row)
    return rows


def run_convergence(graph: MetricGraph, levels: list[int], *, c="1", p="1", f="1",
                    exact=None) -> tuple[list[dict], float, float]:
    """Direct solves over mesh levels; returns rows and fitted L2/H1 orders.

    Orders come out as nan when the errors sit at rounding level (for
    example for an exactly representable solution).
    """
    if exact is None:
        raise ConfigError("convergence study needs an 'exact' expression")
    if not levels:
        raise ConfigError("convergence study needs mesh levels")
    rows = []
    hs, l2s, h1s = [], [], []
    for level in levels:
        problem = make_problem(graph, build_mesh(graph, 2.0 ** (-level)), c=c, p=p, f=f)
        res = solve_problem(problem, method="direct")
        l2, h1 = error_norms(problem, res.u, exact)
        h = problem.mesh.h_max
        rows.append({"log2_inv_h": level, "h_max": h, "l2_error": l2, "h1_error": h1})
        hs.append(h)
        l2s.append(l2)
        h1s.append(h1)
    rounding = 1e-12
    l2_order = fit_order(hs, l2s) if max(l2s) > rounding else float("nan")
    h1_order = fit_order(hs, h1s) if max(h1s) > rounding else float("nan")
    return rows, l2_order, h1_order


def run_condition(graph: MetricGraph, levels: list[int], *, c="1", p="1", f="1",
                  tol: float = 1e-3, max_dim: int = 1000) -> list[dict]:
    """Condition number of the interface operator per mesh level.

    The operator is probed into a dense matrix (the interface dimension does
    not grow under refinement), factorized once, and its extreme eigenvalues
    estimated by forward/inverse power iteration.
    """
    if not levels:
        raise ConfigError("conditioning study needs mesh levels")
    rows = []
    for level in levels:
        problem = make_problem(graph, build_mesh(graph, 2.0 ** (-level)), c=c, p=p, f=f)
        op = SchurOperator(problem)
        if op.d == 0:
            raise ConfigError("graph has an empty interface; nothing to condition")
        if op.d > max_dim:
            raise ConfigError(f"interface dimension {op.d} exceeds dense limit {max_dim}")
        s = op.dense()
        cho = sla.cho_factor(s)
        lam_max, lam_min, kappa = cond_estimate(
            lambda v: s @ v, lambda v: sla.cho_solve(cho, v), op.d, tol=tol
        )
        rows.append({
            "log2_inv_h": level, "interface_dim": op.d,
            "lam_min": lam_min, "lam_max": lam_max, "kappa": kappa,
        })
    return rows
