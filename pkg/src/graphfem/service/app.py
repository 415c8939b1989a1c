"""HTTP service wrapping the solver workflows.

Error mapping: invalid input (graph validation, expression syntax, config
shape) answers 400; numerical failures (breakdowns, divergence, singular
factorizations) answer 500 with a structured detail.  Run with
``uvicorn graphfem.service.app:app`` or through ``graphfem serve``.
"""

from __future__ import annotations

import math

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, studies
from ..configio import generate_graph, graph_from_config, problem_from_config
from ..driver import solve_problem
from ..expr import ExprError
from ..fem import (
    CoefficientError,
    ConfigError,
    NonSPDError,
    dump_matrix_market,
    error_norms,
)
from ..graphs import GraphValidationError, PartitionValidationError, graph_to_dict
from ..krylov import DEFAULT_TOL, IterationError
from ..preconditioners import PreconditionerError
from . import models

_BAD_INPUT = (
    ConfigError,
    CoefficientError,
    ExprError,
    GraphValidationError,
    PartitionValidationError,
    PreconditionerError,
    ValueError,
)
_NUMERICAL = (IterationError, NonSPDError)


def _nan_to_none(x: float) -> float | None:
    return None if x is None or math.isnan(x) else x


def create_app() -> FastAPI:
    app = FastAPI(title="graphfem", version=__version__)

    async def _numerical(request: Request, exc: Exception):
        return JSONResponse(
            status_code=500,
            content={"detail": str(exc), "kind": "numerical-failure"},
        )

    async def _bad_input(request: Request, exc: Exception):
        return JSONResponse(
            status_code=400,
            content={"detail": str(exc), "kind": "invalid-input"},
        )

    # numerical classes first so their handlers win the MRO lookup over the
    # broad ValueError mapping
    for cls in _NUMERICAL:
        app.add_exception_handler(cls, _numerical)
    for cls in _BAD_INPUT:
        app.add_exception_handler(cls, _bad_input)

    @app.get("/health", response_model=models.HealthResponse)
    def health():
        return models.HealthResponse(status="ok", version=__version__)

    @app.post("/generate", response_model=models.GenerateResponse)
    def generate(req: models.GenerateRequest):
        g = generate_graph(req.family, level=req.level, n=req.n,
                           m_attach=req.m_attach, seed=req.seed)
        return models.GenerateResponse(graph=models.GraphModel(**graph_to_dict(g)))

    @app.post("/solve", response_model=models.SolveResponse, response_model_exclude_none=True)
    def solve(req: models.SolveRequest):
        cfg = req.problem.core_dict()
        problem = problem_from_config(cfg)
        opts = req.options
        tol = opts.tol if opts.tol is not None else DEFAULT_TOL
        res = solve_problem(
            problem,
            method=opts.method,
            prec=opts.prec,
            solver=opts.solver,
            tol=tol,
            maxit=opts.maxit,
            theta=opts.theta,
            nn_scaled=opts.nn_scaled,
        )
        if opts.dump_system and res.system is not None:
            dump_matrix_market(res.system.matrix, opts.dump_system)
        if opts.dump_schur and res.operator is not None and res.operator.d:
            if res.operator.d > 1000:
                raise ConfigError("dense interface dump limited to dimension 1000")
            dump_matrix_market(res.operator.dense(), f"{opts.dump_schur}_schur.mtx")
            dump_matrix_market(
                res.operator.rhs().reshape(-1, 1), f"{opts.dump_schur}_rhs.mtx"
            )

        l2 = h1 = None
        if req.problem.exact is not None:
            l2, h1 = error_norms(problem, res.u, req.problem.exact)
        report = models.ReportModel(**res.report.to_dict(), setup_seconds=res.setup_seconds)
        return models.SolveResponse(
            n_dof=res.u.shape[0],
            interface_dim=res.operator.d if res.operator is not None else 0,
            report=report,
            solution=list(res.u) if opts.include_solution else None,
            l2_error=l2,
            h1_error=h1,
        )

    @app.post("/bench", response_model=models.BenchResponse)
    def bench(req: models.BenchRequest):
        spec = studies.BenchSpec(
            families=[(fs.family, fs.params) for fs in req.families],
            levels=req.levels,
            precs=list(req.precs),
            solver=req.solver,
            c=req.c, p=req.p, f=req.f,
            seed=req.seed,
            tol=req.tol if req.tol is not None else DEFAULT_TOL,
            maxit=req.maxit,
            theta=req.theta,
        )
        rows = studies.run_bench(spec)
        return models.BenchResponse(
            columns=list(studies.BENCH_COLUMNS),
            rows=[models.BenchRow(**r) for r in rows],
            coefficients={"c": req.c, "p": req.p, "f": req.f},
            seed=req.seed,
        )

    @app.post("/convergence", response_model=models.ConvergenceResponse)
    def convergence(req: models.ConvergenceRequest):
        if req.problem.exact is None:
            raise ConfigError("convergence study needs an 'exact' expression")
        cfg = req.problem.core_dict()
        g = graph_from_config(cfg)
        rows, l2_order, h1_order = studies.run_convergence(
            g, req.levels,
            c=cfg.get("c", "1"), p=cfg.get("p", "1"), f=cfg.get("f", "1"),
            exact=req.problem.exact,
        )
        return models.ConvergenceResponse(
            rows=[models.ConvergenceRow(**r) for r in rows],
            l2_order=_nan_to_none(l2_order),
            h1_order=_nan_to_none(h1_order),
        )

    @app.post("/cond", response_model=models.CondResponse)
    def cond(req: models.CondRequest):
        cfg = req.problem.core_dict()
        g = graph_from_config(cfg)
        rows = studies.run_condition(
            g, req.levels,
            c=cfg.get("c", "1"), p=cfg.get("p", "1"), f=cfg.get("f", "1"),
        )
        return models.CondResponse(rows=[models.CondRow(**r) for r in rows])

    return app


app = create_app()
