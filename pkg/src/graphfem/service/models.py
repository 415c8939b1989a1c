"""Request/response models of the HTTP service."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

Prec = Literal["none", "diag", "poly", "nn"]
Solver = Literal["bicgstab", "pcg", "richardson"]


class EdgeModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    origin: int = Field(alias="from")
    to: int
    length: float = 1.0


class GraphModel(BaseModel):
    vertices: int
    edges: list[EdgeModel]
    meta: dict[str, Any] | None = None


class GenerateRequest(BaseModel):
    family: Literal["dgm", "ba"]
    level: int | None = None
    n: int | None = None
    m_attach: int = 2
    seed: int = 0


class ProblemConfig(BaseModel):
    """Mirrors the problem-config JSON schema (inline graph or generator)."""

    graph: GraphModel | None = None
    generate: GenerateRequest | None = None
    target_h: float | None = None
    log2_inv_h: int | None = None
    c: str | dict[str, str] = "1"
    p: str | dict[str, str] = "1"
    f: str | dict[str, str] = "1"
    exact: str | dict[str, str] | None = None

    def core_dict(self) -> dict:
        d = self.model_dump(by_alias=True, exclude_none=True)
        d.pop("exact", None)
        return d


class SolveOptions(BaseModel):
    method: Literal["schur", "direct"] = "schur"
    prec: Prec = "nn"
    solver: Solver = "bicgstab"
    tol: float | None = None
    maxit: int = 10000
    theta: float = 0.5
    nn_scaled: bool = True
    include_solution: bool = False
    dump_system: str | None = None  # MatrixMarket path, written server-side
    dump_schur: str | None = None  # path prefix for dense S / reduced rhs


class SolveRequest(BaseModel):
    problem: ProblemConfig
    options: SolveOptions = SolveOptions()


class ReportModel(BaseModel):
    solver: str
    preconditioner: str
    iterations: int
    converged: bool
    residuals: list[float]
    wall_seconds: float
    matvec_count: int
    precond_apply_count: int
    setup_seconds: float = 0.0


class SolveResponse(BaseModel):
    n_dof: int
    interface_dim: int
    report: ReportModel
    solution: list[float] | None = None
    l2_error: float | None = None
    h1_error: float | None = None


class GenerateResponse(BaseModel):
    graph: GraphModel


class FamilySpec(BaseModel):
    family: Literal["dgm", "ba"]
    params: list[int]


class BenchRequest(BaseModel):
    families: list[FamilySpec]
    levels: list[int]
    precs: list[Prec] = ["none", "diag", "poly", "nn"]
    solver: Solver = "bicgstab"
    c: str = "1"
    p: str = "1"
    f: str = "1"
    seed: int = 0
    tol: float | None = None
    maxit: int = 10000
    theta: float = 0.5


class BenchRow(BaseModel):
    family: str
    param: int
    n_vertices: int
    n_edges: int
    log2_inv_h: int
    prec: str
    solver: str
    iters: int
    converged: bool
    seconds: float
    matvecs: int


class BenchResponse(BaseModel):
    columns: list[str]
    rows: list[BenchRow]
    coefficients: dict[str, str]
    seed: int


class ConvergenceRequest(BaseModel):
    problem: ProblemConfig
    levels: list[int]


class ConvergenceRow(BaseModel):
    log2_inv_h: int
    h_max: float
    l2_error: float
    h1_error: float


class ConvergenceResponse(BaseModel):
    rows: list[ConvergenceRow]
    l2_order: float | None
    h1_order: float | None


class CondRequest(BaseModel):
    problem: ProblemConfig
    levels: list[int]


class CondRow(BaseModel):
    log2_inv_h: int
    interface_dim: int
    lam_min: float
    lam_max: float
    kappa: float


class CondResponse(BaseModel):
    rows: list[CondRow]


class HealthResponse(BaseModel):
    status: str
    version: str
