"""Finite element solver for elliptic equations on metric graphs.

Core layers: graph model and generators, expression parsing, FEM assembly,
interface substructuring with four preconditioners, and matrix-free
iterative solvers.  A FastAPI service (``graphfem.service``) exposes the
workflows over HTTP; the ``graphfem`` CLI is a thin client of that service.
"""

from .expr import evaluate, parse, to_string
from .fem import (
    DofMap,
    Mesh,
    Problem,
    SparseSystem,
    assemble,
    build_mesh,
    error_norms,
    make_problem,
    solve_direct,
)
from .graphs import (
    MetricGraph,
    Partition,
    barabasi_albert,
    build_graph,
    dgm,
    load_graph,
    partition_by_edges,
    save_graph,
    validate_partition,
)
from .krylov import (
    DEFAULT_TOL,
    SolveReport,
    StoppingRule,
    bicgstab,
    cond_estimate,
    pcg,
    richardson,
)
from .preconditioners import Preconditioner, nn_richardson_step, setup
from .substructuring import LocalSystem, SchurOperator, build_local, local_schur_dense
from .driver import SolveResult, solve_problem

__version__ = "0.1.0"
