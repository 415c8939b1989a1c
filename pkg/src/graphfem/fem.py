"""Finite elements on metric graphs.

Each edge is split into ``n_e >= 2`` equal intervals.  The basis couples the
usual interior hat functions per edge with one vertex-centred hat per vertex,
whose support reaches one cell into every incident edge; this makes the
discrete functions continuous across vertices without constraint rows.
Unknowns are ordered edge interiors first, then vertices, so the matrix has
the block form ``[A_EE, A_EV; A_VE, A_VV]``.

The bilinear form is ``(u, v) -> sum_e int c u' v' + int p u v`` with
``c > 0`` and ``p >= p0 > 0`` checked at the quadrature points; both checks
guard positive definiteness of the assembled matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import expr as ex
from .graphs import MetricGraph


class ConfigError(ValueError):
    """Malformed problem description (bad coefficients, missing keys)."""


class CoefficientError(ValueError):
    """A coefficient violates positivity at a quadrature point."""


class NonSPDError(ValueError):
    """Direct factorization broke down; the system is not SPD."""


# 2-point Gauss rule on [0, 1]: exact for cubics, hence exact for all
# hat-product integrals with constant coefficients
_XI2 = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])
_W2 = np.array([0.5, 0.5])

# 4-point rule used for error norms only (keeps quadrature error far below
# the discretization error being measured)
_XI4_OFF = math.sqrt(3.0 / 7.0 - 2.0 / 7.0 * math.sqrt(6.0 / 5.0))
_XI4_OFF2 = math.sqrt(3.0 / 7.0 + 2.0 / 7.0 * math.sqrt(6.0 / 5.0))
_XI4 = 0.5 + 0.5 * np.array([-_XI4_OFF2, -_XI4_OFF, _XI4_OFF, _XI4_OFF2])
_W4 = 0.5 * np.array(
    [
        (18.0 - math.sqrt(30.0)) / 36.0,
        (18.0 + math.sqrt(30.0)) / 36.0,
        (18.0 + math.sqrt(30.0)) / 36.0,
        (18.0 - math.sqrt(30.0)) / 36.0,
    ]
)


@dataclass(frozen=True)
class Mesh:
    """Equidistant subdivision of every edge: counts ``n_e`` and spacings."""

    n_intervals: np.ndarray
    spacing: np.ndarray

    @property
    def h_max(self) -> float:
        return float(self.spacing.max())

    @property
    def total_cells(self) -> int:
        return int(self.n_intervals.sum())


def build_mesh(g: MetricGraph, target_h) -> Mesh:
    """Mesh with ``n_e = max(2, ceil(length_e / target_h))`` per edge.

    ``target_h`` may instead be a sequence of per-edge interval counts.
    """
    lengths = g.lengths
    if np.ndim(target_h) == 0:
        h = float(target_h)
        if not h > 0:
            raise ConfigError(f"target_h must be positive, got {h}")
        # tiny slack so that exact multiples do not round up
        counts = np.maximum(2, np.ceil(lengths / h - 1e-9).astype(int))
    else:
        counts = np.asarray(target_h, dtype=int)
        if counts.shape != (g.m,):
            raise ConfigError(f"expected {g.m} per-edge counts, got shape {counts.shape}")
        if (counts < 2).any():
            raise ConfigError("every edge needs at least 2 intervals")
    return Mesh(n_intervals=counts, spacing=lengths / counts)


@dataclass(frozen=True)
class DofMap:
    """Global indices: all edge-interior nodes first, then one per vertex."""

    n_vertices: int
    interior_start: np.ndarray  # length m+1, cumulative interior counts

    @property
    def vertex_block_start(self) -> int:
        return int(self.interior_start[-1])

    @property
    def ndof(self) -> int:
        return self.vertex_block_start + self.n_vertices

    def edge_dof(self, edge: int, j: int) -> int:
        """Global index of interior node ``j`` (1-based) of an edge."""
        return int(self.interior_start[edge]) + j - 1

    def vertex_dof(self, v: int) -> int:
        return self.vertex_block_start + v

    def vertex_dofs(self, vertices) -> np.ndarray:
        return self.vertex_block_start + np.asarray(vertices, dtype=int)


def build_dofmap(g: MetricGraph, mesh: Mesh) -> DofMap:
    interior = np.concatenate(([0], np.cumsum(mesh.n_intervals - 1)))
    return DofMap(n_vertices=g.n_vertices, interior_start=interior)


@dataclass(frozen=True)
class Problem:
    """Coefficients ``c, p, f`` as one parsed expression per edge."""

    graph: MetricGraph
    mesh: Mesh
    c: tuple[ex.Expr, ...]
    p: tuple[ex.Expr, ...]
    f: tuple[ex.Expr, ...]

    @cached_property
    def dofmap(self) -> DofMap:
        return build_dofmap(self.graph, self.mesh)


def resolve_edge_exprs(spec, m: int, name: str) -> tuple[ex.Expr, ...]:
    """Turn a coefficient spec into one expression per edge.

    Accepts a string (applied to every edge), an already-parsed expression,
    a dict ``{"default": str, "<edge id>": str, ...}`` where per-edge entries
    override the default, or a sequence of ``m`` strings.
    """
    if isinstance(spec, str):
        e = ex.parse(spec)
        return tuple([e] * m)
    if isinstance(spec, dict):
        default = spec.get("default")
        default_e = ex.parse(default) if default is not None else None
        out: list[ex.Expr | None] = [default_e] * m
        for key, val in spec.items():
            if key == "default":
                continue
            try:
                idx = int(key)
            except ValueError:
                raise ConfigError(f"{name}: edge key {key!r} is not an integer") from None
            if not 0 <= idx < m:
                raise ConfigError(f"{name}: edge id {idx} out of range 0..{m - 1}")
            out[idx] = ex.parse(val)
        if any(e is None for e in out):
            missing = next(i for i, e in enumerate(out) if e is None)
            raise ConfigError(f"{name}: no expression for edge {missing} and no default")
        return tuple(out)  # type: ignore[arg-type]
    if isinstance(spec, (list, tuple)):
        if len(spec) != m:
            raise ConfigError(f"{name}: expected {m} per-edge expressions, got {len(spec)}")
        return tuple(s if not isinstance(s, str) else ex.parse(s) for s in spec)
    # single pre-parsed expression
    return tuple([spec] * m)


def make_problem(g: MetricGraph, target_h, c="1", p="1", f="1") -> Problem:
    mesh = target_h if isinstance(target_h, Mesh) else build_mesh(g, target_h)
    return Problem(
        graph=g,
        mesh=mesh,
        c=resolve_edge_exprs(c, g.m, "c"),
        p=resolve_edge_exprs(p, g.m, "p"),
        f=resolve_edge_exprs(f, g.m, "f"),
    )


@dataclass
class CellGeometry:
    """Flat per-cell arrays for all edges (cells of edge e are the slice
    ``cell_start[e]:cell_start[e+1]``)."""

    cell_start: np.ndarray
    edge_of_cell: np.ndarray
    h: np.ndarray
    x_left: np.ndarray
    dof_left: np.ndarray
    dof_right: np.ndarray

    def quad_points(self, xi: np.ndarray) -> np.ndarray:
        return self.x_left[:, None] + self.h[:, None] * xi[None, :]

    def quad_weights(self, w: np.ndarray) -> np.ndarray:
        return self.h[:, None] * w[None, :]


def cell_geometry(g: MetricGraph, mesh: Mesh, dofs: DofMap) -> CellGeometry:
    counts = mesh.n_intervals
    m = g.m
    cell_start = np.concatenate(([0], np.cumsum(counts)))
    total = int(cell_start[-1])
    edge_of_cell = np.repeat(np.arange(m), counts)
    h = mesh.spacing[edge_of_cell]
    k = np.arange(total) - cell_start[edge_of_cell]
    x_left = k * h

    origins = np.array([a for a, _, _ in g.edges], dtype=int)
    terminals = np.array([b for _, b, _ in g.edges], dtype=int)
    first_interior = dofs.interior_start[edge_of_cell]
    dof_left = np.where(
        k == 0,
        dofs.vertex_block_start + origins[edge_of_cell],
        first_interior + k - 1,
    )
    dof_right = np.where(
        k == counts[edge_of_cell] - 1,
        dofs.vertex_block_start + terminals[edge_of_cell],
        first_interior + k,
    )
    return CellGeometry(cell_start, edge_of_cell, h, x_left, dof_left, dof_right)


def _eval_edgewise(exprs, xq: np.ndarray, cell_start: np.ndarray) -> np.ndarray:
    first = exprs[0]
    if all(e is first for e in exprs):
        return np.asarray(ex.evaluate(first, xq), dtype=float)
    out = np.empty_like(xq)
    for e in range(len(exprs)):
        sl = slice(cell_start[e], cell_start[e + 1])
        out[sl] = ex.evaluate(exprs[e], xq[sl])
    return out


@dataclass
class SparseSystem:
    """Assembled stiffness matrix and load vector.

    ``vertex_block_start`` marks where the vertex block begins in the dof
    ordering.  The extra fields keep the per-cell contributions so that
    restricted (per-subgraph) matrices can be rebuilt without reassembly.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    vertex_block_start: int
    dofmap: DofMap = field(repr=False)
    geometry: CellGeometry = field(repr=False)
    coo_rows: np.ndarray = field(repr=False)
    coo_cols: np.ndarray = field(repr=False)
    coo_vals: np.ndarray = field(repr=False)
    cell_load: np.ndarray = field(repr=False)  # (cells, 2): left/right hat

    @property
    def ndof(self) -> int:
        return self.rhs.shape[0]


def assemble(problem: Problem) -> SparseSystem:
    """Assemble the global system with 2-point Gauss quadrature per cell."""
    g, mesh = problem.graph, problem.mesh
    dofs = problem.dofmap
    geo = cell_geometry(g, mesh, dofs)

    xq = geo.quad_points(_XI2)
    wq = geo.quad_weights(_W2)
    cvals = _eval_edgewise(problem.c, xq, geo.cell_start)
    pvals = _eval_edgewise(problem.p, xq, geo.cell_start)
    fvals = _eval_edgewise(problem.f, xq, geo.cell_start)
    _check_coefficients(cvals, pvals, fvals, geo, xq)

    nl = 1.0 - _XI2
    nr = _XI2
    h = geo.h
    k_int = (wq * cvals).sum(axis=1) / (h * h)
    m_ll = (wq * pvals * (nl * nl)[None, :]).sum(axis=1)
    m_lr = (wq * pvals * (nl * nr)[None, :]).sum(axis=1)
    m_rr = (wq * pvals * (nr * nr)[None, :]).sum(axis=1)
    f_l = (wq * fvals * nl[None, :]).sum(axis=1)
    f_r = (wq * fvals * nr[None, :]).sum(axis=1)

    dl, dr = geo.dof_left, geo.dof_right
    rows = np.concatenate([dl, dl, dr, dr])
    cols = np.concatenate([dl, dr, dl, dr])
    vals = np.concatenate([k_int + m_ll, -k_int + m_lr, -k_int + m_lr, k_int + m_rr])

    ndof = dofs.ndof
    matrix = sp.coo_matrix((vals, (rows, cols)), shape=(ndof, ndof)).tocsr()
    rhs = np.zeros(ndof)
    np.add.at(rhs, dl, f_l)
    np.add.at(rhs, dr, f_r)

    return SparseSystem(
        matrix=matrix,
        rhs=rhs,
        vertex_block_start=dofs.vertex_block_start,
        dofmap=dofs,
        geometry=geo,
        coo_rows=rows,
        coo_cols=cols,
        coo_vals=vals,
        cell_load=np.column_stack([f_l, f_r]),
    )


def _check_coefficients(cvals, pvals, fvals, geo: CellGeometry, xq) -> None:
    for name, vals in (("c", cvals), ("p", pvals)):
        bad = ~(vals > 0.0) | ~np.isfinite(vals)
        if bad.any():
            cell, q = np.argwhere(bad)[0]
            edge = int(geo.edge_of_cell[cell])
            raise CoefficientError(
                f"{name} = {vals[cell, q]} at x = {xq[cell, q]:.6g} on edge {edge}; "
                f"need {name} > 0 everywhere"
            )
    if not np.isfinite(fvals).all():
        cell, q = np.argwhere(~np.isfinite(fvals))[0]
        edge = int(geo.edge_of_cell[cell])
        raise CoefficientError(f"f is not finite at x = {xq[cell, q]:.6g} on edge {edge}")


def direct_solve(matrix: sp.spmatrix, rhs: np.ndarray) -> np.ndarray:
    """Exact sparse factorization solve with one step of refinement."""
    try:
        lu = spla.splu(sp.csc_matrix(matrix))
    except RuntimeError as err:
        raise NonSPDError(f"sparse factorization failed: {err}") from err
    x = lu.solve(rhs)
    if not np.isfinite(x).all():
        raise NonSPDError("factorization produced non-finite values; system not SPD")
    # one refinement pass keeps the relative residual at rounding level
    r = rhs - matrix @ x
    x = x + lu.solve(r)
    return x


def solve_direct(system: SparseSystem) -> np.ndarray:
    """Reference solution of the assembled system."""
    return direct_solve(system.matrix, system.rhs)


def _derivative_values(e: ex.Expr, x: np.ndarray) -> np.ndarray:
    """Derivative of an expression at the given points.

    Uses complex-step differentiation (exact to rounding) unless the tree
    contains ``abs``, which is not analytic; then falls back to central
    differences with step 1e-6.
    """
    if _contains_abs(e):
        d = 1e-6
        lo = np.asarray(ex.evaluate(e, x - d), dtype=float)
        hi = np.asarray(ex.evaluate(e, x + d), dtype=float)
        return (hi - lo) / (2.0 * d)
    d = 1e-100
    z = x.astype(complex) + 1j * d
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        vals = ex._eval(e, z)
    return np.imag(vals) / d


def _contains_abs(e: ex.Expr) -> bool:
    if isinstance(e, ex.Call):
        return e.name == "abs" or _contains_abs(e.arg)
    if isinstance(e, ex.Bin):
        return _contains_abs(e.left) or _contains_abs(e.right)
    if isinstance(e, ex.Neg):
        return _contains_abs(e.operand)
    if isinstance(e, ex.Pow):
        return _contains_abs(e.base)
    return False


def error_norms(problem: Problem, u: np.ndarray, exact) -> tuple[float, float]:
    """Discrete L2 and H1 errors against an exact solution.

    ``exact`` follows the same per-edge convention as the coefficients (a
    single expression is read in each edge's local coordinate).  Both norms
    are edgewise 4-point Gauss quadratures; the H1 norm includes the L2 part.
    """
    g, mesh = problem.graph, problem.mesh
    exact_exprs = resolve_edge_exprs(exact, g.m, "exact")
    geo = cell_geometry(g, mesh, problem.dofmap)
    xq = geo.quad_points(_XI4)
    wq = geo.quad_weights(_W4)

    ul = u[geo.dof_left][:, None]
    ur = u[geo.dof_right][:, None]
    uh = ul * (1.0 - _XI4)[None, :] + ur * _XI4[None, :]
    uhp = (ur - ul) / geo.h[:, None]

    l2_sq = 0.0
    h1_extra = 0.0
    for e in range(g.m):
        sl = slice(geo.cell_start[e], geo.cell_start[e + 1])
        ue = np.asarray(ex.evaluate(exact_exprs[e], xq[sl]), dtype=float)
        uep = _derivative_values(exact_exprs[e], xq[sl])
        l2_sq += float((wq[sl] * (uh[sl] - ue) ** 2).sum())
        h1_extra += float((wq[sl] * (uhp[sl] - uep) ** 2).sum())
    return math.sqrt(l2_sq), math.sqrt(l2_sq + h1_extra)


def interpolate(problem: Problem, exact) -> np.ndarray:
    """Dof vector of the piecewise-linear interpolant of an expression."""
    g, mesh = problem.graph, problem.mesh
    dofs = problem.dofmap
    exprs = resolve_edge_exprs(exact, g.m, "exact")
    u = np.zeros(dofs.ndof)
    for e, (a, b, _) in enumerate(g.edges):
        n_e = int(mesh.n_intervals[e])
        h = mesh.spacing[e]
        nodes = h * np.arange(1, n_e)
        vals = np.asarray(ex.evaluate(exprs[e], nodes), dtype=float)
        u[dofs.interior_start[e] : dofs.interior_start[e + 1]] = vals
        u[dofs.vertex_dof(a)] = float(ex.evaluate(exprs[e], 0.0))
        u[dofs.vertex_dof(b)] = float(ex.evaluate(exprs[e], float(g.edges[e][2])))
    return u


def dump_matrix_market(matrix, path) -> None:
    """MatrixMarket coordinate dump for offline inspection."""
    from scipy.io import mmwrite

    mmwrite(str(path), sp.coo_matrix(matrix))
