"""Interface reduction by nonoverlapping substructuring.

Per subgraph of a partition we keep the restricted stiffness matrix

    [[A_II, A_IG],
     [A_GI, A_GG]]

where ``I`` are the dofs interior to the subgraph (edge-interior nodes plus
its non-interface vertices, which carry natural conditions) and ``G`` its
interface vertices.  Eliminating every ``I`` block reduces the global system
to ``S u_G = g`` on the interface; the operator below applies ``S`` and its
building blocks matrix-free, one small direct solve per subgraph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import NonSPDError, Problem, SparseSystem, assemble
from .graphs import MetricGraph, Partition, partition_by_edges


@dataclass
class LocalSystem:
    """Restricted Neumann matrix and load of one subgraph, factorized.

    ``interior_dofs`` are global dof indices; ``interface_vertices`` are the
    subgraph's interface vertex ids and ``gamma_positions`` their slots in
    the global interface vector.  ``lu_dirichlet`` factors ``A_II`` and
    ``lu_neumann`` the full local matrix.
    """

    index: int
    interior_dofs: np.ndarray
    interface_vertices: np.ndarray
    gamma_positions: np.ndarray
    a_ii: sp.csr_matrix = field(repr=False)
    a_ig: sp.csr_matrix = field(repr=False)
    a_gi: sp.csr_matrix = field(repr=False)
    a_gg: sp.csr_matrix = field(repr=False)
    f_i: np.ndarray = field(repr=False)
    f_g: np.ndarray = field(repr=False)
    lu_dirichlet: spla.SuperLU = field(repr=False)
    lu_neumann: spla.SuperLU = field(repr=False)

    @property
    def n_interior(self) -> int:
        return self.interior_dofs.shape[0]

    @property
    def n_interface(self) -> int:
        return self.interface_vertices.shape[0]

    def schur_action(self, u_loc: np.ndarray) -> np.ndarray:
        """Local Schur complement applied via one Dirichlet solve."""
        t = self.lu_dirichlet.solve(self.a_ig @ u_loc)
        return self.a_gg @ u_loc - self.a_gi @ t

    def schur_inverse_action(self, r_loc: np.ndarray) -> np.ndarray:
        """Inverse local Schur action via one Neumann solve.

        Solves the full local system with zero interior load and ``r_loc``
        on the interface, returning the interface part of the solution.
        """
        rhs = np.zeros(self.n_interior + self.n_interface)
        rhs[self.n_interior :] = r_loc
        sol = self.lu_neumann.solve(rhs)
        return sol[self.n_interior :]

    def interface_rhs(self) -> np.ndarray:
        """Local contribution ``f_G - A_GI A_II^{-1} f_I``."""
        return self.f_g - self.a_gi @ self.lu_dirichlet.solve(self.f_i)


def local_schur_dense(ls: LocalSystem) -> np.ndarray:
    """Dense local Schur complement (small: interface size squared)."""
    k = ls.n_interface
    if k == 0:
        return np.zeros((0, 0))
    x = ls.lu_dirichlet.solve(ls.a_ig.toarray())
    return ls.a_gg.toarray() - ls.a_gi @ x


def _factorize(matrix: sp.spmatrix, what: str) -> spla.SuperLU:
    try:
        lu = spla.splu(sp.csc_matrix(matrix))
    except RuntimeError as err:
        raise NonSPDError(f"{what} factorization failed: {err}") from err
    return lu


class SchurOperator:
    """Matrix-free interface operator for a partitioned problem.

    Builds one :class:`LocalSystem` per subgraph from the assembled global
    contributions (restricted sums, so the subassembly identities hold to
    rounding).  ``apply`` realizes ``S``, ``rhs`` the reduced right-hand
    side, and ``extend`` recovers interior values from interface data.
    All state is read-only after construction.
    """

    def __init__(self, problem: Problem, partition: Partition | None = None,
                 system: SparseSystem | None = None):
        self.problem = problem
        self.partition = partition if partition is not None else partition_by_edges(problem.graph)
        self.system = system if system is not None else assemble(problem)
        self.graph: MetricGraph = problem.graph
        dofs = self.system.dofmap

        self.interface_vertices = np.asarray(self.partition.interface, dtype=int)
        self.d = int(self.interface_vertices.shape[0])
        self.gamma_dofs = dofs.vertex_dofs(self.interface_vertices)
        gamma_pos = np.full(self.graph.n_vertices, -1, dtype=int)
        gamma_pos[self.interface_vertices] = np.arange(self.d)

        in_gamma = np.zeros(dofs.ndof, dtype=bool)
        in_gamma[self.gamma_dofs] = True

        geo = self.system.geometry
        total_cells = geo.h.shape[0]
        lut = np.full(dofs.ndof, -1, dtype=int)  # reused across subgraphs
        self.locals: list[LocalSystem] = []
        for i, edge_ids in enumerate(self.partition.subgraphs):
            cells = np.concatenate(
                [np.arange(geo.cell_start[e], geo.cell_start[e + 1]) for e in edge_ids]
            )
            entry_ids = np.concatenate(
                [cells, total_cells + cells, 2 * total_cells + cells, 3 * total_cells + cells]
            )
            rows = self.system.coo_rows[entry_ids]
            cols = self.system.coo_cols[entry_ids]
            vals = self.system.coo_vals[entry_ids]

            local_dofs = np.unique(np.concatenate([geo.dof_left[cells], geo.dof_right[cells]]))
            interior = local_dofs[~in_gamma[local_dofs]]
            boundary = local_dofs[in_gamma[local_dofs]]
            n_i, n_g = interior.shape[0], boundary.shape[0]

            lut[interior] = np.arange(n_i)
            lut[boundary] = n_i + np.arange(n_g)
            local = sp.coo_matrix(
                (vals, (lut[rows], lut[cols])), shape=(n_i + n_g, n_i + n_g)
            ).tocsr()

            f_local = np.zeros(n_i + n_g)
            np.add.at(f_local, lut[geo.dof_left[cells]], self.system.cell_load[cells, 0])
            np.add.at(f_local, lut[geo.dof_right[cells]], self.system.cell_load[cells, 1])
            lut[local_dofs] = -1

            a_ii = local[:n_i, :n_i]
            self.locals.append(
                LocalSystem(
                    index=i,
                    interior_dofs=interior,
                    interface_vertices=boundary - dofs.vertex_block_start,
                    gamma_positions=gamma_pos[boundary - dofs.vertex_block_start],
                    a_ii=a_ii,
                    a_ig=local[:n_i, n_i:],
                    a_gi=local[n_i:, :n_i],
                    a_gg=local[n_i:, n_i:],
                    f_i=f_local[:n_i],
                    f_g=f_local[n_i:],
                    lu_dirichlet=_factorize(a_ii, f"subgraph {i} interior"),
                    lu_neumann=_factorize(local, f"subgraph {i} full"),
                )
            )

    def apply(self, u_gamma: np.ndarray) -> np.ndarray:
        """Schur complement times an interface vector."""
        u_gamma = np.asarray(u_gamma, dtype=float)
        if u_gamma.shape != (self.d,):
            raise ValueError(f"expected interface vector of length {self.d}")
        out = np.zeros(self.d)
        for ls in self.locals:
            if ls.n_interface == 0:
                continue
            out[ls.gamma_positions] += ls.schur_action(u_gamma[ls.gamma_positions])
        return out

    def rhs(self) -> np.ndarray:
        """Reduced right-hand side on the interface."""
        g = np.zeros(self.d)
        for ls in self.locals:
            if ls.n_interface == 0:
                continue
            g[ls.gamma_positions] += ls.interface_rhs()
        return g

    def extend(self, u_gamma: np.ndarray, with_load: bool = False) -> np.ndarray:
        """Full dof vector from interface values via per-subgraph solves.

        With ``with_load`` the subgraph loads enter the interior solves and
        the result is the solution recovery; without it the result is the
        piecewise discrete harmonic extension of ``u_gamma``.
        """
        u_gamma = np.asarray(u_gamma, dtype=float)
        u = np.zeros(self.system.ndof)
        u[self.gamma_dofs] = u_gamma
        for ls in self.locals:
            rhs = ls.a_ig @ u_gamma[ls.gamma_positions] if ls.n_interface else 0.0
            rhs = (ls.f_i - rhs) if with_load else -rhs
            if np.ndim(rhs) == 0:
                rhs = np.full(ls.n_interior, float(rhs))
            u[ls.interior_dofs] = ls.lu_dirichlet.solve(rhs)
        return u

    def energy(self, u: np.ndarray) -> float:
        """Global bilinear form value of a full dof vector."""
        return float(u @ (self.system.matrix @ u))

    def dense(self) -> np.ndarray:
        """Dense Schur complement, summed from the local dense blocks."""
        s = np.zeros((self.d, self.d))
        for ls in self.locals:
            if ls.n_interface == 0:
                continue
            pos = ls.gamma_positions
            s[np.ix_(pos, pos)] += local_schur_dense(ls)
        return s


def build_local(problem: Problem, partition: Partition, i: int,
                system: SparseSystem | None = None) -> LocalSystem:
    """Local system of one subgraph (convenience wrapper)."""
    op = SchurOperator(problem, partition, system=system)
    return op.locals[i]


def dense_schur_oracle(system: SparseSystem, gamma_dofs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Schur complement and reduced rhs by explicit global block elimination.

    Independent of the subgraph machinery: partitions the assembled matrix
    into interface/non-interface dofs and eliminates the latter densely.
    Only for small systems (used by tests and diagnostics).
    """
    ndof = system.ndof
    mask = np.zeros(ndof, dtype=bool)
    mask[gamma_dofs] = True
    idx_i = np.flatnonzero(~mask)
    idx_g = np.asarray(gamma_dofs, dtype=int)
    a = system.matrix.toarray()
    a_ii = a[np.ix_(idx_i, idx_i)]
    a_ig = a[np.ix_(idx_i, idx_g)]
    a_gi = a[np.ix_(idx_g, idx_i)]
    a_gg = a[np.ix_(idx_g, idx_g)]
    x = np.linalg.solve(a_ii, a_ig)
    s = a_gg - a_gi @ x
    g = system.rhs[idx_g] - a_gi @ np.linalg.solve(a_ii, system.rhs[idx_i])
    return s, g
