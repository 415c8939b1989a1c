"""Interface preconditioners for the reduced system.

Four variants:

* ``none`` — identity.
* ``diag`` — inverse of ``diag(S)``; the diagonal is probed from the dense
  local Schur blocks (same values as global unit-vector probes by
  subassembly, far cheaper).  Probing cost is timed and reported.
* ``poly`` — first-degree truncation of the Neumann series of ``S^{-1}``
  around its diagonal: ``D^{-1} + D^{-1}(D - S)D^{-1}``; one Schur apply
  per application.
* ``nn`` — Neumann-Neumann: ``D_G (sum_i S_i^{-1}) D_G`` where each inverse
  local Schur action is one Neumann solve and ``D_G`` holds the reciprocal
  subgraph multiplicities of the interface vertices (partition of unity).
  The unscaled sum is available behind ``scaled=False``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .substructuring import SchurOperator, local_schur_dense

VARIANTS = ("none", "diag", "poly", "nn")


class PreconditionerError(ValueError):
    pass


@dataclass
class Preconditioner:
    variant: str
    op: SchurOperator | None
    diag: np.ndarray | None = None
    scaling: np.ndarray | None = None
    scaled: bool = True
    setup_seconds: float = 0.0

    def apply(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.op is not None and r.shape != (self.op.d,):
            raise ValueError(f"expected interface vector of length {self.op.d}")
        if self.variant == "none":
            return r.copy()
        if self.variant == "diag":
            return r / self.diag
        if self.variant == "poly":
            y = r / self.diag
            return 2.0 * y - self.op.apply(y) / self.diag
        if self.variant == "nn":
            rr = self.scaling * r if self.scaled else r
            out = np.zeros_like(rr)
            for ls in self.op.locals:
                if ls.n_interface == 0:
                    continue
                out[ls.gamma_positions] += ls.schur_inverse_action(rr[ls.gamma_positions])
            return self.scaling * out if self.scaled else out
        raise PreconditionerError(f"unknown variant {self.variant!r}")


def setup(variant: str, op: SchurOperator, scaled: bool = True) -> Preconditioner:
    """Build a preconditioner for the given interface operator."""
    if variant not in VARIANTS:
        raise PreconditionerError(f"variant must be one of {VARIANTS}, got {variant!r}")
    t0 = time.perf_counter()
    diag = None
    scaling = None
    if variant in ("diag", "poly"):
        diag = np.zeros(op.d)
        for ls in op.locals:
            if ls.n_interface == 0:
                continue
            diag[ls.gamma_positions] += np.diag(local_schur_dense(ls))
        if op.d and not (diag > 0).all():
            k = int(np.flatnonzero(~(diag > 0))[0])
            raise PreconditionerError(
                f"nonpositive Schur diagonal {diag[k]} at interface slot {k}; assembly is broken"
            )
    elif variant == "nn":
        # Neumann factorizations already live on the local systems; only the
        # multiplicity scaling is assembled here.
        mult = op.partition.multiplicity[op.interface_vertices]
        scaling = 1.0 / mult.astype(float)
    return Preconditioner(
        variant=variant,
        op=op,
        diag=diag,
        scaling=scaling,
        scaled=scaled,
        setup_seconds=time.perf_counter() - t0,
    )


def nn_richardson_step(op: SchurOperator, prec: Preconditioner, rhs: np.ndarray,
                       u_gamma: np.ndarray, theta: float) -> np.ndarray:
    """One damped update ``u + theta * M^{-1} (rhs - S u)``."""
    if not 0.0 <= theta:
        raise ValueError("theta must be nonnegative")
    return u_gamma + theta * prec.apply(rhs - op.apply(u_gamma))
