"""Matrix-free iterative solvers and eigenvalue estimation.

All solvers take the operator as a callable, an ndarray, or a scipy sparse
matrix, and an optional preconditioner (anything with ``apply`` or a plain
callable).  Residuals are always the true relative residuals of the
unpreconditioned system, ``||b - A x|| / ||b||``; BiCGSTAB applies the
preconditioner from the right so its recurrence residual already lives in
that norm.  One BiCGSTAB iteration is the full two-matvec step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

EPS = float(np.finfo(float).eps)
DEFAULT_TOL = float(np.sqrt(EPS))  # ~1.4901e-8


class IterationError(RuntimeError):
    """Base class for iterative-solver failures."""


class BreakdownError(IterationError):
    """BiCGSTAB scalar became numerically zero even after one restart."""


class DivergenceError(IterationError):
    """Residual grew an order of magnitude above its initial value."""


class IndefiniteOperatorError(IterationError):
    """CG detected a nonpositive curvature direction."""


class EigenEstimateError(IterationError):
    """Power iteration failed to settle within its iteration budget."""


@dataclass(frozen=True)
class StoppingRule:
    """Relative-residual tolerance and iteration cap.

    The default tolerance is the square root of machine epsilon.
    """

    tolerance: float = DEFAULT_TOL
    max_iterations: int = 10000

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")


@dataclass
class SolveReport:
    """Outcome of one iterative solve."""

    solver: str
    preconditioner: str
    iterations: int = 0
    converged: bool = False
    residuals: list[float] = field(default_factory=list)
    wall_seconds: float = 0.0
    matvec_count: int = 0
    precond_apply_count: int = 0

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else float("nan")

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "preconditioner": self.preconditioner,
            "iterations": self.iterations,
            "converged": self.converged,
            "residuals": list(self.residuals),
            "wall_seconds": self.wall_seconds,
            "matvec_count": self.matvec_count,
            "precond_apply_count": self.precond_apply_count,
        }


def _as_matvec(op):
    if callable(op) and not hasattr(op, "dot"):
        return op
    if hasattr(op, "apply") and not isinstance(op, np.ndarray):
        return op.apply
    mat = op

    def mv(v):
        return mat @ v

    return mv


def _as_prec(prec):
    if prec is None:
        return None, "none"
    name = getattr(prec, "variant", getattr(prec, "__name__", "custom"))
    if hasattr(prec, "apply"):
        if name == "none":
            return None, "none"
        return prec.apply, name
    return prec, name


def bicgstab(op, b, prec=None, rule: StoppingRule | None = None, x0=None):
    """Right-preconditioned BiCGSTAB.

    On a scalar breakdown (rho or omega at rounding level) the iteration
    restarts once from the current iterate; a second breakdown raises
    :class:`BreakdownError`.
    """
    rule = rule or StoppingRule()
    a = _as_matvec(op)
    m, prec_name = _as_prec(prec)
    b = np.asarray(b, dtype=float)
    report = SolveReport(solver="bicgstab", preconditioner=prec_name)
    t0 = time.perf_counter()

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0 or b.size == 0:
        report.converged = True
        report.residuals = [0.0]
        report.wall_seconds = time.perf_counter() - t0
        return np.zeros_like(b), report

    def matvec(v):
        report.matvec_count += 1
        return a(v)

    def precond(v):
        if m is None:
            return v
        report.precond_apply_count += 1
        return m(v)

    r = b - matvec(x) if x.any() else b.copy()
    r0 = r.copy()
    r0_sqnorm = float(r0 @ r0)
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    report.residuals.append(float(np.linalg.norm(r)) / bnorm)
    restarts = 0

    for it in range(1, rule.max_iterations + 1):
        rho_new = float(r0 @ r)
        if abs(rho_new) < EPS * EPS * r0_sqnorm:
            # r and the shadow residual became orthogonal: restart from x
            if restarts >= 1:
                raise BreakdownError(
                    f"bicgstab: rho breakdown at iteration {it} after one restart"
                )
            restarts += 1
            r = b - matvec(x)
            r0 = r.copy()
            r0_sqnorm = float(r0 @ r0)
            rho_new = r0_sqnorm
            rho = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        y = precond(p)
        v = matvec(y)
        denom = float(r0 @ v)
        if denom == 0.0:
            if restarts >= 1:
                raise BreakdownError(f"bicgstab: alpha breakdown at iteration {it}")
            restarts += 1
            r = b - matvec(x)
            r0 = r.copy()
            r0_sqnorm = float(r0 @ r0)
            rho = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0
            report.iterations = it
            report.residuals.append(float(np.linalg.norm(r)) / bnorm)
            continue
        alpha = rho_new / denom
        s = r - alpha * v
        z = precond(s)
        t = matvec(z)
        tt = float(t @ t)
        omega = float(t @ s) / tt if tt > 0.0 else 0.0
        x = x + alpha * y + omega * z
        r = s - omega * t
        rho = rho_new

        relres = float(np.linalg.norm(r)) / bnorm
        report.iterations = it
        report.residuals.append(relres)
        if relres <= rule.tolerance:
            report.converged = True
            break
        if omega == 0.0:
            if restarts >= 1:
                raise BreakdownError(f"bicgstab: omega breakdown at iteration {it}")
            restarts += 1
            r = b - matvec(x)
            r0 = r.copy()
            r0_sqnorm = float(r0 @ r0)
            rho = alpha = omega = 1.0
            v[:] = 0.0
            p[:] = 0.0

    report.wall_seconds = time.perf_counter() - t0
    return x, report


def pcg(op, b, prec=None, rule: StoppingRule | None = None, x0=None):
    """Preconditioned conjugate gradients for SPD operators."""
    rule = rule or StoppingRule()
    a = _as_matvec(op)
    m, prec_name = _as_prec(prec)
    b = np.asarray(b, dtype=float)
    report = SolveReport(solver="pcg", preconditioner=prec_name)
    t0 = time.perf_counter()

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0 or b.size == 0:
        report.converged = True
        report.residuals = [0.0]
        report.wall_seconds = time.perf_counter() - t0
        return np.zeros_like(b), report

    def matvec(v):
        report.matvec_count += 1
        return a(v)

    def precond(v):
        if m is None:
            return v
        report.precond_apply_count += 1
        return m(v)

    r = b - matvec(x) if x.any() else b.copy()
    z = precond(r)
    p = z.copy()
    rz = float(r @ z)
    report.residuals.append(float(np.linalg.norm(r)) / bnorm)
    if report.residuals[-1] <= rule.tolerance:
        report.converged = True
        report.wall_seconds = time.perf_counter() - t0
        return x, report

    for it in range(1, rule.max_iterations + 1):
        q = matvec(p)
        pq = float(p @ q)
        if pq <= 0.0:
            raise IndefiniteOperatorError(
                f"pcg: nonpositive curvature p.Ap = {pq} at iteration {it}"
            )
        gamma = rz / pq
        x = x + gamma * p
        r = r - gamma * q
        relres = float(np.linalg.norm(r)) / bnorm
        report.iterations = it
        report.residuals.append(relres)
        if relres <= rule.tolerance:
            report.converged = True
            break
        z = precond(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new

    report.wall_seconds = time.perf_counter() - t0
    return x, report


def richardson(op, b, prec=None, theta: float = 0.5,
               rule: StoppingRule | None = None, x0=None):
    """Damped preconditioned Richardson iteration.

    Raises :class:`DivergenceError` once the residual exceeds ten times its
    initial value.
    """
    if not theta > 0.0:
        raise ValueError(f"theta must be positive, got {theta}")
    rule = rule or StoppingRule()
    a = _as_matvec(op)
    m, prec_name = _as_prec(prec)
    b = np.asarray(b, dtype=float)
    report = SolveReport(solver="richardson", preconditioner=prec_name)
    t0 = time.perf_counter()

    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0 or b.size == 0:
        report.converged = True
        report.residuals = [0.0]
        report.wall_seconds = time.perf_counter() - t0
        return np.zeros_like(b), report

    def matvec(v):
        report.matvec_count += 1
        return a(v)

    def precond(v):
        if m is None:
            return v
        report.precond_apply_count += 1
        return m(v)

    r = b - matvec(x) if x.any() else b.copy()
    rel0 = float(np.linalg.norm(r)) / bnorm
    report.residuals.append(rel0)
    if rel0 <= rule.tolerance:
        report.converged = True
        report.wall_seconds = time.perf_counter() - t0
        return x, report

    for it in range(1, rule.max_iterations + 1):
        x = x + theta * precond(r)
        r = b - matvec(x)
        relres = float(np.linalg.norm(r)) / bnorm
        report.iterations = it
        report.residuals.append(relres)
        if relres <= rule.tolerance:
            report.converged = True
            break
        if relres > 10.0 * max(rel0, 1e-300):
            report.wall_seconds = time.perf_counter() - t0
            raise DivergenceError(
                f"richardson: residual {relres:.3e} exceeds 10x initial {rel0:.3e}"
            )

    report.wall_seconds = time.perf_counter() - t0
    return x, report


def cond_estimate(op, solve, n: int, tol: float = 0.01,
                  max_iterations: int = 5000, seed: int = 0):
    """Extreme eigenvalues of an SPD operator and their ratio.

    ``op`` is the forward action, ``solve`` an (exact or tightly converged)
    inverse action used for the smallest eigenvalue.  Both ends run power
    iteration with a successive-estimate stopping criterion at relative
    ``tol``.  Returns ``(lam_max, lam_min, kappa)``.
    """
    a = _as_matvec(op)
    inv = _as_matvec(solve)
    if n == 0:
        raise ValueError("cannot estimate eigenvalues of a 0-dimensional operator")
    rng = np.random.default_rng(seed)

    def power(action) -> float:
        q = rng.standard_normal(n)
        q /= np.linalg.norm(q)
        est_old = None
        for _ in range(max_iterations):
            w = action(q)
            est = float(q @ w)
            nw = float(np.linalg.norm(w))
            if nw == 0.0:
                raise EigenEstimateError("power iteration hit the null space")
            q = w / nw
            if est_old is not None and abs(est - est_old) <= tol * abs(est):
                return est
            est_old = est
        raise EigenEstimateError(
            f"power iteration did not settle within {max_iterations} iterations"
        )

    lam_max = power(a)
    lam_min = 1.0 / power(inv)
    return lam_max, lam_min, lam_max / lam_min
