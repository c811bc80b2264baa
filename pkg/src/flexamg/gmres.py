"""Right-preconditioned restarted GMRES with modified Gram-Schmidt.

Convergence is declared on the unpreconditioned residual norm:
||b - A x|| <= max(rtol * ||b||, atol). Right preconditioning reports that
norm naturally inside the Arnoldi process; the true residual is recomputed at
every restart and before declaring convergence.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import time

import numpy as np

from . import sparse
from .sparse import SparseMatrix


@dataclass
class SolveReport:
    iterations: int
    converged: bool
    final_rel_residual: float
    final_abs_residual: float
    time_total: float
    time_per_iteration: float
    work_units_per_iteration: float
    diverged: bool = False
    breakdown: bool = False
    residual_history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "final_rel_residual": self.final_rel_residual,
            "final_abs_residual": self.final_abs_residual,
            "time_total": self.time_total,
            "time_per_iteration": self.time_per_iteration,
            "work_units_per_iteration": self.work_units_per_iteration,
            "diverged": self.diverged,
            "breakdown": self.breakdown,
        }


def gmres(A: SparseMatrix, b: np.ndarray, precond=None,
          rtol: float = 1e-4, atol: float = 1e-8,
          restart: int = 50, maxiter: int = 500,
          work_units_per_application: float = 0.0) -> tuple[np.ndarray, SolveReport]:
    """GMRES(restart) from the zero initial guess.

    ``precond`` is a callable v -> M^{-1} v applied on the right, or None.
    Hessenberg breakdown (subdiagonal < 1e-30) is reported as stagnation, not
    raised; NaN/Inf in the iterates sets the divergence flag.
    """
    if rtol <= 0 or atol <= 0:
        raise ValueError("rtol and atol must be positive")
    t0 = time.perf_counter()
    n = A.n_rows
    b = np.asarray(b, dtype=np.float64)
    M = precond if precond is not None else (lambda v: v)

    bnorm = sparse.norm2(b)
    tol = max(rtol * bnorm, atol)
    x = np.zeros(n)
    iters = 0
    history: list[float] = []
    converged = diverged = breakdown = False
    res = bnorm

    while iters < maxiter and not (converged or diverged or breakdown):
        r = sparse.residual(A, x, b)
        beta = sparse.norm2(r)
        if beta <= tol:
            converged = True
            res = beta
            break
        m = min(restart, maxiter - iters)
        V = np.zeros((m + 1, n))
        Z = np.zeros((m, n))
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        j_used = 0
        for j in range(m):
            Z[j] = M(V[j])
            w = sparse.spmv(A, Z[j])
            if not np.isfinite(w).all():
                diverged = True
                break
            for i in range(j + 1):
                H[i, j] = V[i] @ w
                w -= H[i, j] * V[i]
            hn = sparse.norm2(w)
            H[j + 1, j] = hn
            iters += 1
            j_used = j + 1
            # apply accumulated Givens rotations to the new column
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = np.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                breakdown = True
                break
            cs[j] = H[j, j] / denom
            sn[j] = H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            res = abs(g[j + 1])
            history.append(res)
            if hn < 1e-30:
                breakdown = True
                break
            if res <= tol:
                break
            V[j + 1] = w / hn
        if j_used > 0:
            y = np.linalg.solve(np.triu(H[:j_used, :j_used]), g[:j_used])
            x = x + Z[:j_used].T @ y
        if not np.isfinite(x).all():
            diverged = True
        if not diverged:
            true_res = sparse.norm2(sparse.residual(A, x, b))
            res = true_res
            if true_res <= tol:
                converged = True
            elif breakdown:
                # stagnated: basis collapsed before reaching the tolerance
                converged = False

    total = time.perf_counter() - t0
    report = SolveReport(
        iterations=iters,
        converged=converged and not diverged,
        final_rel_residual=res / bnorm if bnorm > 0 else 0.0,
        final_abs_residual=res,
        time_total=total,
        time_per_iteration=total / max(iters, 1),
        work_units_per_iteration=work_units_per_application,
        diverged=diverged,
        breakdown=breakdown,
        residual_history=history,
    )
    return x, report
