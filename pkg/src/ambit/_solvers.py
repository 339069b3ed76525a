"""Dense LP and least-distance QP helpers shared by the geometry modules.

Feasibility questions go through HiGHS. Projections onto polyhedra use a
primal active-set method whose equality-constrained subproblems have closed
forms (the Hessian is the identity). Constraint rows are expected unit-
normalized so the tolerances read as geometric distances.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linprog

from .errors import SolverStall

FEAS_TOL = 1e-8     # LP feasibility tolerance
ACTIVE_TOL = 1e-9   # constraint considered active below this residual


def feasible_point(dim, A_eq=None, b_eq=None, A_ub=None, b_ub=None,
                   lo=None, hi=None, tol=FEAS_TOL):
    """A point satisfying the system, or None if it is infeasible."""
    bounds = [(None if lo is None else lo[i], None if hi is None else hi[i])
              for i in range(dim)]
    res = linprog(np.zeros(dim), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": tol,
                           "dual_feasibility_tolerance": tol})
    if res.status == 2:
        return None
    if res.status != 0:
        raise SolverStall(f"feasibility LP ended with status {res.status}: {res.message}")
    return np.asarray(res.x, dtype=np.float64)


def lp_vertex(c, A_ub, b_ub, tol=FEAS_TOL):
    """Minimize c.x over A_ub x <= b_ub with dual simplex (vertex optimum)."""
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * len(c),
                  method="highs-ds",
                  options={"primal_feasibility_tolerance": tol,
                           "dual_feasibility_tolerance": tol})
    if res.status == 2:
        return None
    if res.status != 0:
        raise SolverStall(f"vertex LP ended with status {res.status}: {res.message}")
    return np.asarray(res.x, dtype=np.float64)


def affine_projection(x, C, g):
    """min ||y - x|| s.t. C y = g, via the normal equations (lstsq, rank-safe)."""
    r = C @ x - g
    lam, *_ = np.linalg.lstsq(C @ C.T, r, rcond=None)
    return x - C.T @ lam


def _keeps_rank(A_eq, A_ub, working, candidate):
    trial = np.vstack([A_eq, A_ub[working + [candidate]]])
    s = np.linalg.svd(trial, compute_uv=False)
    return s[-1] > 1e-10 * max(1.0, s[0])


def project_onto_polyhedron(x, A_eq, b_eq, A_ub, b_ub, start, max_iter=200):
    """Projection of x onto {A_eq y = b_eq, A_ub y <= b_ub} from a feasible start.

    Returns (y, lam, active, kkt_residual) with lam aligned to A_ub rows and
    active the final working set. Raises SolverStall past max_iter.
    """
    x = np.asarray(x, dtype=np.float64)
    if A_eq is None:
        A_eq = np.zeros((0, x.size))
        b_eq = np.zeros(0)
    n_eq = A_eq.shape[0]
    y = np.asarray(start, dtype=np.float64).copy()
    if n_eq:
        y = affine_projection(y, A_eq, b_eq)

    working: list[int] = []
    if A_ub.shape[0]:
        for i in np.flatnonzero(A_ub @ y - b_ub >= -1e-7):
            if _keeps_rank(A_eq, A_ub, working, int(i)):
                working.append(int(i))

    scale = max(1.0, float(np.linalg.norm(x)))
    for _ in range(max_iter):
        C = np.vstack([A_eq, A_ub[working]])
        g = np.concatenate([b_eq, b_ub[working]])
        y_sub = affine_projection(x, C, g) if C.shape[0] else x.copy()
        p = y_sub - y

        if np.linalg.norm(p) <= 1e-11 * scale:
            y = y_sub  # land exactly on the working-set optimum
            if C.shape[0]:
                lam_all, *_ = np.linalg.lstsq(C.T, x - y, rcond=None)
            else:
                lam_all = np.empty(0)
            lam_w = lam_all[n_eq:]
            if lam_w.size == 0 or lam_w.min() >= -1e-9:
                lam = np.zeros(A_ub.shape[0])
                for idx, row in enumerate(working):
                    lam[row] = max(float(lam_w[idx]), 0.0)
                grad = (x - y) - (C.T @ lam_all if C.shape[0] else np.zeros_like(x))
                return y, lam, sorted(working), float(np.max(np.abs(grad)))
            working.pop(int(np.argmin(lam_w)))
            continue

        # step toward the subspace optimum, blocked by inactive rows
        alpha, blocker = 1.0, -1
        if A_ub.shape[0]:
            mask = np.ones(A_ub.shape[0], dtype=bool)
            mask[working] = False
            rows = np.flatnonzero(mask)
            if rows.size:
                ap = A_ub[rows] @ p
                pos = ap > 1e-13
                if np.any(pos):
                    ratios = (b_ub[rows[pos]] - A_ub[rows[pos]] @ y) / ap[pos]
                    ratios = np.maximum(ratios, 0.0)
                    k = int(np.argmin(ratios))
                    if ratios[k] < alpha:
                        alpha, blocker = float(ratios[k]), int(rows[pos][k])
        y = y + alpha * p
        if blocker >= 0 and alpha < 1.0 and _keeps_rank(A_eq, A_ub, working, blocker):
            working.append(blocker)
    raise SolverStall(f"active-set projection exceeded {max_iter} iterations")
