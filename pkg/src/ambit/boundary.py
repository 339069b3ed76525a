"""Flip points: nearest points where the head's decision changes.

A flip point for source class i and target class j minimizes the distance
to the query subject to z_i = z_j, z_i >= z_k for every other k, and the
working cube. When that system is infeasible (the two classes share no
boundary), the relaxed form projects onto the region where the target
dominates outright. Projections try the closed-form foot of the pairwise
hyperplane first and fall back to the active-set solver only when a
dominance or cube constraint binds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._solvers import affine_projection, feasible_point, project_onto_polyhedron
from .errors import (DegeneratePair, EmptyTargetRegion, NoInterface,
                     NotSourceClass, NotTargetClass)
from .features import ReducedSpace

_FEAS_EPS = 1e-9   # slack when testing the closed-form foot against constraints


@dataclass
class FlipPoint:
    point: np.ndarray
    distance: float
    source: int
    target: int | tuple[int, ...]
    relaxed: bool
    active: list[int]
    kkt_residual: float


@dataclass
class BoundaryVector:
    """Per-class flip distances from one query. Entry [source] is 0."""

    source: int
    distances: np.ndarray        # (n,), inf where no target region exists
    status: list[str]            # source | direct | relaxed | empty | degenerate
    flips: list                  # FlipPoint or None per entry


def _pair_normal(space: ReducedSpace, i: int, j: int):
    """w, c with z_i - z_j = w . y + c in reduced coordinates."""
    w = space.head_matrix[i] - space.head_matrix[j]
    c = float(space.head.bias[i] - space.head.bias[j])
    return w, c


def _dominance_rows(space: ReducedSpace, winner: int, exclude: set):
    """Rows a.y <= r encoding z_winner >= z_k for k outside exclude.

    Constant rows (identical head rows) are dropped when trivially true;
    returns (A, r, infeasible) with infeasible set when a constant row can
    never hold.
    """
    rows, rhs = [], []
    hm, bias = space.head_matrix, space.head.bias
    for k in range(space.n_classes):
        if k == winner or k in exclude:
            continue
        a = hm[k] - hm[winner]
        r = float(bias[winner] - bias[k])
        norm = float(np.linalg.norm(a))
        if norm < 1e-14:
            if r < -1e-12:
                return None, None, True
            continue
        rows.append(a / norm)
        rhs.append(r / norm)
    if rows:
        return np.array(rows), np.array(rhs), False
    return np.empty((0, space.dim)), np.empty(0), False


def _box_rows(dim: int, a: float):
    eye = np.eye(dim)
    return np.vstack([eye, -eye]), np.full(2 * dim, a)


def _max_iter(space: ReducedSpace) -> int:
    return 50 * max(space.n_classes, 2)


def check_interface(space: ReducedSpace, i: int, j: int, tol: float = 1e-8) -> bool:
    """Whether classes i and j share a decision boundary inside the cube."""
    w, c = _pair_normal(space, i, j)
    norm = float(np.linalg.norm(w))
    if norm < 1e-14:
        raise DegeneratePair(f"head rows {i} and {j} coincide")
    a = space.require_bound()
    dom, dom_rhs, infeasible = _dominance_rows(space, i, {j})
    if infeasible:
        return False
    point = feasible_point(space.dim,
                           A_eq=(w / norm)[None, :], b_eq=np.array([-c / norm]),
                           A_ub=dom if dom.size else None,
                           b_ub=dom_rhs if dom.size else None,
                           lo=np.full(space.dim, -a), hi=np.full(space.dim, a),
                           tol=tol)
    return point is not None


def _finish(x, y, i, target, relaxed, active, kkt) -> FlipPoint:
    return FlipPoint(y, float(np.linalg.norm(x - y)), i, target, relaxed,
                     active, kkt)


def project_to_boundary(space: ReducedSpace, x: np.ndarray, i: int, j: int,
                        tol: float = 1e-6) -> FlipPoint:
    """Nearest point with z_i = z_j >= all other logits, inside the cube."""
    x = np.asarray(x, dtype=np.float64)
    if space.classify(x) != i:
        raise NotSourceClass(f"query classifies as {space.classify(x)}, not {i}")
    if j == i:
        raise NotTargetClass("target equals source")
    w, c = _pair_normal(space, i, j)
    norm = float(np.linalg.norm(w))
    if norm < 1e-14:
        raise DegeneratePair(f"head rows {i} and {j} coincide")
    a = space.require_bound()
    dom, dom_rhs, infeasible = _dominance_rows(space, i, {j})
    if infeasible:
        raise NoInterface(f"classes {i} and {j} never tie at the top")

    wn, cn = w / norm, c / norm
    foot = x - (float(wn @ x) + cn) * wn
    ok_dom = dom.shape[0] == 0 or np.all(dom @ foot <= dom_rhs + _FEAS_EPS)
    if ok_dom and np.all(np.abs(foot) <= a + _FEAS_EPS):
        return _finish(x, foot, i, j, False, [], 0.0)

    box, box_rhs = _box_rows(space.dim, a)
    A_ub = np.vstack([dom, box])
    b_ub = np.concatenate([dom_rhs, box_rhs])
    A_eq, b_eq = wn[None, :], np.array([-cn])
    start = feasible_point(space.dim, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub)
    if start is None:
        raise NoInterface(f"classes {i} and {j} share no boundary inside the cube")
    y, _, active, kkt = project_onto_polyhedron(x, A_eq, b_eq, A_ub, b_ub,
                                                start, _max_iter(space))
    return _finish(x, y, i, j, False, active, kkt)


def project_relaxed(space: ReducedSpace, x: np.ndarray, j: int,
                    tol: float = 1e-6) -> FlipPoint:
    """Nearest point where class j dominates outright (no tie required)."""
    x = np.asarray(x, dtype=np.float64)
    i = space.classify(x)
    if i == j:
        raise NotTargetClass(f"query already classifies as {j}")
    a = space.require_bound()
    dom, dom_rhs, infeasible = _dominance_rows(space, j, set())
    if infeasible:
        raise EmptyTargetRegion(f"class {j} dominates nowhere")

    w, c = _pair_normal(space, j, i)   # z_j - z_i = w.y + c
    norm = float(np.linalg.norm(w))
    if norm >= 1e-14:
        wn, cn = w / norm, c / norm
        foot = x - (float(wn @ x) + cn) * wn
        ok = dom.shape[0] == 0 or np.all(dom @ foot <= dom_rhs + _FEAS_EPS)
        if ok and np.all(np.abs(foot) <= a + _FEAS_EPS):
            return _finish(x, foot, i, j, True, [], 0.0)

    box, box_rhs = _box_rows(space.dim, a)
    A_ub = np.vstack([dom, box])
    b_ub = np.concatenate([dom_rhs, box_rhs])
    A_eq, b_eq = np.empty((0, space.dim)), np.empty(0)
    start = feasible_point(space.dim, A_ub=A_ub, b_ub=b_ub)
    if start is None:
        raise EmptyTargetRegion(f"class {j} dominates nowhere inside the cube")
    y, _, active, kkt = project_onto_polyhedron(x, A_eq, b_eq, A_ub, b_ub,
                                                start, _max_iter(space))
    return _finish(x, y, i, j, True, active, kkt)


def project_to_multi(space: ReducedSpace, x: np.ndarray, targets,
                     tol: float = 1e-6) -> FlipPoint:
    """Nearest point where the source ties with every listed target class."""
    x = np.asarray(x, dtype=np.float64)
    i = space.classify(x)
    targets = tuple(dict.fromkeys(int(t) for t in targets))
    if not targets:
        raise NotTargetClass("no target classes given")
    if i in targets:
        raise NotTargetClass("targets must differ from the source class")
    a = space.require_bound()

    eq_rows, eq_rhs = [], []
    for t in targets:
        w, c = _pair_normal(space, i, t)
        norm = float(np.linalg.norm(w))
        if norm < 1e-14:
            raise DegeneratePair(f"head rows {i} and {t} coincide")
        eq_rows.append(w / norm)
        eq_rhs.append(-c / norm)
    A_eq, b_eq = np.array(eq_rows), np.array(eq_rhs)
    dom, dom_rhs, infeasible = _dominance_rows(space, i, set(targets))
    if infeasible:
        raise NoInterface("source class never tops the remaining classes")

    foot = affine_projection(x, A_eq, b_eq)
    if np.all(np.abs(A_eq @ foot - b_eq) <= _FEAS_EPS):
        ok = dom.shape[0] == 0 or np.all(dom @ foot <= dom_rhs + _FEAS_EPS)
        if ok and np.all(np.abs(foot) <= a + _FEAS_EPS):
            return _finish(x, foot, i, targets, False, [], 0.0)

    box, box_rhs = _box_rows(space.dim, a)
    A_ub = np.vstack([dom, box])
    b_ub = np.concatenate([dom_rhs, box_rhs])
    start = feasible_point(space.dim, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub)
    if start is None:
        raise NoInterface(f"no point ties classes {(i,) + targets} at the top")
    y, _, active, kkt = project_onto_polyhedron(x, A_eq, b_eq, A_ub, b_ub,
                                                start, _max_iter(space))
    return _finish(x, y, i, targets, False, active, kkt)


def boundary_distance_vector(space: ReducedSpace, x: np.ndarray,
                             tol: float = 1e-6) -> BoundaryVector:
    """Flip distance to every target class. Source entry is 0 by convention."""
    x = np.asarray(x, dtype=np.float64)
    i = space.classify(x)
    n = space.n_classes
    distances = np.zeros(n)
    status = ["source"] * n
    flips: list = [None] * n
    for k in range(n):
        if k == i:
            continue
        try:
            fp = project_to_boundary(space, x, i, k, tol)
            status[k] = "direct"
        except DegeneratePair:
            distances[k], status[k] = np.inf, "degenerate"
            continue
        except NoInterface:
            try:
                fp = project_relaxed(space, x, k, tol)
                status[k] = "relaxed"
            except EmptyTargetRegion:
                distances[k], status[k] = np.inf, "empty"
                continue
        distances[k] = fp.distance
        flips[k] = fp
    return BoundaryVector(i, distances, status, flips)


def min_boundary_distance(space: ReducedSpace, x: np.ndarray,
                          tol: float = 1e-6) -> tuple[float, int]:
    """Smallest flip distance and its target class (ties: smallest id).

    Pairs are tried in order of their hyperplane-foot distance, which lower
    bounds the constrained distance, so most targets are pruned without a
    solve.
    """
    x = np.asarray(x, dtype=np.float64)
    i = space.classify(x)
    hm, bias = space.head_matrix, space.head.bias
    lower = []
    for k in range(space.n_classes):
        if k == i:
            continue
        w = hm[i] - hm[k]
        norm = float(np.linalg.norm(w))
        if norm < 1e-14:
            continue
        lower.append((abs(float(w @ x) + float(bias[i] - bias[k])) / norm, k))
    if not lower:
        raise EmptyTargetRegion("no non-degenerate target class")
    lower.sort()

    best, computed = np.inf, {}
    for lb, k in lower:
        if lb > best + 1e-9:
            break
        try:
            fp = project_to_boundary(space, x, i, k, tol)
        except NoInterface:
            try:
                fp = project_relaxed(space, x, k, tol)
            except EmptyTargetRegion:
                continue
        computed[k] = fp.distance
        best = min(best, fp.distance)
    if not computed:
        raise EmptyTargetRegion("every target class region is empty")
    best = min(computed.values())
    winner = min(k for k, d in computed.items() if d == best)
    return float(best), int(winner)
