"""Volumetric structure of the decision landscape inside the working cube.

The boundary between two classes, restricted to the cube and to the region
where those classes top the logits, is a polytope of one dimension less
than the working space. This module enumerates its vertices by pivoting
along binding-constraint edges on the affine slice, measures it by fan
triangulation, bounds it by the closed-form cube-slice formula, and turns
those measures into coverage statements: how much of the cube is classified
with confidence at least tau, and how much of that confident volume lies
outside the training support.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ._solvers import lp_vertex
from .boundary import _dominance_rows, _pair_normal
from .bounds import compute_bound_params, delta_for_confidence
from .errors import (DegeneratePair, DegenerateRows, DimensionTooHigh,
                     NoInterface, SolverStall, ValidationError, WitnessNotFound)
from .features import ReducedSpace, softmax
from .hull import (HullBox, TrainingGeometry, contains_point,
                   hull_bounding_box, offset_box)
from .util import stream_uniform, wilson_interval

MAX_VERTEX_DIM = 12
MAX_SLICE_DIM = 20
_MC_CHUNK = 8192


# ---------------------------------------------------------------------------
# boundary polytope: vertex enumeration on the affine slice

@dataclass
class BoundaryPolytope:
    source: int
    target: int
    vertices: np.ndarray      # (k, dim) in reduced coordinates
    origin: np.ndarray        # point on the pair hyperplane
    basis: np.ndarray         # (dim, dim-1) orthonormal, spans the hyperplane

    @property
    def expected_dim(self) -> int:
        return self.basis.shape[1]


@dataclass
class VolumeResult:
    volume: float
    degenerate: bool


def _slice_system(space: ReducedSpace, i: int, j: int):
    """Inequalities of the (i, j) boundary polytope on the hyperplane slice."""
    w, c = _pair_normal(space, i, j)
    norm = float(np.linalg.norm(w))
    if norm < 1e-14:
        raise DegeneratePair(f"head rows {i} and {j} coincide")
    a = space.require_bound()
    wn, cn = w / norm, c / norm
    x0 = -cn * wn
    _, _, vt = np.linalg.svd(wn[None, :], full_matrices=True)
    basis = vt[1:].T                      # (dim, dim-1)

    dom, dom_rhs, infeasible = _dominance_rows(space, i, {j})
    if infeasible:
        raise NoInterface(f"classes {i} and {j} never tie at the top")
    eye = np.eye(space.dim)
    A = np.vstack([dom, eye, -eye])
    rhs = np.concatenate([dom_rhs, np.full(2 * space.dim, a)])

    G = A @ basis
    h = rhs - A @ x0
    keep = np.linalg.norm(G, axis=1) > 1e-12
    if np.any(h[~keep] < -1e-9):          # constant constraint violated
        raise NoInterface(f"classes {i} and {j} share no boundary inside the cube")
    G, h = G[keep], h[keep]
    scale = np.linalg.norm(G, axis=1)
    return x0, basis, G / scale[:, None], h / scale, a


def _polish_vertex(t, G, h, atol):
    act = np.flatnonzero(np.abs(G @ t - h) <= 10 * atol)
    if act.size >= t.size:
        t_ref, *_ = np.linalg.lstsq(G[act], h[act], rcond=None)
        if np.all(G @ t_ref - h <= atol):
            return t_ref
    return t


def enumerate_boundary_vertices(space: ReducedSpace, i: int, j: int,
                                tol: float = 1e-6) -> BoundaryPolytope:
    """All vertices of the (i, j) boundary polytope.

    Works on the (dim-1)-dimensional slice: find one vertex by LP, then walk
    every binding-constraint edge to closure, with a visited set keyed on
    rounded coordinates so degenerate vertices cannot cycle.
    """
    if space.dim > MAX_VERTEX_DIM:
        raise DimensionTooHigh(
            f"vertex enumeration limited to {MAX_VERTEX_DIM} dims, got {space.dim}")
    x0, basis, G, h, a = _slice_system(space, i, j)
    d = basis.shape[1]
    atol = 1e-8 * max(1.0, a)

    if d == 0:                            # 1-D working space: slice is a point
        if np.all(h >= -atol):
            return BoundaryPolytope(i, j, x0[None, :], x0, basis)
        raise NoInterface(f"classes {i} and {j} share no boundary inside the cube")

    if d == 1:
        lo, hi = -np.inf, np.inf
        g = G[:, 0]
        pos, neg = g > 0, g < 0
        if np.any(pos):
            hi = float((h[pos] / g[pos]).min())
        if np.any(neg):
            lo = float((h[neg] / g[neg]).max())
        if lo > hi + atol or not np.isfinite(lo) or not np.isfinite(hi):
            raise NoInterface(f"classes {i} and {j} share no boundary inside the cube")
        ts = np.array([[lo]]) if hi - lo <= atol else np.array([[lo], [hi]])
        verts = x0 + ts @ basis.T
        return BoundaryPolytope(i, j, verts, x0, basis)

    rng = np.random.default_rng(0x5EED)
    t0 = None
    for _ in range(8):
        t_cand = lp_vertex(rng.standard_normal(d), G, h)
        if t_cand is None:
            raise NoInterface(f"classes {i} and {j} share no boundary inside the cube")
        t_cand = _polish_vertex(t_cand, G, h, atol)
        act = np.flatnonzero(np.abs(G @ t_cand - h) <= atol)
        if act.size >= d and np.linalg.matrix_rank(G[act], tol=1e-9) == d:
            t0 = t_cand
            break
    if t0 is None:
        raise SolverStall("could not pin an initial vertex of the boundary polytope")

    quant = max(1.0, a) * 1e-7
    key = lambda t: tuple(np.round(t / quant).astype(np.int64))
    seen = {key(t0)}
    queue = [t0]
    verts_t = [t0]
    while queue:
        t = queue.pop()
        act = np.flatnonzero(np.abs(G @ t - h) <= atol)
        for subset in itertools.combinations(act, d - 1):
            M = G[list(subset)]
            _, s, vt = np.linalg.svd(M, full_matrices=True)
            rank = int(np.sum(s > 1e-9)) if s.size else 0
            if rank != d - 1:
                continue
            direction = vt[-1]
            for sgn in (1.0, -1.0):
                u = sgn * direction
                gu = G @ u
                gt = G @ t
                movable = gu > 1e-10
                if not np.any(movable):
                    continue
                steps = (h[movable] - gt[movable]) / gu[movable]
                step = float(steps.min())
                if step <= atol:
                    continue
                t_new = _polish_vertex(t + step * u, G, h, atol)
                k = key(t_new)
                if k not in seen:
                    seen.add(k)
                    queue.append(t_new)
                    verts_t.append(t_new)
    verts = x0 + np.array(verts_t) @ basis.T
    good = np.all(G @ np.array(verts_t).T - h[:, None] <= tol, axis=0)
    return BoundaryPolytope(i, j, verts[good], x0, basis)


def polytope_volume(poly: BoundaryPolytope) -> VolumeResult:
    """(dim-1)-dimensional measure by fan triangulation from the centroid.

    Rank below the expected dimension comes back as volume 0 with the
    degenerate flag set.
    """
    d = poly.expected_dim
    if poly.vertices.shape[0] == 0:
        return VolumeResult(0.0, True)
    if d == 0:
        return VolumeResult(1.0, False)    # counting measure of a point
    T = (poly.vertices - poly.origin) @ poly.basis
    center = T.mean(axis=0)
    spread = T - center
    if T.shape[0] <= d:
        return VolumeResult(0.0, True)
    s = np.linalg.svd(spread, compute_uv=False)
    if s.size < d or s[d - 1] <= 1e-9 * max(1.0, s[0]):
        return VolumeResult(0.0, True)
    if d == 1:
        return VolumeResult(float(T[:, 0].max() - T[:, 0].min()), False)
    try:
        hull = ConvexHull(T)
    except QhullError:
        return VolumeResult(0.0, True)
    total = 0.0
    fact = math.factorial(d)
    for facet in hull.simplices:
        edge = T[facet] - center
        total += abs(float(np.linalg.det(edge))) / fact
    return VolumeResult(total, False)


# ---------------------------------------------------------------------------
# closed-form cube-slice measure

def cube_slice_measure(normal: np.ndarray, offset: float,
                       lo: float = 0.0, hi: float = 1.0) -> float:
    """(n-1)-measure of the hyperplane {normal . x = offset} inside [lo, hi]^n.

    Coordinates with negative weight are reflected, zero-weight coordinates
    are factored out as side lengths, and the remainder is the alternating
    sum over corner overshoots.
    """
    normal = np.asarray(normal, dtype=np.float64)
    n = normal.size
    side = float(hi - lo)
    if side <= 0:
        raise ValidationError("cube needs hi > lo")
    w = normal * side
    t = float(offset) - lo * float(normal.sum())
    big = np.abs(w).max()
    if big == 0.0:
        raise DegeneratePair("normal vector is zero")
    nz = np.abs(w) > 1e-13 * big
    w = w[nz]
    m = w.size
    neg = w < 0
    t -= float(w[neg].sum())
    w = np.abs(w)

    if m == 1:
        inside = -1e-12 <= t <= w[0] + 1e-12
        return (1.0 if inside else 0.0) * side ** (n - 1)

    masks = np.arange(2 ** m, dtype=np.uint64)
    bits = ((masks[:, None] >> np.arange(m, dtype=np.uint64)) & 1).astype(np.float64)
    corner = t - bits @ w
    signs = 1.0 - 2.0 * (bits.sum(axis=1) % 2)
    positive = np.where(corner > 0, corner, 0.0)
    acc = float(signs @ positive ** (m - 1))
    norm_w = float(np.linalg.norm(w))
    measure = norm_w / (math.factorial(m - 1) * float(np.prod(w))) * acc
    return max(measure, 0.0) * side ** (n - 1)


def slice_volume_upper_bound(space: ReducedSpace, i: int, j: int) -> float:
    """Measure of the full (i, j) hyperplane slice of the cube.

    Ignores the dominance constraints, so it upper-bounds the boundary
    polytope's volume; they agree when no other class's region touches the
    slice.
    """
    if space.dim > MAX_SLICE_DIM:
        raise DimensionTooHigh(
            f"slice formula limited to {MAX_SLICE_DIM} dims, got {space.dim}")
    w, c = _pair_normal(space, i, j)
    if float(np.linalg.norm(w)) < 1e-14:
        raise DegeneratePair(f"head rows {i} and {j} coincide")
    a = space.require_bound()
    return cube_slice_measure(w, -c, lo=-a, hi=a)


# ---------------------------------------------------------------------------
# near-boundary slabs and coverage fractions

@dataclass
class SlabSet:
    normals: np.ndarray       # (P, dim) unit rows
    offsets: np.ndarray       # (P,)
    delta: float
    pairs: list

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Whether each point lies within delta of any pair hyperplane."""
        if self.normals.shape[0] == 0:
            return np.zeros(np.atleast_2d(pts).shape[0], dtype=bool)
        dist = np.abs(np.atleast_2d(pts) @ self.normals.T + self.offsets)
        return np.any(dist <= self.delta, axis=1)


def make_slabs(space: ReducedSpace, delta: float, pairs=None) -> SlabSet:
    """Distance-delta slabs around the pairwise boundary hyperplanes."""
    if pairs is None:
        n = space.n_classes
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    rows, offs = [], []
    for i, j in pairs:
        w, c = _pair_normal(space, i, j)
        norm = float(np.linalg.norm(w))
        if norm < 1e-14:
            raise DegenerateRows(f"head rows {i} and {j} coincide")
        rows.append(w / norm)
        offs.append(c / norm)
    return SlabSet(np.array(rows), np.array(offs), float(delta), list(pairs))


@dataclass
class UnionVolume:
    volume: float
    ci_lo: float
    ci_hi: float
    fraction: float
    samples: int


def slab_volume_union(slabs: SlabSet, space: ReducedSpace,
                      n_samples: int = 100_000, seed: int = 0) -> UnionVolume:
    """Monte Carlo volume of the union of slabs inside the cube."""
    a = space.require_bound()
    cube = (2.0 * a) ** space.dim
    hits = 0
    for start in range(0, n_samples, _MC_CHUNK):
        pts = stream_uniform(seed, start, min(_MC_CHUNK, n_samples - start),
                             space.dim, -a, a)
        hits += int(slabs.contains(pts).sum())
    lo, hi = wilson_interval(hits, n_samples)
    return UnionVolume(hits / n_samples * cube, lo * cube, hi * cube,
                       hits / n_samples, n_samples)


@dataclass
class BinaryConfidenceReport:
    tau: float
    delta: float
    boundary_volume: float
    boundary_degenerate: bool
    crude_bound: float
    polytope_bound: float


def high_confidence_fraction_binary(space: ReducedSpace, tau: float,
                                    delta: float | None = None) -> BinaryConfidenceReport:
    """Exact-geometry lower bounds on the confident fraction, two classes.

    The crude bound caps the boundary slice by the largest cube section
    (sqrt(2) times the facet); the polytope bound uses the enumerated
    boundary volume. Both clamp to [0, 1].
    """
    if space.n_classes != 2:
        raise ValidationError(f"binary report needs 2 classes, got {space.n_classes}")
    a = space.require_bound()
    params = compute_bound_params(space)
    if delta is None:
        delta = delta_for_confidence(tau, params.rho_min, 2)
    try:
        vol, degen = (lambda r: (r.volume, r.degenerate))(
            polytope_volume(enumerate_boundary_vertices(space, 0, 1)))
    except NoInterface:
        vol, degen = 0.0, False
    if space.dim >= 2:
        crude = 1.0 - math.sqrt(2.0) * delta / a
    else:
        crude = 1.0 - delta / a
    poly = 1.0 - 2.0 * delta * vol / (2.0 * a) ** space.dim
    clamp = lambda v: float(min(1.0, max(0.0, v)))
    return BinaryConfidenceReport(tau, float(delta), vol, degen,
                                  clamp(crude), clamp(poly))


@dataclass
class MultiConfidenceReport:
    tau: float
    delta: float
    slab_fraction: float
    slab_ci: tuple
    bound: float
    bound_ci: tuple
    measured: float
    measured_ci: tuple
    samples: int
    seed: int


def high_confidence_fraction_multi(space: ReducedSpace, tau: float,
                                   n_samples: int = 100_000, seed: int = 0,
                                   delta: float | None = None) -> MultiConfidenceReport:
    """Slab-union lower bound on the confident fraction, any class count.

    Shares one sample stream between the slab indicator and the directly
    measured softmax indicator so the two columns are comparable.
    """
    a = space.require_bound()
    params = compute_bound_params(space)
    if delta is None:
        delta = delta_for_confidence(tau, params.rho_min, space.n_classes)
    slabs = make_slabs(space, delta)
    hits_slab = hits_conf = 0
    for start in range(0, n_samples, _MC_CHUNK):
        pts = stream_uniform(seed, start, min(_MC_CHUNK, n_samples - start),
                             space.dim, -a, a)
        hits_slab += int(slabs.contains(pts).sum())
        conf = softmax(space.logits(pts)).max(axis=1)
        hits_conf += int((conf >= tau).sum())
    s_lo, s_hi = wilson_interval(hits_slab, n_samples)
    m_lo, m_hi = wilson_interval(hits_conf, n_samples)
    frac = hits_slab / n_samples
    return MultiConfidenceReport(
        tau, float(delta), frac, (s_lo, s_hi),
        max(0.0, 1.0 - frac), (max(0.0, 1.0 - s_hi), max(0.0, 1.0 - s_lo)),
        hits_conf / n_samples, (m_lo, m_hi), n_samples, seed)


@dataclass
class OverconfidenceReport:
    """One box variant of the confidently-wrong volume bound."""

    tau: float
    delta: float
    box_fraction: float       # exact
    slab_fraction: float
    intersection_fraction: float
    bound: float              # >= share of cube outside the box yet confident
    measured: float
    measured_ci: tuple
    samples: int
    seed: int


def overconfident_unknown_fraction(space: ReducedSpace, geom: TrainingGeometry,
                                   tau: float, delta_h: float = 0.0,
                                   n_samples: int = 100_000, seed: int = 0,
                                   delta: float | None = None):
    """Upper-bound and measure the confident volume outside the support box.

    Returns (plain, offset) OverconfidenceReports: one for the raw training
    bounding box, one for the box grown by delta_h and clamped to the cube.
    Both use the same sample stream.
    """
    a = space.require_bound()
    params = compute_bound_params(space)
    if delta is None:
        delta = delta_for_confidence(tau, params.rho_min, space.n_classes)
    slabs = make_slabs(space, delta)
    box = hull_bounding_box(geom)
    grown = offset_box(box, delta_h, a)
    cube = (2.0 * a) ** space.dim

    counts = {"plain": [0, 0, 0], "offset": [0, 0, 0]}   # slab&box, outside&conf, slab
    hits_slab = 0
    for start in range(0, n_samples, _MC_CHUNK):
        pts = stream_uniform(seed, start, min(_MC_CHUNK, n_samples - start),
                             space.dim, -a, a)
        in_slab = slabs.contains(pts)
        conf = softmax(space.logits(pts)).max(axis=1) >= tau
        hits_slab += int(in_slab.sum())
        for tag, bx in (("plain", box), ("offset", grown)):
            inside = bx.contains(pts)
            counts[tag][0] += int((in_slab & inside).sum())
            counts[tag][1] += int((~inside & conf).sum())

    reports = []
    slab_frac = hits_slab / n_samples
    for tag, bx in (("plain", box), ("offset", grown)):
        box_frac = float(np.prod(bx.hi - bx.lo)) / cube
        inter_frac = counts[tag][0] / n_samples
        measured = counts[tag][1] / n_samples
        m_ci = wilson_interval(counts[tag][1], n_samples)
        bound = max(0.0, 1.0 - (box_frac + slab_frac - inter_frac))
        reports.append(OverconfidenceReport(
            tau, float(delta), box_frac, slab_frac, inter_frac, bound,
            measured, m_ci, n_samples, seed))
    return tuple(reports)


# ---------------------------------------------------------------------------
# overconfidence witness

@dataclass
class Witness:
    point: np.ndarray
    distance: float
    confidence: float
    source: int


def find_overconfident_witness(space: ReducedSpace, geom: TrainingGeometry,
                               x: np.ndarray, tau: float = 0.9,
                               steps: int = 200,
                               exclude: str = "hull") -> Witness:
    """A far point that the head still trusts: max ||y - x|| with top softmax
    above tau, y inside the cube but outside the training support.

    Heuristic: start at the cube corner with the best decision margin for
    the query's class, then push away from x by projected gradient steps
    that keep the confidence constraint. Raises WitnessNotFound when the
    search ends inside the support or below tau.
    """
    x = np.asarray(x, dtype=np.float64)
    a = space.require_bound()
    dim = space.dim
    i = int(space.classify(x))
    if dim > 16:
        raise DimensionTooHigh(f"corner scan limited to 16 dims, got {dim}")

    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=dim)))
    corners = signs * a
    z = space.logits(corners)
    margin = z[:, i] - np.max(np.delete(z, i, axis=1), axis=1)
    order = np.argsort(-margin)

    def confident(pt):
        return float(softmax(space.logits(pt))[i]) > tau

    def outside(pt):
        if exclude == "box":
            return not bool(hull_bounding_box(geom).contains(pt)[0])
        return not contains_point(geom.points, pt)

    for idx in order[:8]:
        y = corners[idx].copy()
        if not confident(y):
            continue
        eta = a / 4.0
        for _ in range(steps):
            g = y - x
            norm = float(np.linalg.norm(g))
            if norm < 1e-12:
                g, norm = np.ones(dim), math.sqrt(dim)
            cand = np.clip(y + eta * g / norm, -a, a)
            if confident(cand) and np.linalg.norm(cand - x) > np.linalg.norm(y - x):
                y = cand
            else:
                eta *= 0.5
                if eta < 1e-9 * a:
                    break
        if confident(y) and outside(y):
            return Witness(y, float(np.linalg.norm(y - x)),
                           float(softmax(space.logits(y))[i]), i)
    raise WitnessNotFound(
        f"no point outside the support stayed above confidence {tau}")
