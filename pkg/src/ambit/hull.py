"""Convex-hull geometry of the training set in reduced coordinates.

Distance from a query to the hull of each class's training points is the
backbone of the ambiguity score: a query far from every hull is far from
everything the head was fitted on, whatever the logits claim. Projections
run Frank-Wolfe with exact line search over the hull vertices, warm-started
at the nearest vertex, stopping on the duality-gap certificate
gap <= (eps_bar * diam)^2 / 2 which pins the distance error to
eps_bar * diam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._solvers import feasible_point
from .errors import DimensionTooHigh, EmptyClass, SolverStall
from .features import ReducedSpace
from .util import stream_uniform, wilson_interval

MAX_VOLUME_DIM = 12
_MC_CHUNK = 8192


@dataclass
class TrainingGeometry:
    """Reduced training coordinates with their labels."""

    points: np.ndarray          # (N, dim)
    labels: np.ndarray          # (N,)
    n_classes: int

    @classmethod
    def from_bundle(cls, space: ReducedSpace, bundle) -> "TrainingGeometry":
        pts = space.to_reduced(bundle.train.x)
        return cls(pts, np.asarray(bundle.train.y, dtype=np.int64),
                   space.n_classes)

    def class_points(self, k: int) -> np.ndarray:
        pts = self.points[self.labels == k]
        if pts.shape[0] == 0:
            raise EmptyClass(f"class {k} has no training points")
        return pts


@dataclass
class HullProjection:
    point: np.ndarray
    distance: float
    weights: np.ndarray
    fw_gap: float
    iterations: int
    diameter: float


@dataclass
class HullBox:
    lo: np.ndarray
    hi: np.ndarray

    def contains(self, pts: np.ndarray, tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.all((pts >= self.lo - tol) & (pts <= self.hi + tol), axis=1)


@dataclass
class VolumeEstimate:
    fraction: float
    ci_lo: float
    ci_hi: float
    hits: int
    samples: int


def _diameter_lower(points: np.ndarray, x: np.ndarray) -> float:
    """Diameter of points+{x}: exact for small sets, a lower bound above.

    A lower bound keeps the gap certificate conservative (smaller target).
    """
    n = points.shape[0]
    d_x = float(np.sqrt(((points - x) ** 2).sum(axis=1)).max())
    if n + 1 <= 1024:
        best = d_x
        for i in range(n - 1):
            di = np.sqrt(((points[i + 1:] - points[i]) ** 2).sum(axis=1)).max()
            best = max(best, float(di))
        return best
    centroid = points.mean(axis=0)
    far = points[int(np.argmax(((points - centroid) ** 2).sum(axis=1)))]
    d_far = float(np.sqrt(((points - far) ** 2).sum(axis=1)).max())
    return max(d_x, d_far)


def project_to_hull(points: np.ndarray, x: np.ndarray,
                    eps_bar: float = 0.01) -> HullProjection:
    """Nearest point of conv(points) to x, within eps_bar * diameter."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if points.shape[0] == 0:
        raise EmptyClass("cannot project onto the hull of zero points")
    x = np.asarray(x, dtype=np.float64)

    diam = _diameter_lower(points, x)
    j0 = int(np.argmin(((points - x) ** 2).sum(axis=1)))
    w = np.zeros(points.shape[0])
    w[j0] = 1.0
    cur = points[j0].copy()
    if diam == 0.0:
        return HullProjection(cur, float(np.linalg.norm(x - cur)), w, 0.0, 0, 0.0)

    target = 0.5 * (eps_bar * diam) ** 2
    max_iter = math.ceil(4.0 / (eps_bar * eps_bar))
    best = (np.inf, cur.copy(), w.copy(), 0)
    it = 0
    for it in range(1, max_iter + 1):
        grad = cur - x
        scores = points @ grad
        s_idx = int(np.argmin(scores))
        gap = float(cur @ grad - scores[s_idx])
        if gap < best[0]:
            best = (gap, cur.copy(), w.copy(), it - 1)
        if gap <= target:
            break
        step = points[s_idx] - cur
        denom = float(step @ step)
        if denom <= 0.0:
            break
        gamma = min(1.0, max(0.0, gap / denom))
        cur = cur + gamma * step
        w *= (1.0 - gamma)
        w[s_idx] += gamma
    else:
        gap, cur, w, it = best
        if gap > target:
            raise SolverStall(
                f"Frank-Wolfe gap {gap:.3e} above target {target:.3e} "
                f"after {max_iter} iterations")
        return HullProjection(cur, float(np.linalg.norm(x - cur)), w / w.sum(),
                              gap, it, diam)
    w = w / w.sum()
    grad = cur - x
    gap = float(cur @ grad - (points @ grad).min())
    return HullProjection(cur, float(np.linalg.norm(x - cur)), w, gap, it, diam)


def hull_distance_vector(geom: TrainingGeometry, x: np.ndarray,
                         eps_bar: float = 0.01) -> np.ndarray:
    """Distance from x to each class hull, as an (n_classes,) vector."""
    return np.array([
        project_to_hull(geom.class_points(k), x, eps_bar).distance
        for k in range(geom.n_classes)])


def gap_radius(geom: TrainingGeometry, x: np.ndarray) -> float:
    """Distance to the nearest training point of any class.

    This is the radius of the largest open ball around x free of training
    points; a training point itself gets 0.
    """
    return float(np.sqrt(((geom.points - x) ** 2).sum(axis=1).min()))


def contains_point(points: np.ndarray, x: np.ndarray, tol: float = 1e-8) -> bool:
    """Membership of x in conv(points), decided by LP feasibility."""
    points = np.atleast_2d(points)
    x = np.asarray(x, dtype=np.float64)
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    if np.any(x < lo - tol) or np.any(x > hi + tol):
        return False
    n = points.shape[0]
    A_eq = np.vstack([points.T, np.ones((1, n))])
    b_eq = np.concatenate([x, [1.0]])
    return feasible_point(n, A_eq=A_eq, b_eq=b_eq,
                          lo=np.zeros(n), hi=None, tol=tol) is not None


def hull_bounding_box(geom: TrainingGeometry) -> HullBox:
    """Coordinatewise min/max box over all training points, classes pooled."""
    return HullBox(geom.points.min(axis=0).copy(), geom.points.max(axis=0).copy())


def offset_box(box: HullBox, delta: float, bound: float) -> HullBox:
    """Grow a box outward by delta, clamped to the working cube [-a, a]."""
    return HullBox(np.clip(box.lo - delta, -bound, bound),
                   np.clip(box.hi + delta, -bound, bound))


def hull_volume_fraction(geom: TrainingGeometry, space: ReducedSpace,
                         n_samples: int = 100_000, seed: int = 0) -> VolumeEstimate:
    """Fraction of the working cube inside conv(all training points).

    Monte Carlo with a per-sample deterministic stream; membership is the
    same LP as ``contains_point`` behind a bounding-box prefilter.
    """
    dim = geom.points.shape[1]
    if dim > MAX_VOLUME_DIM:
        raise DimensionTooHigh(f"hull volume limited to {MAX_VOLUME_DIM} dims, got {dim}")
    a = space.require_bound()
    pts = geom.points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    n = pts.shape[0]
    A_eq = np.vstack([pts.T, np.ones((1, n))])
    zeros = np.zeros(n)
    hits = 0
    for start in range(0, n_samples, _MC_CHUNK):
        block = stream_uniform(seed, start, min(_MC_CHUNK, n_samples - start), dim, -a, a)
        inside_box = np.all((block >= lo) & (block <= hi), axis=1)
        for row in block[inside_box]:
            b_eq = np.concatenate([row, [1.0]])
            if feasible_point(n, A_eq=A_eq, b_eq=b_eq, lo=zeros, hi=None) is not None:
                hits += 1
    ci_lo, ci_hi = wilson_interval(hits, n_samples)
    return VolumeEstimate(hits / n_samples, ci_lo, ci_hi, hits, n_samples)
