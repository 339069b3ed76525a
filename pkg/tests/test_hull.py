import numpy as np
import pytest
from conftest import random_space
from helpers import cluster_bundle, space_and_geometry
from oracles import hull_qp_oracle

from ambit.errors import EmptyClass
from ambit.hull import (HullBox, TrainingGeometry, contains_point, gap_radius,
                        hull_bounding_box, hull_distance_vector,
                        hull_volume_fraction, offset_box, project_to_hull)


def test_fw_matches_qp_oracle_within_certificate(rng):
    for _ in range(40):
        dim = int(rng.integers(2, 5))
        m = int(rng.integers(3, 30))
        pts = rng.standard_normal((m, dim))
        x = rng.standard_normal(dim) * 2.0
        proj = project_to_hull(pts, x, eps_bar=0.01)
        ref, _ = hull_qp_oracle(pts, x)
        diam = max(np.linalg.norm(p - q) for p in pts for q in pts)
        assert proj.distance >= ref - 1e-7
        assert proj.distance - ref <= 0.01 * diam + 1e-7


def test_projection_weights_are_convex(rng):
    pts = rng.standard_normal((15, 3))
    proj = project_to_hull(pts, rng.standard_normal(3) * 3)
    assert proj.weights.min() >= -1e-12
    assert proj.weights.sum() == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(pts.T @ proj.weights, proj.point, atol=1e-9)


def test_interior_point_has_zero_distance(rng):
    pts = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0], [4.0, 4.0]])
    proj = project_to_hull(pts, np.array([1.0, 1.0]))
    assert proj.distance <= 0.01 * np.sqrt(32) + 1e-9


def test_known_square_distance():
    pts = np.array([[1.0, 0.0], [2.0, 0.0], [1.0, 1.0], [2.0, 1.0]])
    proj = project_to_hull(pts, np.array([0.0, 0.0]))
    assert proj.distance == pytest.approx(1.0, abs=0.06)  # eps_bar * diam slack


def test_single_point_hull(rng):
    pts = np.array([[2.0, 2.0]])
    proj = project_to_hull(pts, np.array([0.0, 0.0]))
    assert proj.distance == pytest.approx(np.sqrt(8.0), abs=1e-12)


def test_empty_hull_raises():
    with pytest.raises(EmptyClass):
        project_to_hull(np.empty((0, 2)), np.zeros(2))


def test_distance_vector_and_gap(rng):
    bundle, _ = cluster_bundle(rng, n=3, f=3, per_class=40, n_eval=5)
    space, geom = space_and_geometry(bundle)
    y = space.to_reduced(bundle.train.x[0])
    d = hull_distance_vector(geom, y)
    assert d.shape == (3,)
    assert d[0] <= 1e-6        # its own class hull
    assert gap_radius(geom, y) == 0.0


def test_contains_point_agrees_with_geometry(rng):
    pts = rng.standard_normal((20, 2))
    hull_mid = pts.mean(axis=0)
    assert contains_point(pts, hull_mid)
    far = pts.max(axis=0) + 5.0
    assert not contains_point(pts, far)


def test_bounding_box_and_offset():
    geom = TrainingGeometry(np.array([[0.0, 1.0], [2.0, -1.0]]),
                            np.array([0, 1]), 2)
    box = hull_bounding_box(geom)
    np.testing.assert_array_equal(box.lo, [0.0, -1.0])
    np.testing.assert_array_equal(box.hi, [2.0, 1.0])
    grown = offset_box(box, 0.5, 10.0)
    np.testing.assert_array_equal(grown.lo, [-0.5, -1.5])
    clamped = offset_box(box, 100.0, 3.0)
    np.testing.assert_array_equal(clamped.hi, [3.0, 3.0])
    inside = box.contains(np.array([[1.0, 0.0], [5.0, 0.0]]))
    np.testing.assert_array_equal(inside, [True, False])


def test_hull_volume_fraction_of_square(rng):
    # hull = [-1, 1]^2 inside cube [-2, 2]^2 -> fraction 1/4
    pts = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]])
    geom = TrainingGeometry(pts, np.zeros(4, dtype=np.int64), 1)

    class FakeSpace:
        dim = 2
        def require_bound(self):
            return 2.0

    est = hull_volume_fraction(geom, FakeSpace(), n_samples=20_000, seed=5)
    assert est.ci_lo <= 0.25 <= est.ci_hi
    assert est.fraction == pytest.approx(0.25, abs=0.02)


def test_projection_certificate_fields(rng):
    pts = rng.standard_normal((25, 3))
    proj = project_to_hull(pts, rng.standard_normal(3) * 4, eps_bar=0.02)
    assert proj.iterations >= 1
    assert proj.diameter > 0
    # certificate: remaining gap bounds the squared-distance error
    assert proj.fw_gap <= 0.5 * (0.02 * proj.diameter) ** 2 + 1e-12
