import numpy as np
import pytest
from conftest import random_space
from oracles import boundary_oracle

from ambit.boundary import (boundary_distance_vector, check_interface,
                            min_boundary_distance, project_relaxed,
                            project_to_boundary, project_to_multi)
from ambit.errors import (NoInterface, NotSourceClass, NotTargetClass)
from ambit.features import softmax


def random_query(rng, space):
    a = space.require_bound()
    return rng.uniform(-a, a, space.dim) * 0.5


def test_flip_matches_enumeration_oracle(rng):
    checked = 0
    while checked < 30:
        n = int(rng.integers(2, 5))
        space = random_space(rng, n, int(rng.integers(n, n + 3)), bound=3.0)
        y = random_query(rng, space)
        i = space.classify(y)
        j = (i + 1) % n
        try:
            fp = project_to_boundary(space, y, i, j)
        except NoInterface:
            continue
        ref, _ = boundary_oracle(space, y, i, j)
        assert fp.distance == pytest.approx(ref, abs=1e-6)
        checked += 1


def test_flip_point_sits_on_boundary_and_wins(rng):
    for _ in range(25):
        n = int(rng.integers(3, 6))
        space = random_space(rng, n, n + 2, bound=4.0)
        y = random_query(rng, space)
        i = space.classify(y)
        j = (i + 2) % n
        try:
            fp = project_to_boundary(space, y, i, j)
        except NoInterface:
            continue
        z = space.logits(fp.point)
        # tie between source and target at the top, within tolerance
        assert z[i] == pytest.approx(z[j], abs=1e-6)
        assert np.all(z[i] >= z - 1e-6)
        a = space.require_bound()
        assert np.all(np.abs(fp.point) <= a + 1e-8)


def test_source_class_required(rng):
    space = random_space(rng, 3, 4, bound=3.0)
    y = random_query(rng, space)
    i = space.classify(y)
    wrong = (i + 1) % 3
    with pytest.raises(NotSourceClass):
        project_to_boundary(space, y, wrong, i)
    with pytest.raises(NotTargetClass):
        project_to_boundary(space, y, i, i)


def test_relaxed_never_exceeds_direct(rng):
    for _ in range(25):
        n = int(rng.integers(3, 6))
        space = random_space(rng, n, n + 1, bound=4.0)
        y = random_query(rng, space)
        i = space.classify(y)
        j = (i + 1) % n
        try:
            direct = project_to_boundary(space, y, i, j).distance
        except NoInterface:
            continue
        relaxed = project_relaxed(space, y, j).distance
        assert relaxed <= direct + 1e-7


def test_relaxed_point_reaches_target_region(rng):
    for _ in range(15):
        space = random_space(rng, 4, 5, bound=4.0)
        y = random_query(rng, space)
        i = space.classify(y)
        j = (i + 1) % 4
        fp = project_relaxed(space, y, j)
        z = space.logits(fp.point)
        assert z[j] >= z.max() - 1e-6


def test_multi_target_ties_all(rng):
    space = random_space(rng, 4, 6, bound=5.0)
    y = random_query(rng, space)
    i = space.classify(y)
    targets = [k for k in range(4) if k != i][:2]
    fp = project_to_multi(space, y, targets)
    z = space.logits(fp.point)
    for j in targets:
        assert z[i] == pytest.approx(z[j], abs=1e-6)


def test_distance_vector_consistency(rng):
    space = random_space(rng, 5, 6, bound=4.0)
    y = random_query(rng, space)
    vec = boundary_distance_vector(space, y)
    assert vec.distances[vec.source] == 0.0
    finite = [(d, k) for k, d in enumerate(vec.distances)
              if k != vec.source and np.isfinite(d)]
    if finite:
        best, winner = min_boundary_distance(space, y)
        assert best == pytest.approx(min(d for d, _ in finite), abs=1e-9)


def test_min_distance_prunes_to_same_answer(rng):
    for _ in range(20):
        n = int(rng.integers(3, 7))
        space = random_space(rng, n, n + 2, bound=4.0)
        y = random_query(rng, space)
        best, winner = min_boundary_distance(space, y)
        vec = boundary_distance_vector(space, y)
        others = np.delete(vec.distances, vec.source)
        assert best == pytest.approx(float(others.min()), abs=1e-9)


def test_min_distance_lower_bounds_hyperplane_feet(rng):
    # the constrained flip can never be closer than the raw hyperplane foot
    space = random_space(rng, 4, 4, bound=5.0)
    y = random_query(rng, space)
    i = space.classify(y)
    best, winner = min_boundary_distance(space, y)
    hm, b = space.head_matrix, space.head.bias
    w = hm[i] - hm[winner]
    foot = abs(float(w @ y) + float(b[i] - b[winner])) / np.linalg.norm(w)
    assert best >= foot - 1e-9


def test_check_interface_binary_always_true(rng):
    space = random_space(rng, 2, 3, bound=3.0)
    assert check_interface(space, 0, 1)


def test_boundary_confidence_is_balanced(rng):
    # on a 2-class flip point both softmax entries are exactly 1/2
    space = random_space(rng, 2, 4, bound=4.0)
    y = random_query(rng, space)
    i = space.classify(y)
    fp = project_to_boundary(space, y, i, 1 - i)
    p = softmax(space.logits(fp.point))
    assert p[0] == pytest.approx(0.5, abs=1e-6)
